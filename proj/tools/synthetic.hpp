#pragma once

#include <cstdint>
#include <string>

namespace fedpop::synth {

// Deterministic MovieLens-style dataset: `items` movies with 19 genre
// flags and release years, `users` raters, and roughly `target_events`
// tab-separated rating events spread over `periods` twelve-hour windows.
// Per-item request rates follow a log-linear function of the features
// with heavy-tailed spread, so popularity is predictable from features
// and concentrated like a real catalog.
struct TraceSpec {
  int items = 1682;
  int users = 943;
  int periods = 420;
  long target_events = 100000;
  double period_seconds = 12 * 3600.0;
  std::uint64_t seed = 42;
};

// Writes u.data / u.item files under `dir` (created if needed).
void write_dataset(const std::string& dir, const TraceSpec& spec);

}  // namespace fedpop::synth
