// Demo-data generator: emits a MovieLens-layout u.data/u.item pair so the
// pipeline can be exercised without the real dataset on disk.

#include <iostream>

#include <CLI11.hpp>

#include "synthetic.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Generate a synthetic MovieLens-style trace"};
  std::string dir = ".";
  fedpop::synth::TraceSpec spec;
  app.add_option("-o,--out", dir, "output directory");
  app.add_option("--items", spec.items, "catalog size");
  app.add_option("--users", spec.users, "user count");
  app.add_option("--periods", spec.periods, "12-hour periods covered");
  app.add_option("--events", spec.target_events, "approximate event count");
  app.add_option("--seed", spec.seed, "generator seed");
  CLI11_PARSE(app, argc, argv);

  try {
    fedpop::synth::write_dataset(dir, spec);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
