#include "synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <vector>

#include "fedpop/errors.hpp"
#include "fedpop/rng.hpp"

namespace fedpop::synth {
namespace {

constexpr int kGenres = 19;

struct Item {
  int id;
  int year;
  std::array<int, kGenres> flags{};
  double rate;  // expected events per period
};

}  // namespace

void write_dataset(const std::string& dir, const TraceSpec& spec) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);

  auto eng = make_engine(spec.seed, RngStream::kSynthetic);
  std::normal_distribution<double> normal(0.0, 1.0);

  // Genre prevalence falls off like a real catalog; the log-rate weights
  // tie popularity to the features so a feature-based model has signal.
  std::vector<double> genre_prob(kGenres);
  std::vector<double> genre_weight(kGenres);
  for (int g = 0; g < kGenres; ++g) {
    genre_prob[g] = 0.5 / (1.0 + g);
    genre_weight[g] = 0.8 * normal(eng);
  }
  const double year_weight = 1.1;

  std::vector<Item> items(spec.items);
  double rate_sum = 0.0;
  for (int f = 0; f < spec.items; ++f) {
    Item& it = items[f];
    it.id = f + 1;
    // Years skew recent, 1930..1998.
    const double u = uniform01(eng);
    it.year = 1930 + static_cast<int>(68.0 * std::pow(u, 0.35));
    int assigned = 0;
    for (int g = 0; g < kGenres; ++g)
      if (uniform01(eng) < genre_prob[g]) {
        it.flags[g] = 1;
        ++assigned;
      }
    if (assigned == 0) it.flags[static_cast<int>(eng() % kGenres)] = 1;

    double z = year_weight * (it.year - 1930) / 68.0;
    for (int g = 0; g < kGenres; ++g) z += genre_weight[g] * it.flags[g];
    z += 0.5 * normal(eng);  // per-item idiosyncrasy
    it.rate = std::exp(z);
    rate_sum += it.rate;
  }
  const double per_period = static_cast<double>(spec.target_events) /
                            static_cast<double>(spec.periods);
  for (auto& it : items) it.rate *= per_period / rate_sum;

  {
    std::ofstream uitem(fs::path(dir) / "u.item", std::ios::binary);
    if (!uitem) throw io_error("cannot write u.item under " + dir);
    for (const auto& it : items) {
      uitem << it.id << "|Title " << it.id << "|01-Jan-" << it.year
            << "||http://example.invalid/" << it.id;
      for (int g = 0; g < kGenres; ++g) uitem << '|' << it.flags[g];
      uitem << "\n";
    }
  }

  // Empirical MovieLens rating histogram.
  const double rating_cdf[5] = {0.06, 0.17, 0.44, 0.78, 1.0};
  const std::int64_t origin = 874000000;

  std::ofstream udata(fs::path(dir) / "u.data", std::ios::binary);
  if (!udata) throw io_error("cannot write u.data under " + dir);
  for (int n = 0; n < spec.periods; ++n) {
    for (const auto& it : items) {
      std::poisson_distribution<int> pois(it.rate);
      const int count = pois(eng);
      for (int k = 0; k < count; ++k) {
        const int user = 1 + static_cast<int>(eng() % spec.users);
        const double r = uniform01(eng);
        int rating = 5;
        for (int s = 0; s < 5; ++s)
          if (r < rating_cdf[s]) {
            rating = s + 1;
            break;
          }
        const auto ts = origin + static_cast<std::int64_t>(
                                     (n + uniform01(eng)) * spec.period_seconds);
        udata << user << '\t' << it.id << '\t' << rating << '\t' << ts << "\n";
      }
    }
  }
}

}  // namespace fedpop::synth
