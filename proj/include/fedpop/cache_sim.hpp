#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace fedpop {

// One cacheable request, already resolved to a catalog row index and a
// period index. Traces are time-ordered.
struct CacheRequest {
  int content = 0;
  int period = 0;
};

enum class CachePolicy { kPredictionPrefill, kArPrefill, kLru, kLfu, kFifo, kRandom };

std::string policy_name(CachePolicy policy);

struct ReplayResult {
  std::uint64_t hits = 0;
  std::uint64_t total = 0;
  double hit_rate() const {
    return total == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(total);
  }
};

// For prefill policies: the contents to cache for a given period, best
// first. Called once per period boundary.
using RankingProvider = std::function<std::vector<int>(int period)>;

// Replays the trace against one cache. Reactive policies (LRU, LFU with
// persistent counters, FIFO, random eviction) update continuously;
// prefill policies hold the provider's top-capacity set for each period
// and do not insert on miss.
ReplayResult replay(const std::vector<CacheRequest>& trace, CachePolicy policy,
                    int capacity, const RankingProvider& ranking = {},
                    std::uint64_t seed = 0);

struct CurvePoint {
  CachePolicy policy;
  double relative_size = 0.0;
  double hit_rate = 0.0;
  double hits = 0.0;  // mean over seeds for the randomized policy
  std::uint64_t total = 0;
};

struct SweepSpec {
  std::vector<CachePolicy> policies;
  std::vector<double> relative_sizes;  // in (0,1]
  int library_size = 0;                // F
  RankingProvider prediction_ranking;  // for kPredictionPrefill
  RankingProvider ar_ranking;          // for kArPrefill
  int random_seeds = 20;               // replays averaged for kRandom
  std::uint64_t seed = 0;
};

// capacity = round(relative_size * F); one replay per (policy, size),
// the randomized policy averaged over its seeds.
std::vector<CurvePoint> sweep(const std::vector<CacheRequest>& trace,
                              const SweepSpec& spec);

// Ranking helper: indices sorted by descending score, ties broken by
// ascending index.
std::vector<int> ranking_from_scores(const Eigen::VectorXd& scores);

}  // namespace fedpop
