#include "fedpop/cache_sim.hpp"

#include <algorithm>
#include <cmath>
#include <list>
#include <numeric>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include "fedpop/rng.hpp"

namespace fedpop {

std::string policy_name(CachePolicy policy) {
  switch (policy) {
    case CachePolicy::kPredictionPrefill: return "prediction";
    case CachePolicy::kArPrefill: return "ar";
    case CachePolicy::kLru: return "lru";
    case CachePolicy::kLfu: return "lfu";
    case CachePolicy::kFifo: return "fifo";
    case CachePolicy::kRandom: return "random";
  }
  return "unknown";
}

namespace {

ReplayResult replay_prefill(const std::vector<CacheRequest>& trace, int capacity,
                            const RankingProvider& ranking) {
  if (!ranking) throw std::invalid_argument("prefill policy needs a ranking");
  ReplayResult r;
  std::unordered_set<int> resident;
  int current_period = -1;
  for (const auto& req : trace) {
    if (req.period != current_period) {
      current_period = req.period;
      resident.clear();
      const auto ranked = ranking(current_period);
      for (int i = 0; i < capacity && i < static_cast<int>(ranked.size()); ++i)
        resident.insert(ranked[i]);
    }
    ++r.total;
    r.hits += resident.count(req.content) != 0;
  }
  return r;
}

ReplayResult replay_lru(const std::vector<CacheRequest>& trace, int capacity) {
  ReplayResult r;
  std::list<int> order;  // front = most recent
  std::unordered_map<int, std::list<int>::iterator> where;
  for (const auto& req : trace) {
    ++r.total;
    const auto it = where.find(req.content);
    if (it != where.end()) {
      ++r.hits;
      order.splice(order.begin(), order, it->second);
      continue;
    }
    if (capacity == 0) continue;
    if (static_cast<int>(order.size()) >= capacity) {
      where.erase(order.back());
      order.pop_back();
    }
    order.push_front(req.content);
    where[req.content] = order.begin();
  }
  return r;
}

ReplayResult replay_lfu(const std::vector<CacheRequest>& trace, int capacity) {
  // Perfect-LFU: frequency counters persist across evictions.
  ReplayResult r;
  std::unordered_map<int, std::uint64_t> freq;
  std::unordered_set<int> resident;
  for (const auto& req : trace) {
    ++r.total;
    ++freq[req.content];
    if (resident.count(req.content)) {
      ++r.hits;
      continue;
    }
    if (capacity == 0) continue;
    if (static_cast<int>(resident.size()) >= capacity) {
      int victim = -1;
      std::uint64_t best = 0;
      for (const int c : resident) {
        // Evict the lowest frequency; ties fall to the smallest index.
        if (victim < 0 || freq[c] < best || (freq[c] == best && c < victim)) {
          victim = c;
          best = freq[c];
        }
      }
      resident.erase(victim);
    }
    resident.insert(req.content);
  }
  return r;
}

ReplayResult replay_fifo(const std::vector<CacheRequest>& trace, int capacity) {
  ReplayResult r;
  std::list<int> queue;  // front = oldest
  std::unordered_set<int> resident;
  for (const auto& req : trace) {
    ++r.total;
    if (resident.count(req.content)) {
      ++r.hits;
      continue;
    }
    if (capacity == 0) continue;
    if (static_cast<int>(queue.size()) >= capacity) {
      resident.erase(queue.front());
      queue.pop_front();
    }
    queue.push_back(req.content);
    resident.insert(req.content);
  }
  return r;
}

ReplayResult replay_random(const std::vector<CacheRequest>& trace, int capacity,
                           std::uint64_t seed) {
  ReplayResult r;
  auto eng = make_engine(seed, RngStream::kCacheRandom);
  std::vector<int> resident;
  std::unordered_set<int> member;
  for (const auto& req : trace) {
    ++r.total;
    if (member.count(req.content)) {
      ++r.hits;
      continue;
    }
    if (capacity == 0) continue;
    if (static_cast<int>(resident.size()) >= capacity) {
      std::uniform_int_distribution<std::size_t> dist(0, resident.size() - 1);
      const std::size_t victim = dist(eng);
      member.erase(resident[victim]);
      resident[victim] = resident.back();
      resident.pop_back();
    }
    resident.push_back(req.content);
    member.insert(req.content);
  }
  return r;
}

}  // namespace

ReplayResult replay(const std::vector<CacheRequest>& trace, CachePolicy policy,
                    int capacity, const RankingProvider& ranking,
                    std::uint64_t seed) {
  if (capacity < 0) throw std::invalid_argument("capacity cannot be negative");
  switch (policy) {
    case CachePolicy::kPredictionPrefill:
    case CachePolicy::kArPrefill:
      return replay_prefill(trace, capacity, ranking);
    case CachePolicy::kLru: return replay_lru(trace, capacity);
    case CachePolicy::kLfu: return replay_lfu(trace, capacity);
    case CachePolicy::kFifo: return replay_fifo(trace, capacity);
    case CachePolicy::kRandom: return replay_random(trace, capacity, seed);
  }
  throw std::invalid_argument("unknown policy");
}

std::vector<CurvePoint> sweep(const std::vector<CacheRequest>& trace,
                              const SweepSpec& spec) {
  if (spec.library_size < 1)
    throw std::invalid_argument("sweep needs the library size");
  for (const double s : spec.relative_sizes)
    if (s <= 0.0 || s > 1.0)
      throw std::invalid_argument("relative sizes must lie in (0,1]");

  std::vector<CurvePoint> curve;
  for (const CachePolicy policy : spec.policies) {
    for (const double rel : spec.relative_sizes) {
      const int capacity =
          static_cast<int>(std::llround(rel * spec.library_size));
      CurvePoint pt;
      pt.policy = policy;
      pt.relative_size = rel;
      if (policy == CachePolicy::kRandom) {
        double hit_acc = 0.0, hits_acc = 0.0;
        std::uint64_t total = 0;
        const int seeds = std::max(1, spec.random_seeds);
        for (int k = 0; k < seeds; ++k) {
          const auto r = replay(trace, policy, capacity, {},
                                derive_seed(spec.seed, RngStream::kCacheRandom,
                                            static_cast<std::uint64_t>(k)));
          hit_acc += r.hit_rate();
          hits_acc += static_cast<double>(r.hits);
          total = r.total;
        }
        pt.hit_rate = hit_acc / seeds;
        pt.hits = hits_acc / seeds;
        pt.total = total;
      } else {
        const RankingProvider& provider =
            policy == CachePolicy::kPredictionPrefill ? spec.prediction_ranking
            : policy == CachePolicy::kArPrefill       ? spec.ar_ranking
                                                      : RankingProvider{};
        const auto r = replay(trace, policy, capacity, provider, spec.seed);
        pt.hit_rate = r.hit_rate();
        pt.hits = static_cast<double>(r.hits);
        pt.total = r.total;
      }
      curve.push_back(pt);
    }
  }
  return curve;
}

std::vector<int> ranking_from_scores(const Eigen::VectorXd& scores) {
  std::vector<int> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  });
  return idx;
}

}  // namespace fedpop
