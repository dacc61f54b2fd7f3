#pragma once

#include <cstdint>
#include <random>

namespace fedpop {

// Stream tags for deriving independent substreams from one master seed.
// Keeping the tag set centralized makes it easy to see which components
// consume randomness and guarantees that, e.g., minibatch selection can
// never perturb the noise draws.
enum class RngStream : std::uint64_t {
  kNoise = 0x9e3779b97f4a7c15ull,
  kMinibatch = 0xbf58476d1ce4e5b9ull,
  kQuantize = 0x94d049bb133111ebull,
  kPartition = 0xd6e8feb86659fd93ull,
  kParticipants = 0xa0761d6478bd642full,
  kCacheRandom = 0xe7037ed1a0b428dbull,
  kSynthetic = 0x8ebc6af09c88c6e3ull,
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Derives a substream seed from (master, stream, a, b). Used to give each
// (node, round) pair its own engine so that per-node work can run in any
// order without changing results.
inline std::uint64_t derive_seed(std::uint64_t master, RngStream stream,
                                 std::uint64_t a = 0, std::uint64_t b = 0) {
  std::uint64_t h = splitmix64(master ^ static_cast<std::uint64_t>(stream));
  h = splitmix64(h ^ splitmix64(a + 0x165667b19e3779f9ull));
  h = splitmix64(h ^ splitmix64(b + 0x27d4eb2f165667c5ull));
  return h;
}

inline std::mt19937_64 make_engine(std::uint64_t master, RngStream stream,
                                   std::uint64_t a = 0, std::uint64_t b = 0) {
  return std::mt19937_64(derive_seed(master, stream, a, b));
}

// Uniform in [0,1) from the engine's raw 64 bits. Avoids the
// library-specific state of std::uniform_real_distribution so streams
// stay aligned no matter how many draws interleave.
inline double uniform01(std::mt19937_64& eng) {
  return static_cast<double>(eng() >> 11) * 0x1.0p-53;
}

// Standard normal stream. Owns the Box-Muller spare so that callers
// cannot accidentally interleave two streams through one cache.
class NormalStream {
 public:
  explicit NormalStream(std::mt19937_64 engine) : eng_(std::move(engine)) {}

  double next() { return dist_(eng_); }

  template <typename Vec>
  void fill(Vec& v) {
    for (int i = 0; i < static_cast<int>(v.size()); ++i) v[i] = dist_(eng_);
  }

 private:
  std::mt19937_64 eng_;
  std::normal_distribution<double> dist_{0.0, 1.0};
};

}  // namespace fedpop
