#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace fedpop {

// Stochastically quantized vector: (norm, signs, integer levels in [0,s]).
// Coordinate i reconstructs to norm * signs[i] * levels[i] / s. Signs of
// zero-level coordinates are normalized to +1 (they carry no information),
// which makes encode/decode round-trips exact on the tuple.
struct QuantizedGradient {
  double norm = 0.0;
  std::vector<std::int8_t> signs;     // -1 or +1
  std::vector<std::uint32_t> levels;  // 0..s
  std::uint32_t level_count = 1;      // s

  std::size_t dim() const { return levels.size(); }
  std::size_t nonzeros() const;

  bool operator==(const QuantizedGradient& other) const = default;
};

// Random quantization with level count s >= 1. The coordinate magnitude
// |v_i|/||v||_2 lands in [l/s, (l+1)/s]; the upper level is chosen with
// probability s*|v_i|/||v||_2 - l, so the reconstruction is unbiased.
// The all-zero vector is represented as norm 0 (exact round trip).
QuantizedGradient quantize(const Eigen::VectorXd& v, std::uint32_t s,
                           std::mt19937_64& rng);

Eigen::VectorXd dequantize(const QuantizedGradient& q);

}  // namespace fedpop
