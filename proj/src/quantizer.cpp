#include "fedpop/quantizer.hpp"

#include <cmath>
#include <stdexcept>

#include "fedpop/kernels.hpp"
#include "fedpop/rng.hpp"

namespace fedpop {

std::size_t QuantizedGradient::nonzeros() const {
  std::size_t n = 0;
  for (const auto l : levels) n += l != 0;
  return n;
}

QuantizedGradient quantize(const Eigen::VectorXd& v, std::uint32_t s,
                           std::mt19937_64& rng) {
  if (s < 1) throw std::invalid_argument("quantization level must be >= 1");
  if (!v.allFinite()) throw std::invalid_argument("non-finite quantizer input");

  const auto d = static_cast<std::size_t>(v.size());
  QuantizedGradient q;
  q.level_count = s;
  q.signs.assign(d, 1);
  q.levels.assign(d, 0);

  const auto& ops = kernels::active();
  const double norm = std::sqrt(ops.dot(v.data(), v.data(), d));
  q.norm = norm;
  if (norm == 0.0) return q;  // all-zero vector round-trips exactly

  // SIMD pass: lower level l_i = min(floor(s|v_i|/norm), s-1) and the
  // fractional part q_i; then a sequential pass draws the outcomes so the
  // stream consumption order is fixed.
  std::vector<double> lo(d), frac(d);
  ops.quant_prepare(v.data(), static_cast<double>(s) / norm,
                    static_cast<double>(s) - 1.0, lo.data(), frac.data(), d);

  for (std::size_t i = 0; i < d; ++i) {
    auto level = static_cast<std::uint32_t>(lo[i]);
    // frac == 0 keeps the lower endpoint deterministically.
    if (frac[i] > 0.0 && uniform01(rng) < frac[i]) ++level;
    q.levels[i] = level;
    q.signs[i] = (level != 0 && v[i] < 0.0) ? -1 : 1;
  }
  return q;
}

Eigen::VectorXd dequantize(const QuantizedGradient& q) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(q.dim()));
  const double scale = q.norm / static_cast<double>(q.level_count);
  for (std::size_t i = 0; i < q.dim(); ++i)
    out[static_cast<Eigen::Index>(i)] =
        scale * static_cast<double>(q.signs[i]) * static_cast<double>(q.levels[i]);
  return out;
}

}  // namespace fedpop
