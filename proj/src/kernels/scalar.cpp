#include <cmath>
#include <cstddef>

#include "fedpop/kernels.hpp"

namespace fedpop::kernels {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

double sum_scalar(const double* a, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i];
  return acc;
}

void vexp_scalar(const double* x, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = std::exp(x[i]);
}

void axpy_scalar(double a, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void triad_scalar(double a, double* th, double b, const double* g, double c,
                  const double* eta, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) th[i] = a * th[i] + b * g[i] + c * eta[i];
}

void sek_row_scalar(const double* X, std::size_t F, std::size_t Q,
                    const double* xi, const double* w, double amp,
                    double* out) {
  for (std::size_t j = 0; j < F; ++j) {
    double acc = 0.0;
    for (std::size_t q = 0; q < Q; ++q) {
      const double d = xi[q] - X[q * F + j];
      acc += w[q] * d * d;
    }
    out[j] = amp * std::exp(-acc);
  }
}

void sek_grad_row_scalar(const double* X, std::size_t F, std::size_t Q,
                         const double* xi, const double* k_row,
                         const double* kinv_row, const double* alpha,
                         double alpha_i, double* acc1, double* acc2, double* s1,
                         double* s2) {
  double t1 = 0.0, t2 = 0.0;
  for (std::size_t j = 0; j < F; ++j) {
    const double c1 = kinv_row[j] * k_row[j];
    const double c2 = alpha_i * alpha[j] * k_row[j];
    t1 += c1;
    t2 += c2;
    for (std::size_t q = 0; q < Q; ++q) {
      const double d = xi[q] - X[q * F + j];
      const double dd = d * d;
      acc1[q] += c1 * dd;
      acc2[q] += c2 * dd;
    }
  }
  *s1 += t1;
  *s2 += t2;
}

void quant_prepare_scalar(const double* v, double inv_norm_times_s,
                          double s_minus_1, double* lo, double* frac,
                          std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const double u = std::abs(v[i]) * inv_norm_times_s;
    double l = std::floor(u);
    if (l > s_minus_1) l = s_minus_1;
    lo[i] = l;
    frac[i] = u - l;
  }
}

}  // namespace

const Ops& scalar_ops() {
  static const Ops ops = {
      "scalar",          dot_scalar,          sum_scalar,
      vexp_scalar,       axpy_scalar,         triad_scalar,
      sek_row_scalar,    sek_grad_row_scalar, quant_prepare_scalar,
  };
  return ops;
}

}  // namespace fedpop::kernels
