#pragma once

#include <cstddef>
#include <string>
#include <vector>

// Data-parallel inner loops used by the model, the sampler and the
// quantizer. Every kernel has a scalar reference implementation and,
// where the CPU supports it, an AVX2+FMA variant selected at runtime.
// The two are equivalence-tested against each other; results may differ
// by rounding (reductions re-associate, exp uses a polynomial path) but
// never beyond the tolerances asserted in tests/test_kernels.cpp.

namespace fedpop::kernels {

struct Ops {
  const char* name;

  // sum_i a[i]*b[i]
  double (*dot)(const double* a, const double* b, std::size_t n);

  // sum_i a[i]
  double (*sum)(const double* a, std::size_t n);

  // out[i] = exp(x[i])
  void (*vexp)(const double* x, double* out, std::size_t n);

  // y[i] += a * x[i]
  void (*axpy)(double a, const double* x, double* y, std::size_t n);

  // th[i] = a*th[i] + b*g[i] + c*eta[i]   (momentum-style fused update)
  void (*triad)(double a, double* th, double b, const double* g, double c,
                const double* eta, std::size_t n);

  // One row of a squared-exponential kernel matrix.
  //   out[j] = amp * exp(-sum_q w[q] * (xi[q] - X[q*F + j])^2),  j in [0,F)
  // X is feature-major (Q rows of F contiguous values).
  void (*sek_row)(const double* X, std::size_t F, std::size_t Q,
                  const double* xi, const double* w, double amp, double* out);

  // Fused accumulation pass for the kernel-hyperparameter gradients.
  // For row i against all j:
  //   c1 = kinv_row[j] * k_row[j]
  //   c2 = alpha_i * alpha[j] * k_row[j]
  //   s1 += c1; s2 += c2
  //   acc1[q] += c1 * (xi[q] - X[q*F+j])^2
  //   acc2[q] += c2 * (xi[q] - X[q*F+j])^2
  void (*sek_grad_row)(const double* X, std::size_t F, std::size_t Q,
                       const double* xi, const double* k_row,
                       const double* kinv_row, const double* alpha,
                       double alpha_i, double* acc1, double* acc2, double* s1,
                       double* s2);

  // Quantization prepare pass: for each i,
  //   u  = |v[i]| * inv_norm_times_s
  //   lo[i]   = min(floor(u), s_minus_1)
  //   frac[i] = u - lo[i]
  void (*quant_prepare)(const double* v, double inv_norm_times_s,
                        double s_minus_1, double* lo, double* frac,
                        std::size_t n);
};

// Implementation selected at load time (scalar unless AVX2+FMA is
// available). Overridable for tests and benchmarking.
const Ops& active();
void force(const std::string& name);  // "scalar" | "avx2"; throws if unknown

const Ops& scalar_ops();
const Ops* avx2_ops();  // nullptr when not compiled in or not supported

// All implementations usable on this machine (for equivalence tests).
std::vector<const Ops*> available();

}  // namespace fedpop::kernels
