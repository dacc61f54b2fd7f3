// AVX2+FMA variants of the inner loops. Compiled only on x86-64; the
// dispatcher decides at startup whether this unit's entry points are used.

#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

#include <cmath>
#include <cstddef>
#include <cstdint>

#include "fedpop/kernels.hpp"

namespace fedpop::kernels {
namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d swapped = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, swapped));
}

// Cephes-style exp for 4 doubles. ~1 ulp in the finite range; saturates
// to 0 / +inf outside it and passes NaN through.
inline __m256d exp4(__m256d x) {
  const __m256d log2e = _mm256_set1_pd(1.4426950408889634073599);
  const __m256d c1 = _mm256_set1_pd(6.93145751953125e-1);
  const __m256d c2 = _mm256_set1_pd(1.42860682030941723212e-6);

  const __m256d p0 = _mm256_set1_pd(1.26177193074810590878e-4);
  const __m256d p1 = _mm256_set1_pd(3.02994407707441961300e-2);
  const __m256d p2 = _mm256_set1_pd(9.99999999999999999910e-1);
  const __m256d q0 = _mm256_set1_pd(3.00198505138664455042e-6);
  const __m256d q1 = _mm256_set1_pd(2.52448340349684104192e-3);
  const __m256d q2 = _mm256_set1_pd(2.27265548208155028766e-1);
  const __m256d q3 = _mm256_set1_pd(2.00000000000000000005e0);

  const __m256d nan_mask = _mm256_cmp_pd(x, x, _CMP_UNORD_Q);
  __m256d xc = _mm256_max_pd(x, _mm256_set1_pd(-745.5));
  xc = _mm256_min_pd(xc, _mm256_set1_pd(709.9));

  // n = round(x / ln2); r = x - n*ln2 (Cody-Waite two-step)
  const __m256d nd = _mm256_round_pd(
      _mm256_mul_pd(xc, log2e), _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  __m256d r = _mm256_fnmadd_pd(nd, c1, xc);
  r = _mm256_fnmadd_pd(nd, c2, r);

  const __m256d rr = _mm256_mul_pd(r, r);
  __m256d pe = _mm256_fmadd_pd(p0, rr, p1);
  pe = _mm256_fmadd_pd(pe, rr, p2);
  pe = _mm256_mul_pd(pe, r);
  __m256d qe = _mm256_fmadd_pd(q0, rr, q1);
  qe = _mm256_fmadd_pd(qe, rr, q2);
  qe = _mm256_fmadd_pd(qe, rr, q3);
  const __m256d expr = _mm256_add_pd(
      _mm256_set1_pd(1.0),
      _mm256_mul_pd(_mm256_set1_pd(2.0),
                    _mm256_div_pd(pe, _mm256_sub_pd(qe, pe))));

  // 2^n applied as 2^(n/2) * 2^(n - n/2) so n = +/-1024 stays in range.
  const __m128i n32 = _mm256_cvtpd_epi32(nd);
  const __m128i n1_32 = _mm_srai_epi32(n32, 1);
  const __m128i n2_32 = _mm_sub_epi32(n32, n1_32);
  const __m256i bias = _mm256_set1_epi64x(1023);
  const __m256d s1 = _mm256_castsi256_pd(_mm256_slli_epi64(
      _mm256_add_epi64(_mm256_cvtepi32_epi64(n1_32), bias), 52));
  const __m256d s2 = _mm256_castsi256_pd(_mm256_slli_epi64(
      _mm256_add_epi64(_mm256_cvtepi32_epi64(n2_32), bias), 52));

  __m256d res = _mm256_mul_pd(_mm256_mul_pd(expr, s1), s2);
  return _mm256_blendv_pd(res, x, nan_mask);
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4),
                           acc1);
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  }
  double out = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) out += a[i] * b[i];
  return out;
}

double sum_avx2(const double* a, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_add_pd(acc0, _mm256_loadu_pd(a + i));
    acc1 = _mm256_add_pd(acc1, _mm256_loadu_pd(a + i + 4));
  }
  for (; i + 4 <= n; i += 4) acc0 = _mm256_add_pd(acc0, _mm256_loadu_pd(a + i));
  double out = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) out += a[i];
  return out;
}

void vexp_avx2(const double* x, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) _mm256_storeu_pd(out + i, exp4(_mm256_loadu_pd(x + i)));
  for (; i < n; ++i) out[i] = std::exp(x[i]);
}

void axpy_avx2(double a, const double* x, double* y, std::size_t n) {
  const __m256d av = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(
        y + i, _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

void triad_avx2(double a, double* th, double b, const double* g, double c,
                const double* eta, std::size_t n) {
  const __m256d av = _mm256_set1_pd(a);
  const __m256d bv = _mm256_set1_pd(b);
  const __m256d cv = _mm256_set1_pd(c);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d acc = _mm256_mul_pd(av, _mm256_loadu_pd(th + i));
    acc = _mm256_fmadd_pd(bv, _mm256_loadu_pd(g + i), acc);
    acc = _mm256_fmadd_pd(cv, _mm256_loadu_pd(eta + i), acc);
    _mm256_storeu_pd(th + i, acc);
  }
  for (; i < n; ++i) th[i] = a * th[i] + b * g[i] + c * eta[i];
}

void sek_row_avx2(const double* X, std::size_t F, std::size_t Q,
                  const double* xi, const double* w, double amp, double* out) {
  const __m256d ampv = _mm256_set1_pd(amp);
  std::size_t j = 0;
  for (; j + 4 <= F; j += 4) {
    __m256d acc = _mm256_setzero_pd();
    for (std::size_t q = 0; q < Q; ++q) {
      const __m256d d =
          _mm256_sub_pd(_mm256_set1_pd(xi[q]), _mm256_loadu_pd(X + q * F + j));
      acc = _mm256_fmadd_pd(_mm256_mul_pd(_mm256_set1_pd(w[q]), d), d, acc);
    }
    const __m256d e = exp4(_mm256_sub_pd(_mm256_setzero_pd(), acc));
    _mm256_storeu_pd(out + j, _mm256_mul_pd(ampv, e));
  }
  for (; j < F; ++j) {
    double acc = 0.0;
    for (std::size_t q = 0; q < Q; ++q) {
      const double d = xi[q] - X[q * F + j];
      acc += w[q] * d * d;
    }
    out[j] = amp * std::exp(-acc);
  }
}

void sek_grad_row_avx2(const double* X, std::size_t F, std::size_t Q,
                       const double* xi, const double* k_row,
                       const double* kinv_row, const double* alpha,
                       double alpha_i, double* acc1, double* acc2, double* s1,
                       double* s2) {
  // Vector accumulators for each q live in a small stack array; hsum at
  // the end keeps the reduction order independent of F.
  constexpr std::size_t kMaxQ = 64;
  __m256d a1[kMaxQ], a2[kMaxQ];
  const std::size_t qn = Q <= kMaxQ ? Q : kMaxQ;
  for (std::size_t q = 0; q < qn; ++q) {
    a1[q] = _mm256_setzero_pd();
    a2[q] = _mm256_setzero_pd();
  }
  __m256d s1v = _mm256_setzero_pd();
  __m256d s2v = _mm256_setzero_pd();
  const __m256d ai = _mm256_set1_pd(alpha_i);

  std::size_t j = 0;
  if (Q <= kMaxQ) {
    for (; j + 4 <= F; j += 4) {
      const __m256d k = _mm256_loadu_pd(k_row + j);
      const __m256d c1 = _mm256_mul_pd(_mm256_loadu_pd(kinv_row + j), k);
      const __m256d c2 =
          _mm256_mul_pd(_mm256_mul_pd(ai, _mm256_loadu_pd(alpha + j)), k);
      s1v = _mm256_add_pd(s1v, c1);
      s2v = _mm256_add_pd(s2v, c2);
      for (std::size_t q = 0; q < Q; ++q) {
        const __m256d d =
            _mm256_sub_pd(_mm256_set1_pd(xi[q]), _mm256_loadu_pd(X + q * F + j));
        const __m256d dd = _mm256_mul_pd(d, d);
        a1[q] = _mm256_fmadd_pd(c1, dd, a1[q]);
        a2[q] = _mm256_fmadd_pd(c2, dd, a2[q]);
      }
    }
    for (std::size_t q = 0; q < Q; ++q) {
      acc1[q] += hsum(a1[q]);
      acc2[q] += hsum(a2[q]);
    }
    *s1 += hsum(s1v);
    *s2 += hsum(s2v);
  }
  // Scalar tail (and whole row when Q exceeds the register budget).
  double t1 = 0.0, t2 = 0.0;
  for (; j < F; ++j) {
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

void quant_prepare_avx2(const double* v, double inv_norm_times_s,
                        double s_minus_1, double* lo, double* frac,
                        std::size_t n) {
  const __m256d absmask =
      _mm256_castsi256_pd(_mm256_set1_epi64x(0x7fffffffffffffffll));
  const __m256d kv = _mm256_set1_pd(inv_norm_times_s);
  const __m256d cap = _mm256_set1_pd(s_minus_1);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d u =
        _mm256_mul_pd(_mm256_and_pd(_mm256_loadu_pd(v + i), absmask), kv);
    __m256d l = _mm256_round_pd(u, _MM_FROUND_TO_NEG_INF | _MM_FROUND_NO_EXC);
    l = _mm256_min_pd(l, cap);
    _mm256_storeu_pd(lo + i, l);
    _mm256_storeu_pd(frac + i, _mm256_sub_pd(u, l));
  }
  for (; i < n; ++i) {
    const double u = std::abs(v[i]) * inv_norm_times_s;
    double l = std::floor(u);
    if (l > s_minus_1) l = s_minus_1;
    lo[i] = l;
    frac[i] = u - l;
  }
}

}  // namespace

const Ops* avx2_ops() {
  static const bool usable =
      __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  if (!usable) return nullptr;
  static const Ops ops = {
      "avx2",        dot_avx2,          sum_avx2,
      vexp_avx2,     axpy_avx2,         triad_avx2,
      sek_row_avx2,  sek_grad_row_avx2, quant_prepare_avx2,
  };
  return &ops;
}

}  // namespace fedpop::kernels

#else

#include "fedpop/kernels.hpp"

namespace fedpop::kernels {
const Ops* avx2_ops() { return nullptr; }
}  // namespace fedpop::kernels

#endif
