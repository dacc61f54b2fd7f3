#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "fedpop/kernels.hpp"

using namespace fedpop;

namespace {

std::vector<double> random_vec(std::mt19937_64& eng, std::size_t n,
                               double scale = 1.0) {
  std::normal_distribution<double> dist(0.0, scale);
  std::vector<double> v(n);
  for (auto& x : v) x = dist(eng);
  return v;
}

// Sizes straddling the vector width so remainder lanes get exercised.
const std::size_t kSizes[] = {1, 3, 4, 5, 8, 13, 64, 257};

}  // namespace

TEST_CASE("scalar implementation is always available") {
  CHECK(std::string(kernels::scalar_ops().name) == "scalar");
  CHECK(kernels::available().size() >= 1);
}

TEST_CASE("reductions agree across implementations") {
  std::mt19937_64 eng(1);
  const auto& ref = kernels::scalar_ops();
  for (const auto* ops : kernels::available()) {
    for (const std::size_t n : kSizes) {
      const auto a = random_vec(eng, n);
      const auto b = random_vec(eng, n);
      CHECK(ops->dot(a.data(), b.data(), n) ==
            doctest::Approx(ref.dot(a.data(), b.data(), n)).epsilon(1e-13));
      CHECK(ops->sum(a.data(), n) ==
            doctest::Approx(ref.sum(a.data(), n)).epsilon(1e-13));
    }
  }
}

TEST_CASE("vexp matches std::exp") {
  std::mt19937_64 eng(2);
  for (const auto* ops : kernels::available()) {
    for (const std::size_t n : kSizes) {
      auto x = random_vec(eng, n, 3.0);
      x.front() = 0.0;
      std::vector<double> out(n);
      ops->vexp(x.data(), out.data(), n);
      for (std::size_t i = 0; i < n; ++i)
        CHECK(out[i] == doctest::Approx(std::exp(x[i])).epsilon(1e-14));
    }
  }
  // saturation and NaN propagation
  const double edge[4] = {-800.0, 800.0, std::nan(""), 0.0};
  double out[4];
  for (const auto* ops : kernels::available()) {
    ops->vexp(edge, out, 4);
    CHECK(out[0] == 0.0);
    CHECK(std::isinf(out[1]));
    CHECK(std::isnan(out[2]));
    CHECK(out[3] == 1.0);
  }
}

TEST_CASE("axpy and triad agree across implementations") {
  std::mt19937_64 eng(3);
  const auto& ref = kernels::scalar_ops();
  for (const auto* ops : kernels::available()) {
    for (const std::size_t n : kSizes) {
      const auto x = random_vec(eng, n);
      const auto g = random_vec(eng, n);
      const auto eta = random_vec(eng, n);
      auto y1 = random_vec(eng, n);
      auto y2 = y1;
      ops->axpy(0.37, x.data(), y1.data(), n);
      ref.axpy(0.37, x.data(), y2.data(), n);
      for (std::size_t i = 0; i < n; ++i)
        CHECK(y1[i] == doctest::Approx(y2[i]).epsilon(1e-14));

      auto t1 = random_vec(eng, n);
      auto t2 = t1;
      ops->triad(0.99, t1.data(), -1e-3, g.data(), 0.14, eta.data(), n);
      ref.triad(0.99, t2.data(), -1e-3, g.data(), 0.14, eta.data(), n);
      for (std::size_t i = 0; i < n; ++i)
        CHECK(t1[i] == doctest::Approx(t2[i]).epsilon(1e-14));
    }
  }
}

TEST_CASE("sek_row matches the scalar reference") {
  std::mt19937_64 eng(4);
  for (const auto* ops : kernels::available()) {
    for (const std::size_t F : {1u, 5u, 9u, 33u}) {
      const std::size_t Q = 7;
      const auto X = random_vec(eng, F * Q);
      const auto xi = random_vec(eng, Q);
      auto w = random_vec(eng, Q);
      for (auto& v : w) v = std::abs(v);
      std::vector<double> out(F), ref(F);
      ops->sek_row(X.data(), F, Q, xi.data(), w.data(), 1.7, out.data());
      kernels::scalar_ops().sek_row(X.data(), F, Q, xi.data(), w.data(), 1.7,
                                    ref.data());
      for (std::size_t j = 0; j < F; ++j)
        CHECK(out[j] == doctest::Approx(ref[j]).epsilon(1e-13));
    }
  }
}

TEST_CASE("sek_grad_row matches the scalar reference") {
  std::mt19937_64 eng(5);
  for (const auto* ops : kernels::available()) {
    for (const std::size_t F : {1u, 6u, 31u}) {
      const std::size_t Q = 5;
      const auto X = random_vec(eng, F * Q);
      const auto xi = random_vec(eng, Q);
      const auto krow = random_vec(eng, F);
      const auto kinvrow = random_vec(eng, F);
      const auto alpha = random_vec(eng, F);
      std::vector<double> a1(Q, 0.0), a2(Q, 0.0), r1(Q, 0.0), r2(Q, 0.0);
      double s1 = 0, s2 = 0, t1 = 0, t2 = 0;
      ops->sek_grad_row(X.data(), F, Q, xi.data(), krow.data(), kinvrow.data(),
                        alpha.data(), 0.33, a1.data(), a2.data(), &s1, &s2);
      kernels::scalar_ops().sek_grad_row(X.data(), F, Q, xi.data(), krow.data(),
                                         kinvrow.data(), alpha.data(), 0.33,
                                         r1.data(), r2.data(), &t1, &t2);
      CHECK(s1 == doctest::Approx(t1).epsilon(1e-12));
      CHECK(s2 == doctest::Approx(t2).epsilon(1e-12));
      for (std::size_t q = 0; q < Q; ++q) {
        CHECK(a1[q] == doctest::Approx(r1[q]).epsilon(1e-12));
        CHECK(a2[q] == doctest::Approx(r2[q]).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("quant_prepare matches the scalar reference exactly") {
  std::mt19937_64 eng(6);
  for (const auto* ops : kernels::available()) {
    for (const std::size_t n : kSizes) {
      const auto v = random_vec(eng, n);
      std::vector<double> lo1(n), f1(n), lo2(n), f2(n);
      ops->quant_prepare(v.data(), 4.0, 15.0, lo1.data(), f1.data(), n);
      kernels::scalar_ops().quant_prepare(v.data(), 4.0, 15.0, lo2.data(),
                                          f2.data(), n);
      for (std::size_t i = 0; i < n; ++i) {
        CHECK(lo1[i] == lo2[i]);  // floor/min are exact in both paths
        CHECK(f1[i] == doctest::Approx(f2[i]).epsilon(1e-15));
      }
    }
  }
}

TEST_CASE("force switches the active implementation") {
  kernels::force("scalar");
  CHECK(std::string(kernels::active().name) == "scalar");
  if (kernels::avx2_ops()) {
    kernels::force("avx2");
    CHECK(std::string(kernels::active().name) == "avx2");
  }
  CHECK_THROWS_AS(kernels::force("neon"), std::invalid_argument);
}
