#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "fedpop/gp_model.hpp"

using namespace fedpop;

namespace {

struct Instance {
  ContentCatalog catalog;
  RequestMatrix requests;
  HyperPriors priors;
};

Instance random_instance(int F, int Q, int N, std::uint64_t seed) {
  std::mt19937_64 eng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Instance inst;
  inst.catalog.features.resize(F, Q);
  for (int f = 0; f < F; ++f) {
    inst.catalog.content_ids.push_back(f + 1);
    for (int q = 0; q < Q; ++q) inst.catalog.features(f, q) = normal(eng);
  }
  inst.catalog.sizes.assign(F, 1.0);
  inst.requests.counts.resize(F, N);
  std::poisson_distribution<int> pois(3.0);
  for (int f = 0; f < F; ++f)
    for (int n = 0; n < N; ++n) inst.requests.counts(f, n) = pois(eng);
  inst.requests.period_length = 43200.0;
  inst.priors = HyperPriors::uniform(Q + 2, 1.3, 0.8);
  return inst;
}

ParameterVector random_params(const Model& model, std::uint64_t seed,
                              double scale = 0.5) {
  std::mt19937_64 eng(seed);
  std::normal_distribution<double> normal(0.0, scale);
  ParameterVector p(model.num_contents(), model.num_hyper());
  for (int i = 0; i < p.dim(); ++i) p.flat()[i] = normal(eng);
  return p;
}

// Independent posterior density oracle: normalized log densities summed
// term by term (lgamma for the Poisson and Gamma constants, dense inverse
// and determinant for the Gaussian), then the constants the working
// formula drops are removed.
double oracle_neg_log_posterior(const Instance& inst,
                                const ParameterVector& params, double jitter) {
  const int F = inst.catalog.num_contents();
  const int N = inst.requests.num_periods();
  const int Q = inst.catalog.feature_dim();
  const Eigen::VectorXd beta = params.rho().array().exp();

  double nll = 0.0;  // -log p(R | lambda), fully normalized
  for (int f = 0; f < F; ++f)
    for (int n = 0; n < N; ++n) {
      const double r = inst.requests.counts(f, n);
      const double rate = std::exp(params.lambda()[f]);
      nll -= r * std::log(rate) - rate - std::lgamma(r + 1.0);
    }

  Eigen::MatrixXd kp(F, F);
  for (int i = 0; i < F; ++i)
    for (int j = 0; j < F; ++j)
      kp(i, j) = sek_kernel(inst.catalog.features.row(i),
                            inst.catalog.features.row(j), beta);
  kp.diagonal().array() += beta[0] + jitter;
  const Eigen::VectorXd lam = params.lambda();
  const double quad = lam.dot(kp.inverse() * lam);
  const double logdet = std::log(kp.determinant());
  const double gauss_nll =
      0.5 * logdet + 0.5 * quad + 0.5 * F * std::log(2.0 * M_PI);

  double gamma_nll = 0.0;  // -log p(rho_q) with the exp-transform Jacobian
  for (int q = 0; q < Q + 2; ++q) {
    const double a = inst.priors.shape[q];
    const double b = inst.priors.inv_scale[q];
    const double rho = params.rho()[q];
    gamma_nll -= a * std::log(b) - std::lgamma(a) + a * rho - b * std::exp(rho);
  }

  double dropped = 0.5 * F * std::log(2.0 * M_PI);  // Gaussian constant
  for (int f = 0; f < F; ++f)
    for (int n = 0; n < N; ++n)
      dropped += std::lgamma(inst.requests.counts(f, n) + 1.0);  // log r!
  for (int q = 0; q < Q + 2; ++q)
    dropped += std::lgamma(inst.priors.shape[q]) -
               inst.priors.shape[q] * std::log(inst.priors.inv_scale[q]);

  return nll + gauss_nll + gamma_nll - dropped;
}

}  // namespace

TEST_CASE("sek kernel at identical inputs is the amplitude") {
  Eigen::VectorXd x(2);
  x << 0.3, -1.2;
  Eigen::VectorXd beta(4);
  beta << 0.5, 1.9, 0.7, 0.2;
  CHECK(sek_kernel(x, x, beta) == doctest::Approx(1.9).epsilon(1e-15));
}

TEST_CASE("sek kernel collapses to the amplitude with zero lengthscales") {
  Eigen::VectorXd xi(3), xj(3);
  xi << 1, 2, 3;
  xj << -4, 5, 0;
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(5);
  beta[1] = 1.9;
  CHECK(sek_kernel(xi, xj, beta) == doctest::Approx(1.9).epsilon(1e-15));
}

TEST_CASE("sek kernel hand value") {
  Eigen::VectorXd xi(2), xj(2);
  xi << 1, 0;
  xj << 0, 0;
  Eigen::VectorXd beta(4);
  beta << 0.0, 2.0, 1.0, 1.0;
  CHECK(sek_kernel(xi, xj, beta) ==
        doctest::Approx(2.0 * std::exp(-1.0)).epsilon(1e-15));
  CHECK(sek_kernel(xi, xj, beta) == sek_kernel(xj, xi, beta));
}

TEST_CASE("sek kernel rejects mismatched dimensions") {
  Eigen::VectorXd xi(2), xj(3);
  xi.setZero();
  xj.setZero();
  CHECK_THROWS_AS(sek_kernel(xi, xj, Eigen::VectorXd::Ones(4)),
                  std::invalid_argument);
}

TEST_CASE("kernel matrix for a single content") {
  auto inst = random_instance(1, 3, 2, 11);
  const Model model(inst.catalog, inst.requests, inst.priors);
  ParameterVector p(1, 5);
  p.rho() << std::log(0.4), std::log(1.5), 0.0, 0.0, 0.0;
  const auto km = model.build_kernel_matrix(p);
  CHECK(km.dim() == 1);
  CHECK(km.k_prime(0, 0) ==
        doctest::Approx(1.5 + 0.4 + km.jitter).epsilon(1e-14));
}

TEST_CASE("kernel matrix is symmetric and matches the direct oracle") {
  auto inst = random_instance(3, 4, 2, 12);
  const Model model(inst.catalog, inst.requests, inst.priors);
  const auto p = random_params(model, 1);
  const auto km = model.build_kernel_matrix(p);
  CHECK((km.k_prime - km.k_prime.transpose()).cwiseAbs().maxCoeff() <=
        1e-12 * km.k_prime.cwiseAbs().maxCoeff());
  const Eigen::VectorXd beta = p.beta();
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      const double direct = sek_kernel(inst.catalog.features.row(i),
                                       inst.catalog.features.row(j), beta) +
                            (i == j ? beta[0] + km.jitter : 0.0);
      CHECK(km.k_prime(i, j) == doctest::Approx(direct).epsilon(1e-12));
    }
}

TEST_CASE("kernel matrix stays positive definite for random hyper draws") {
  std::mt19937_64 eng(50);
  auto inst = random_instance(6, 3, 2, 13);
  const Model model(inst.catalog, inst.requests, inst.priors);
  for (int rep = 0; rep < 25; ++rep) {
    const auto p = random_params(model, 100 + rep, 1.0);
    const auto km = model.build_kernel_matrix(p);
    CHECK(km.llt.info() == Eigen::Success);
    CHECK((model.num_contents() > 0));
    // beta recovered from rho is always positive
    CHECK((p.beta().array() > 0).all());
  }
}

TEST_CASE("neg log posterior: hand-computable single-content instance") {
  Instance inst = random_instance(1, 2, 1, 14);
  inst.requests.counts.setZero();
  inst.priors = HyperPriors::uniform(4, 1.0, 1.0);
  const Model model(inst.catalog, inst.requests, inst.priors);
  ParameterVector p(1, 4);  // lambda = 0, rho = 0 (beta = 1)
  const auto km = model.build_kernel_matrix(p);
  // data: -0*0 + e^0 = 1; gp: 0.5 log(beta1+beta0+jitter); prior: 4 * (0 + 1)
  const double expected = 1.0 + 0.5 * std::log(2.0 + km.jitter) + 4.0;
  CHECK(model.neg_log_posterior(p, km) ==
        doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("zero requests remove the -r*lambda term entirely") {
  Instance inst = random_instance(2, 2, 3, 15);
  const Model model(inst.catalog, inst.requests, inst.priors);
  Instance zero = inst;
  zero.requests.counts.setZero();
  const Model zmodel(zero.catalog, zero.requests, zero.priors);
  const auto p = random_params(model, 2);
  const auto km = model.build_kernel_matrix(p);
  const double with_r = model.neg_log_posterior(p, km);
  const double without_r = zmodel.neg_log_posterior(p, km);
  double r_term = 0.0;
  for (int f = 0; f < 2; ++f)
    r_term += -inst.requests.counts.row(f).sum() * p.lambda()[f];
  CHECK(with_r - without_r == doctest::Approx(r_term).epsilon(1e-12));
}

TEST_CASE("neg log posterior agrees with the unfactored density oracle") {
  for (const int F : {1, 2, 4}) {
    auto inst = random_instance(F, 3, 3, 20 + F);
    const Model model(inst.catalog, inst.requests, inst.priors);
    for (int rep = 0; rep < 5; ++rep) {
      const auto p = random_params(model, 300 + rep);
      const auto km = model.build_kernel_matrix(p);
      const double got = model.neg_log_posterior(p, km);
      const double want = oracle_neg_log_posterior(inst, p, km.jitter);
      CHECK(got == doctest::Approx(want).epsilon(1e-10));
    }
  }
}

TEST_CASE("full gradient matches central finite differences") {
  auto inst = random_instance(5, 3, 4, 30);
  const Model model(inst.catalog, inst.requests, inst.priors);
  const double h = 1e-5;
  for (int rep = 0; rep < 20; ++rep) {
    const auto p = random_params(model, 400 + rep);
    const auto km = model.build_kernel_matrix(p);
    const GradientVector grad = model.full_gradient(p, km);
    double max_rel = 0.0;
    for (int i = 0; i < p.dim(); ++i) {
      ParameterVector hi = p, lo = p;
      hi.flat()[i] += h;
      lo.flat()[i] -= h;
      const double fd = (model.neg_log_posterior(hi, model.build_kernel_matrix(hi)) -
                         model.neg_log_posterior(lo, model.build_kernel_matrix(lo))) /
                        (2 * h);
      const double rel = std::abs(grad[i] - fd) /
                         std::max(1.0, std::max(std::abs(grad[i]), std::abs(fd)));
      max_rel = std::max(max_rel, rel);
    }
    CHECK(max_rel <= 1e-4);
  }
}

TEST_CASE("all-zero requests and zero lambda give N per lambda component") {
  auto inst = random_instance(3, 2, 4, 31);
  inst.requests.counts.setZero();
  const Model model(inst.catalog, inst.requests, inst.priors);
  ParameterVector p(3, 4);  // all zeros
  const auto g = model.data_term_gradient(p);
  for (int f = 0; f < 3; ++f)
    CHECK(g[f] == doctest::Approx(4.0).epsilon(1e-15));
}

TEST_CASE("lambda = ln r is a stationary point of the data term") {
  Instance inst = random_instance(1, 2, 1, 32);
  inst.requests.counts(0, 0) = 5.0;
  const Model model(inst.catalog, inst.requests, inst.priors);
  ParameterVector p(1, 4);
  p.lambda()[0] = std::log(5.0);
  const auto g = model.data_term_gradient(p);
  CHECK(g[0] == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("minibatch of everything equals the full gradient exactly") {
  auto inst = random_instance(2, 2, 3, 33);
  const Model model(inst.catalog, inst.requests, inst.priors);
  const auto p = random_params(model, 5);
  const auto km = model.build_kernel_matrix(p);
  std::vector<std::uint32_t> all(model.num_data_terms());
  for (std::uint32_t i = 0; i < all.size(); ++i) all[i] = i;
  const GradientVector full = model.full_gradient(p, km);
  const GradientVector stoch = model.stochastic_gradient(p, km, all);
  CHECK((full - stoch).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("empty minibatch is rejected") {
  auto inst = random_instance(2, 2, 3, 34);
  const Model model(inst.catalog, inst.requests, inst.priors);
  const auto p = random_params(model, 6);
  const auto km = model.build_kernel_matrix(p);
  CHECK_THROWS_AS(model.stochastic_gradient(p, km, {}), std::invalid_argument);
}

TEST_CASE("single-datum minibatch touches only one lambda component") {
  auto inst = random_instance(3, 2, 2, 35);
  const Model model(inst.catalog, inst.requests, inst.priors);
  const auto p = random_params(model, 7);
  const auto km = model.build_kernel_matrix(p);
  const GradientVector base = model.non_data_gradient(p, km);
  const std::vector<std::uint32_t> mb = {3};  // f = 3/2 = 1, n = 1
  const GradientVector g = model.stochastic_gradient(p, km, mb);
  const GradientVector diff = g - base;
  for (int i = 0; i < p.dim(); ++i) {
    if (i == 1)
      CHECK(diff[i] != 0.0);
    else
      CHECK(diff[i] == doctest::Approx(0.0).epsilon(1e-15));
  }
}

namespace {

// All size-b subsets of {0..n-1}.
void enumerate_subsets(int n, int b, std::vector<std::vector<std::uint32_t>>& out) {
  std::vector<std::uint32_t> cur;
  const std::function<void(int)> rec = [&](int start) {
    if (static_cast<int>(cur.size()) == b) {
      out.push_back(cur);
      return;
    }
    for (int i = start; i < n; ++i) {
      cur.push_back(static_cast<std::uint32_t>(i));
      rec(i + 1);
      cur.pop_back();
    }
  };
  rec(0);
}

}  // namespace

TEST_CASE("stochastic and SVRG gradients are unbiased over all minibatches") {
  auto inst = random_instance(2, 2, 3, 36);  // NF = 6
  const Model model(inst.catalog, inst.requests, inst.priors);
  const auto p = random_params(model, 8);
  const auto omega = random_params(model, 9);
  const auto km = model.build_kernel_matrix(p);
  const auto anchor = model.make_anchor(omega);

  std::vector<std::vector<std::uint32_t>> subsets;
  enumerate_subsets(6, 2, subsets);
  REQUIRE(subsets.size() == 15);

  const GradientVector full = model.full_gradient(p, km);
  GradientVector mean_stoch = GradientVector::Zero(p.dim());
  GradientVector mean_svrg = GradientVector::Zero(p.dim());
  for (const auto& mb : subsets) {
    mean_stoch += model.stochastic_gradient(p, km, mb);
    mean_svrg += model.svrg_corrected_gradient(p, km, anchor, mb);
  }
  mean_stoch /= static_cast<double>(subsets.size());
  mean_svrg /= static_cast<double>(subsets.size());
  CHECK((mean_stoch - full).cwiseAbs().maxCoeff() <= 1e-10);
  CHECK((mean_svrg - full).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("at the anchor the SVRG estimate equals the anchored gradient") {
  auto inst = random_instance(2, 2, 3, 37);
  const Model model(inst.catalog, inst.requests, inst.priors);
  const auto omega = random_params(model, 10);
  const auto km = model.build_kernel_matrix(omega);
  const auto anchor = model.make_anchor(omega);
  const GradientVector expected =
      model.non_data_gradient(omega, km) + anchor.data_gradient;
  for (const std::vector<std::uint32_t> mb :
       {std::vector<std::uint32_t>{0}, {1, 4}, {2, 3, 5}}) {
    const GradientVector g = model.svrg_corrected_gradient(omega, km, anchor, mb);
    CHECK((g - expected).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("single-datum dataset with b=1 reproduces the full gradient") {
  auto inst = random_instance(1, 2, 1, 38);
  const Model model(inst.catalog, inst.requests, inst.priors);
  const auto p = random_params(model, 11);
  const auto omega = random_params(model, 12);
  const auto km = model.build_kernel_matrix(p);
  const auto anchor = model.make_anchor(omega);
  const std::vector<std::uint32_t> mb = {0};
  const GradientVector g = model.svrg_corrected_gradient(p, km, anchor, mb);
  const GradientVector full = model.full_gradient(p, km);
  CHECK((g - full).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("SVRG variance is below plain stochastic variance near the anchor") {
  auto inst = random_instance(2, 2, 3, 39);
  const Model model(inst.catalog, inst.requests, inst.priors);
  const auto omega = random_params(model, 13);
  ParameterVector p = omega;
  for (int i = 0; i < p.dim(); ++i) p.flat()[i] += 1e-3;
  const auto km = model.build_kernel_matrix(p);
  const auto anchor = model.make_anchor(omega);

  std::vector<std::vector<std::uint32_t>> subsets;
  enumerate_subsets(6, 2, subsets);
  const GradientVector full = model.full_gradient(p, km);
  double var_stoch = 0.0, var_svrg = 0.0;
  for (const auto& mb : subsets) {
    var_stoch += (model.stochastic_gradient(p, km, mb) - full).squaredNorm();
    var_svrg +=
        (model.svrg_corrected_gradient(p, km, anchor, mb) - full).squaredNorm();
  }
  CHECK(var_svrg <= var_stoch);
}
