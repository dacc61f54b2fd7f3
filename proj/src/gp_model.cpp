#include "fedpop/gp_model.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "fedpop/csv.hpp"
#include "fedpop/errors.hpp"
#include "fedpop/kernels.hpp"

namespace fedpop {

double sek_kernel(const Eigen::VectorXd& xi, const Eigen::VectorXd& xj,
                  const Eigen::VectorXd& beta) {
  if (xi.size() != xj.size())
    throw std::invalid_argument("feature dimension mismatch");
  if (beta.size() != xi.size() + 2)
    throw std::invalid_argument("beta must have Q+2 entries");
  double acc = 0.0;
  for (int q = 0; q < xi.size(); ++q) {
    const double d = xi[q] - xj[q];
    acc += beta[q + 2] * d * d;
  }
  return beta[1] * std::exp(-acc);
}

KernelMatrix build_kernel_matrix(const Eigen::MatrixXd& features,
                                 const Eigen::VectorXd& beta) {
  const int F = static_cast<int>(features.rows());
  const int Q = static_cast<int>(features.cols());
  if (F < 1) throw std::invalid_argument("catalog is empty");
  if (beta.size() != Q + 2)
    throw std::invalid_argument("beta must have Q+2 entries");
  if (!beta.allFinite() || beta[1] <= 0.0)
    throw numerical_error("kernel parameters not usable");

  const auto& ops = kernels::active();

  KernelMatrix km;
  km.sek.resize(F, F);
  // Column-major F x Q storage keeps each feature dimension contiguous;
  // one fused row pass per content. The matrix is symmetrized afterwards
  // so it is symmetric by construction, not by rounding.
  Eigen::VectorXd row(F);
  Eigen::VectorXd xi(Q);
  for (int i = 0; i < F; ++i) {
    xi = features.row(i);
    ops.sek_row(features.data(), static_cast<std::size_t>(F),
                static_cast<std::size_t>(Q), xi.data(), beta.data() + 2,
                beta[1], row.data());
    km.sek.row(i) = row;
  }
  km.sek = (km.sek + km.sek.transpose()).eval() / 2.0;

  const double mean_diag = km.sek.diagonal().mean() + beta[0];
  double jitter_rel = 1e-8;
  while (true) {
    km.jitter = jitter_rel * mean_diag;
    km.k_prime = km.sek;
    km.k_prime.diagonal().array() += beta[0] + km.jitter;
    km.llt.compute(km.k_prime);
    if (km.llt.info() == Eigen::Success) break;
    jitter_rel *= 10.0;
    if (jitter_rel > 1e-2)
      throw numerical_error("Cholesky failed; final jitter " +
                            format_double(km.jitter));
  }
  km.log_det = 2.0 * km.llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  km.k_prime_inv = km.llt.solve(Eigen::MatrixXd::Identity(F, F));
  return km;
}

Model::Model(const ContentCatalog& catalog, const RequestMatrix& requests,
             HyperPriors priors, double exposure)
    : F_(catalog.num_contents()),
      N_(requests.num_periods()),
      Qh_(catalog.feature_dim() + 2),
      exposure_(exposure),
      priors_(std::move(priors)),
      counts_(requests.counts) {
  if (requests.num_contents() != F_)
    throw std::invalid_argument("request matrix does not match catalog");
  if (priors_.shape.size() != Qh_ || priors_.inv_scale.size() != Qh_)
    throw std::invalid_argument("priors must have Q+2 entries");
  if ((priors_.shape.array() <= 0).any() || (priors_.inv_scale.array() <= 0).any())
    throw std::invalid_argument("prior parameters must be positive");
  if (exposure_ < 0) throw std::invalid_argument("exposure cannot be negative");
  row_sums_ = counts_.rowwise().sum();
  feat_ = catalog.features;
}

ParameterVector Model::initial_parameters() const {
  ParameterVector p(F_, Qh_);
  for (int f = 0; f < F_; ++f)
    p.lambda()[f] = std::log(row_sums_[f] / N_ + 1.0);
  p.rho().setZero();
  return p;
}

Eigen::VectorXd Model::exp_lambda(const ParameterVector& params) const {
  Eigen::VectorXd out(F_);
  kernels::active().vexp(params.lambda().data(), out.data(), F_);
  return out;
}

KernelMatrix Model::build_kernel_matrix(const ParameterVector& params) const {
  if (params.num_contents() != F_ || params.num_hyper() != Qh_)
    throw std::invalid_argument("parameter vector does not match model");
  return fedpop::build_kernel_matrix(feat_, params.beta());
}

double Model::neg_log_posterior(const ParameterVector& params,
                                const KernelMatrix& kernel) const {
  const Eigen::VectorXd el = exp_lambda(params);
  double data = 0.0;
  for (int f = 0; f < F_; ++f)
    data += -row_sums_[f] * params.lambda()[f] + N_ * exposure_ * el[f];

  const Eigen::VectorXd lam = params.lambda();
  const Eigen::VectorXd alpha = kernel.llt.solve(lam);
  const double gp = 0.5 * kernel.log_det + 0.5 * lam.dot(alpha);

  double prior = 0.0;
  for (int q = 0; q < Qh_; ++q)
    prior += -priors_.shape[q] * params.rho()[q] +
             priors_.inv_scale[q] * std::exp(params.rho()[q]);

  const double value = data + gp + prior;
  if (!std::isfinite(value))
    throw numerical_error("non-finite negative log posterior");
  return value;
}

GradientVector Model::data_term_gradient(const ParameterVector& params) const {
  GradientVector g = GradientVector::Zero(param_dim());
  const Eigen::VectorXd el = exp_lambda(params);
  for (int f = 0; f < F_; ++f)
    g[f] = -row_sums_[f] + N_ * exposure_ * el[f];
  eval_count_ += static_cast<std::uint64_t>(F_) * N_;
  return g;
}

GradientVector Model::non_data_gradient(const ParameterVector& params,
                                        const KernelMatrix& kernel) const {
  GradientVector g = GradientVector::Zero(param_dim());
  const Eigen::VectorXd lam = params.lambda();
  const Eigen::VectorXd alpha = kernel.llt.solve(lam);
  const Eigen::VectorXd beta = params.beta();

  g.head(F_) = alpha;  // d/d lambda of (1/2) lambda^T K'^-1 lambda

  // Accumulate, per feature dimension q, the weighted squared-distance
  // sums needed by dK'/drho_q, plus tr(K'^-1 K) and alpha^T K alpha.
  const int Q = Qh_ - 2;
  Eigen::VectorXd acc_tr = Eigen::VectorXd::Zero(Q);
  Eigen::VectorXd acc_quad = Eigen::VectorXd::Zero(Q);
  double trace_kinv_k = 0.0;
  double quad_k = 0.0;
  const auto& ops = kernels::active();
  Eigen::VectorXd xi(Q);
  Eigen::VectorXd krow(F_), kinvrow(F_);
  for (int i = 0; i < F_; ++i) {
    xi = feat_.row(i);
    krow = kernel.sek.row(i);
    kinvrow = kernel.k_prime_inv.row(i);
    ops.sek_grad_row(feat_.data(), static_cast<std::size_t>(F_),
                     static_cast<std::size_t>(Q), xi.data(), krow.data(),
                     kinvrow.data(), alpha.data(), alpha[i], acc_tr.data(),
                     acc_quad.data(), &trace_kinv_k, &quad_k);
  }

  const double trace_kinv = kernel.k_prime_inv.trace();
  const double alpha_sq = alpha.squaredNorm();

  // rho_0: dK'/drho_0 = beta_0 I
  g[F_ + 0] = 0.5 * beta[0] * trace_kinv - 0.5 * beta[0] * alpha_sq;
  // rho_1: dK'/drho_1 = K
  g[F_ + 1] = 0.5 * trace_kinv_k - 0.5 * quad_k;
  // rho_q, q>=2: dK'/drho_q = -beta_q * (Dq .* K)
  for (int q = 0; q < Q; ++q)
    g[F_ + 2 + q] = -0.5 * beta[q + 2] * acc_tr[q] + 0.5 * beta[q + 2] * acc_quad[q];

  for (int q = 0; q < Qh_; ++q)
    g[F_ + q] += -priors_.shape[q] + priors_.inv_scale[q] * std::exp(params.rho()[q]);

  if (!g.allFinite()) throw numerical_error("non-finite gradient");
  return g;
}

GradientVector Model::full_gradient(const ParameterVector& params,
                                    const KernelMatrix& kernel) const {
  GradientVector g = non_data_gradient(params, kernel);
  g += data_term_gradient(params);
  if (!g.allFinite()) throw numerical_error("non-finite gradient");
  return g;
}

GradientVector Model::stochastic_gradient(
    const ParameterVector& params, const KernelMatrix& kernel,
    std::span<const std::uint32_t> minibatch) const {
  if (minibatch.empty()) throw std::invalid_argument("empty minibatch");
  GradientVector g = non_data_gradient(params, kernel);
  const Eigen::VectorXd el = exp_lambda(params);
  const double scale =
      static_cast<double>(num_data_terms()) / static_cast<double>(minibatch.size());
  for (const std::uint32_t i : minibatch) {
    if (i >= static_cast<std::uint32_t>(num_data_terms()))
      throw std::invalid_argument("minibatch index out of range");
    const int f = static_cast<int>(i) / N_;
    const int n = static_cast<int>(i) % N_;
    g[f] += scale * (-counts_(f, n) + exposure_ * el[f]);
  }
  eval_count_ += minibatch.size();
  return g;
}

Model::Anchor Model::make_anchor(const ParameterVector& params) const {
  Anchor a;
  a.exp_lambda = exp_lambda(params);
  a.data_gradient = data_term_gradient(params);
  return a;
}

GradientVector Model::svrg_data_estimate(
    const ParameterVector& params, const Anchor& anchor,
    std::span<const std::uint32_t> minibatch) const {
  if (minibatch.empty()) throw std::invalid_argument("empty minibatch");
  GradientVector g = anchor.data_gradient;
  const Eigen::VectorXd el = exp_lambda(params);
  const double scale =
      static_cast<double>(num_data_terms()) / static_cast<double>(minibatch.size());
  for (const std::uint32_t i : minibatch) {
    if (i >= static_cast<std::uint32_t>(num_data_terms()))
      throw std::invalid_argument("minibatch index out of range");
    const int f = static_cast<int>(i) / N_;
    const int n = static_cast<int>(i) % N_;
    // Per-datum gradients at the current point and at the anchor; the
    // count cancels, leaving the intensity difference.
    const double at_params = -counts_(f, n) + exposure_ * el[f];
    const double at_anchor = -counts_(f, n) + exposure_ * anchor.exp_lambda[f];
    g[f] += scale * (at_params - at_anchor);
  }
  eval_count_ += minibatch.size();
  return g;
}

GradientVector Model::svrg_corrected_gradient(
    const ParameterVector& params, const KernelMatrix& kernel,
    const Anchor& anchor, std::span<const std::uint32_t> minibatch) const {
  GradientVector g =
      non_data_gradient(params, kernel) + svrg_data_estimate(params, anchor, minibatch);
  if (!g.allFinite()) throw numerical_error("non-finite gradient");
  return g;
}

}  // namespace fedpop
