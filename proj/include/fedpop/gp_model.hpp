#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "fedpop/data_ingest.hpp"

namespace fedpop {

// Gamma(A_q, B_q) hyperpriors for the kernel parameters beta_0..beta_{Q+1}.
struct HyperPriors {
  Eigen::VectorXd shape;       // A_q > 0
  Eigen::VectorXd inv_scale;   // B_q > 0

  static HyperPriors uniform(int dim, double a = 1.0, double b = 1.0) {
    HyperPriors p;
    p.shape = Eigen::VectorXd::Constant(dim, a);
    p.inv_scale = Eigen::VectorXd::Constant(dim, b);
    return p;
  }
};

// Sampled state: per-content log-rates followed by log kernel parameters
// rho_q = log(beta_q). Stored flat so the sampler and the quantizer can
// treat it as one vector.
class ParameterVector {
 public:
  ParameterVector() = default;
  ParameterVector(int num_contents, int num_hyper)
      : values_(Eigen::VectorXd::Zero(num_contents + num_hyper)),
        num_contents_(num_contents) {}
  ParameterVector(Eigen::VectorXd values, int num_contents)
      : values_(std::move(values)), num_contents_(num_contents) {}

  int num_contents() const { return num_contents_; }
  int num_hyper() const { return static_cast<int>(values_.size()) - num_contents_; }
  int dim() const { return static_cast<int>(values_.size()); }

  Eigen::VectorXd& flat() { return values_; }
  const Eigen::VectorXd& flat() const { return values_; }

  auto lambda() { return values_.head(num_contents_); }
  auto lambda() const { return values_.head(num_contents_); }
  auto rho() { return values_.tail(num_hyper()); }
  auto rho() const { return values_.tail(num_hyper()); }

  Eigen::VectorXd beta() const { return rho().array().exp(); }

  bool all_finite() const { return values_.allFinite(); }

 private:
  Eigen::VectorXd values_;
  int num_contents_ = 0;
};

using GradientVector = Eigen::VectorXd;

// K' = K + beta_0*I + jitter*I with its Cholesky factor and, for the
// hyperparameter gradient traces, the entries of K'^{-1}.
struct KernelMatrix {
  Eigen::MatrixXd sek;        // K: squared-exponential part only
  Eigen::MatrixXd k_prime;    // K + (beta_0 + jitter) I
  Eigen::LLT<Eigen::MatrixXd> llt;
  Eigen::MatrixXd k_prime_inv;
  double log_det = 0.0;
  double jitter = 0.0;

  int dim() const { return static_cast<int>(k_prime.rows()); }
};

// beta layout: beta[0] additive noise, beta[1] amplitude, beta[2..Q+1]
// per-feature inverse lengthscales.
double sek_kernel(const Eigen::VectorXd& xi, const Eigen::VectorXd& xj,
                  const Eigen::VectorXd& beta);

// Poisson likelihood data plus the prior/kernel context shared by every
// gradient evaluation. `exposure` scales the e^lambda intensity term; a
// node holding a 1/M share of the event stream uses exposure 1/M so that
// per-datum gradients stay additive across a partition.
class Model {
 public:
  Model(const ContentCatalog& catalog, const RequestMatrix& requests,
        HyperPriors priors, double exposure = 1.0);

  int num_contents() const { return F_; }
  int num_periods() const { return N_; }
  int num_hyper() const { return Qh_; }
  int num_data_terms() const { return F_ * N_; }  // NF per-datum terms
  int param_dim() const { return F_ + Qh_; }
  double exposure() const { return exposure_; }
  const HyperPriors& priors() const { return priors_; }
  const Eigen::VectorXd& row_sums() const { return row_sums_; }
  const Eigen::MatrixXd& counts() const { return counts_; }

  ParameterVector initial_parameters() const;

  // K' for the current rho; jitter escalates by 10x from 1e-8 to 1e-2
  // (relative to the mean diagonal) before giving up.
  KernelMatrix build_kernel_matrix(const ParameterVector& params) const;

  // Eq.-(12)-style negative log posterior, up to the constant log H.
  double neg_log_posterior(const ParameterVector& params,
                           const KernelMatrix& kernel) const;

  GradientVector full_gradient(const ParameterVector& params,
                               const KernelMatrix& kernel) const;

  // Unscaled data-term gradient (sum over all NF per-datum terms; lambda
  // components only). This is the anchor gradient g of the variance
  // reduction scheme.
  GradientVector data_term_gradient(const ParameterVector& params) const;

  // Prior + GP gradient terms; exact regardless of any minibatch.
  GradientVector non_data_gradient(const ParameterVector& params,
                                   const KernelMatrix& kernel) const;

  // Data part scaled by NF/b over the minibatch plus exact non-data terms.
  // Minibatch entries index the NF per-datum terms as i = f*N + n.
  GradientVector stochastic_gradient(const ParameterVector& params,
                                     const KernelMatrix& kernel,
                                     std::span<const std::uint32_t> minibatch) const;

  // Snapshot of a parameter point for variance-reduced estimates.
  struct Anchor {
    Eigen::VectorXd exp_lambda;     // e^{lambda} at the anchor
    GradientVector data_gradient;   // full data-term gradient at the anchor
  };
  Anchor make_anchor(const ParameterVector& params) const;

  // Variance-reduced estimate of the data-term gradient alone:
  //   anchor.data_gradient + (NF/b) * sum_{i in I} (grad_i(params) - grad_i(anchor))
  // Split out so a federated node can weight its data share before the
  // prior terms are added.
  GradientVector svrg_data_estimate(const ParameterVector& params,
                                    const Anchor& anchor,
                                    std::span<const std::uint32_t> minibatch) const;

  GradientVector svrg_corrected_gradient(
      const ParameterVector& params, const KernelMatrix& kernel,
      const Anchor& anchor, std::span<const std::uint32_t> minibatch) const;

  // Per-datum gradient evaluations at fresh parameter points, counted in
  // the paper's accounting (NF per anchor, b per minibatch estimate).
  std::uint64_t gradient_eval_count() const { return eval_count_; }
  void reset_gradient_eval_count() const { eval_count_ = 0; }

  // F x Q column-major feature matrix; per-dimension columns are
  // contiguous, which is the layout the row kernels consume.
  const Eigen::MatrixXd& features() const { return feat_; }

 private:
  Eigen::VectorXd exp_lambda(const ParameterVector& params) const;

  int F_ = 0;
  int N_ = 0;
  int Qh_ = 0;  // Q + 2
  double exposure_ = 1.0;
  HyperPriors priors_;
  Eigen::MatrixXd counts_;    // F x N
  Eigen::VectorXd row_sums_;  // per-content total requests
  Eigen::MatrixXd feat_;      // F x Q
  mutable std::uint64_t eval_count_ = 0;
};

// Builds K' over an F x Q (column-major) feature matrix for an arbitrary
// beta (used by the predictor, which re-solves per posterior sample).
KernelMatrix build_kernel_matrix(const Eigen::MatrixXd& features,
                                 const Eigen::VectorXd& beta);

}  // namespace fedpop
