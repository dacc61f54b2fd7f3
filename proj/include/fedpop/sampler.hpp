#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "fedpop/errors.hpp"
#include "fedpop/gp_model.hpp"

namespace fedpop {

enum class SamplerKind { kSvrgHmc, kHmc, kSghmc };

struct SamplerConfig {
  std::int64_t total_steps = 0;   // S: inner-step budget, multiple of L
  int inner_steps = 10;           // L
  int minibatch = 0;              // b; 0 = max(1, NF/20)
  double step_size = 1e-3;        // h
  double friction = 10.0;         // D
  int burn_in = -1;               // -1 = 20% of collected samples
  std::uint64_t seed = 0;
  SamplerKind kind = SamplerKind::kSvrgHmc;

  // Validates against a model instance (throws std::invalid_argument).
  void validate(int num_data_terms) const;
  int resolved_minibatch(int num_data_terms) const;
  std::int64_t outer_rounds() const { return total_steps / inner_steps; }
  std::int64_t collected_samples() const { return outer_rounds() - 1; }
  int resolved_burn_in() const;
};

// Position/momentum pair advanced by the friction update.
struct SamplerState {
  ParameterVector tau;
  Eigen::VectorXd theta;
};

class diverged_error : public numerical_error {
 public:
  diverged_error(SamplerState last_finite, std::int64_t step)
      : numerical_error("sampler diverged at step " + std::to_string(step)),
        last_finite_(std::move(last_finite)),
        step_(step) {}
  const SamplerState& last_finite_state() const { return last_finite_; }
  std::int64_t step() const { return step_; }

 private:
  SamplerState last_finite_;
  std::int64_t step_;
};

// One friction-Langevin update:
//   theta' = (1 - D h) theta - h grad + sqrt(2 D h) eta
//   tau'   = tau + h theta'
// Throws diverged_error (carrying the pre-step state) if the result is
// not finite.
void svrg_hmc_step(SamplerState& state, const GradientVector& grad,
                   double step_size, double friction,
                   const Eigen::VectorXd& noise, std::int64_t step_index = -1);

struct SampleChain {
  std::vector<ParameterVector> samples;    // post burn-in
  std::vector<double> neg_log_posterior;   // aligned with samples
  std::uint64_t gradient_eval_count = 0;
  bool diverged = false;
  std::string divergence_message;
  int num_contents = 0;
  int num_hyper = 0;
  std::uint64_t seed = 0;

  bool empty() const { return samples.empty(); }
};

// Per-outer-round observation hook (round logs, live RMSE tracking).
struct RoundRecord {
  std::int64_t outer_round = 0;
  const ParameterVector* tau = nullptr;
  double neg_log_posterior = 0.0;
  bool sample_collected = false;
};
using RoundObserver = std::function<void(const RoundRecord&)>;

// The two-level sampling loop: every outer round refreshes the variance
// reduction anchor, then runs L inner updates on minibatch-corrected
// gradients. One sample is recorded per outer round; the round-0 sample
// and the first `burn_in` collected samples are discarded.
SampleChain run_sampler(const Model& model, const SamplerConfig& config,
                        const std::optional<ParameterVector>& init = {},
                        const RoundObserver& observer = {});

// Full-gradient reference (or plain stochastic-gradient when the config
// asks for it). Identical update rule and noise stream.
SampleChain hmc_reference_sampler(const Model& model, SamplerConfig config,
                                  const std::optional<ParameterVector>& init = {},
                                  const RoundObserver& observer = {});

// Chain checkpoint: versioned CSV with one row per retained sample.
void save_chain(std::ostream& out, const SampleChain& chain,
                const std::string& provenance_comment);
SampleChain load_chain(std::istream& in);

}  // namespace fedpop
