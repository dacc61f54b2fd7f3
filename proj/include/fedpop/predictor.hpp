#pragma once

#include <Eigen/Dense>

#include "fedpop/gp_model.hpp"
#include "fedpop/sampler.hpp"

namespace fedpop {

// Next-period request forecast; entries are posterior-mean request rates
// and therefore non-negative.
struct PopularityForecast {
  Eigen::VectorXd predicted;
};

// Posterior-mean rate per seen content: componentwise average of
// e^{lambda} over the retained samples.
PopularityForecast predict_seen(const SampleChain& chain);

// Rate forecast for a content that was never observed. Per sample, the
// conditional-Gaussian mean/variance of its log-rate given the sampled
// lambda and kernel parameters feed a log-normal mean. Small negative
// conditional variances (within 1e-8 of the sampled amplitude) clamp to
// zero; anything worse is a numerical error.
double predict_unseen(const SampleChain& chain, const Eigen::VectorXd& query,
                      const ContentCatalog& catalog);

double rmse(const Eigen::VectorXd& predicted, const Eigen::VectorXd& actual);

// Per-content least-squares AR(p) one-step forecast on the count series,
// ridge-stabilized, clamped at zero. Constant series forecast themselves.
PopularityForecast ar_baseline(const RequestMatrix& requests, int order = 3,
                               double ridge = 1e-6);

}  // namespace fedpop
