#include "fedpop/predictor.hpp"

#include <cmath>
#include <stdexcept>

#include "fedpop/errors.hpp"
#include "fedpop/kernels.hpp"

namespace fedpop {

PopularityForecast predict_seen(const SampleChain& chain) {
  if (chain.empty()) throw std::runtime_error("empty sample chain");
  const int F = chain.num_contents;
  PopularityForecast out;
  out.predicted = Eigen::VectorXd::Zero(F);
  Eigen::VectorXd el(F);
  for (const auto& sample : chain.samples) {
    kernels::active().vexp(sample.lambda().data(), el.data(), F);
    out.predicted += el;
  }
  out.predicted /= static_cast<double>(chain.samples.size());
  return out;
}

double predict_unseen(const SampleChain& chain, const Eigen::VectorXd& query,
                      const ContentCatalog& catalog) {
  if (chain.empty()) throw std::runtime_error("empty sample chain");
  if (query.size() != catalog.feature_dim())
    throw std::invalid_argument("query feature dimension mismatch (expected " +
                                std::to_string(catalog.feature_dim()) + ")");
  const int F = catalog.num_contents();
  double acc = 0.0;
  Eigen::VectorXd cross(F);
  for (const auto& sample : chain.samples) {
    const Eigen::VectorXd beta = sample.beta();
    const KernelMatrix km = build_kernel_matrix(catalog.features, beta);
    for (int f = 0; f < F; ++f)
      cross[f] = sek_kernel(catalog.features.row(f), query, beta);
    const Eigen::VectorXd solved = km.llt.solve(cross);
    const double mean = solved.dot(sample.lambda());
    double var = beta[1] - solved.dot(cross);
    if (var < 0.0) {
      if (var < -1e-8 * beta[1])
        throw numerical_error("negative predictive variance");
      var = 0.0;
    }
    acc += std::exp(mean + 0.5 * var);
  }
  return acc / static_cast<double>(chain.samples.size());
}

double rmse(const Eigen::VectorXd& predicted, const Eigen::VectorXd& actual) {
  if (predicted.size() != actual.size())
    throw std::invalid_argument("forecast length mismatch");
  return std::sqrt((predicted - actual).squaredNorm() /
                   static_cast<double>(predicted.size()));
}

PopularityForecast ar_baseline(const RequestMatrix& requests, int order,
                               double ridge) {
  const int N = requests.num_periods();
  if (order < 1) throw std::invalid_argument("AR order must be >= 1");
  if (N <= order)
    throw std::invalid_argument("series shorter than the AR order");

  PopularityForecast out;
  out.predicted = Eigen::VectorXd::Zero(requests.num_contents());
  for (int f = 0; f < requests.num_contents(); ++f) {
    const Eigen::VectorXd series = requests.counts.row(f);
    const double first = series[0];
    if ((series.array() == first).all()) {
      out.predicted[f] = first;  // degenerate series: forecast itself
      continue;
    }
    const int rows = N - order;
    Eigen::MatrixXd X(rows, order);
    Eigen::VectorXd y(rows);
    for (int t = 0; t < rows; ++t) {
      for (int k = 0; k < order; ++k) X(t, k) = series[t + order - 1 - k];
      y[t] = series[t + order];
    }
    Eigen::MatrixXd normal = X.transpose() * X;
    normal.diagonal().array() += ridge;
    const Eigen::VectorXd coef = normal.ldlt().solve(X.transpose() * y);
    double pred = 0.0;
    for (int k = 0; k < order; ++k) pred += coef[k] * series[N - 1 - k];
    out.predicted[f] = std::max(0.0, pred);
  }
  return out;
}

}  // namespace fedpop
