#include "fedpop/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include "fedpop/csv.hpp"
#include "fedpop/kernels.hpp"
#include "fedpop/rng.hpp"

namespace fedpop {

void SamplerConfig::validate(int num_data_terms) const {
  if (step_size <= 0) throw std::invalid_argument("step size must be positive");
  if (friction < 1) throw std::invalid_argument("friction constant must be >= 1");
  if (friction * step_size >= 1)
    throw std::invalid_argument("friction * step size must stay below 1");
  if (inner_steps < 1) throw std::invalid_argument("inner loop length must be >= 1");
  if (total_steps < 2 * inner_steps)
    throw std::invalid_argument("step budget too small to collect a sample");
  if (total_steps % inner_steps != 0)
    throw std::invalid_argument("step budget must be a multiple of the inner length");
  const int b = resolved_minibatch(num_data_terms);
  if (b < 1 || b > num_data_terms)
    throw std::invalid_argument("minibatch size must lie in [1, NF]");
  if (resolved_burn_in() >= collected_samples())
    throw std::invalid_argument("burn-in would discard the whole chain");
}

int SamplerConfig::resolved_minibatch(int num_data_terms) const {
  if (minibatch > 0) return minibatch;
  return std::max(1, num_data_terms / 20);
}

int SamplerConfig::resolved_burn_in() const {
  if (burn_in >= 0) return burn_in;
  return static_cast<int>(collected_samples() / 5);
}

void svrg_hmc_step(SamplerState& state, const GradientVector& grad,
                   double step_size, double friction,
                   const Eigen::VectorXd& noise, std::int64_t step_index) {
  const SamplerState before = state;
  const auto& ops = kernels::active();
  const double decay = 1.0 - friction * step_size;
  const double noise_coef = std::sqrt(2.0 * friction * step_size);
  const auto n = static_cast<std::size_t>(state.theta.size());
  ops.triad(decay, state.theta.data(), -step_size, grad.data(), noise_coef,
            noise.data(), n);
  ops.axpy(step_size, state.theta.data(), state.tau.flat().data(), n);
  if (!state.tau.all_finite() || !state.theta.allFinite())
    throw diverged_error(before, step_index);
}

namespace {

// Floyd's subset sampling; returned ascending so summation order is
// canonical.
std::vector<std::uint32_t> draw_minibatch(std::mt19937_64& eng, int population,
                                          int size) {
  std::vector<std::uint32_t> out;
  out.reserve(size);
  for (int j = population - size; j < population; ++j) {
    std::uniform_int_distribution<int> dist(0, j);
    const int t = dist(eng);
    if (std::find(out.begin(), out.end(), static_cast<std::uint32_t>(t)) !=
        out.end()) {
      out.push_back(static_cast<std::uint32_t>(j));
    } else {
      out.push_back(static_cast<std::uint32_t>(t));
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

SampleChain run_chain(const Model& model, const SamplerConfig& config,
                      const std::optional<ParameterVector>& init,
                      const RoundObserver& observer) {
  config.validate(model.num_data_terms());
  model.reset_gradient_eval_count();

  const int b = config.resolved_minibatch(model.num_data_terms());
  const std::int64_t rounds = config.outer_rounds();
  const int burn = config.resolved_burn_in();

  SamplerState state;
  state.tau = init ? *init : model.initial_parameters();
  state.theta = Eigen::VectorXd::Zero(model.param_dim());

  NormalStream noise(make_engine(config.seed, RngStream::kNoise));
  Eigen::VectorXd eta(model.param_dim());

  SampleChain chain;
  chain.num_contents = model.num_contents();
  chain.num_hyper = model.num_hyper();
  chain.seed = config.seed;

  KernelMatrix kernel;
  bool kernel_fresh = false;
  const auto ensure_kernel = [&] {
    if (!kernel_fresh) {
      kernel = model.build_kernel_matrix(state.tau);
      kernel_fresh = true;
    }
  };

  try {
    for (std::int64_t s = 0; s < rounds; ++s) {
      Model::Anchor anchor;
      if (config.kind == SamplerKind::kSvrgHmc)
        anchor = model.make_anchor(state.tau);
      auto mb_engine = make_engine(config.seed, RngStream::kMinibatch, 1,
                                   static_cast<std::uint64_t>(s));
      for (int l = 0; l < config.inner_steps; ++l) {
        ensure_kernel();
        GradientVector grad;
        switch (config.kind) {
          case SamplerKind::kSvrgHmc: {
            const auto idx = draw_minibatch(mb_engine, model.num_data_terms(), b);
            grad = model.svrg_corrected_gradient(state.tau, kernel, anchor, idx);
            break;
          }
          case SamplerKind::kHmc:
            grad = model.full_gradient(state.tau, kernel);
            break;
          case SamplerKind::kSghmc: {
            const auto idx = draw_minibatch(mb_engine, model.num_data_terms(), b);
            grad = model.stochastic_gradient(state.tau, kernel, idx);
            break;
          }
        }
        noise.fill(eta);
        svrg_hmc_step(state, grad, config.step_size, config.friction, eta,
                      s * config.inner_steps + l);
        kernel_fresh = false;
      }
      ensure_kernel();
      const double nlp = model.neg_log_posterior(state.tau, kernel);
      const bool collect = s >= 1;
      if (collect) {
        chain.samples.push_back(state.tau);
        chain.neg_log_posterior.push_back(nlp);
      }
      if (observer) {
        RoundRecord rec;
        rec.outer_round = s;
        rec.tau = &state.tau;
        rec.neg_log_posterior = nlp;
        rec.sample_collected = collect;
        observer(rec);
      }
    }
  } catch (const diverged_error& e) {
    chain.diverged = true;
    chain.divergence_message = e.what();
  }

  const int drop = std::min<int>(burn, static_cast<int>(chain.samples.size()));
  chain.samples.erase(chain.samples.begin(), chain.samples.begin() + drop);
  chain.neg_log_posterior.erase(chain.neg_log_posterior.begin(),
                                chain.neg_log_posterior.begin() + drop);
  chain.gradient_eval_count = model.gradient_eval_count();
  return chain;
}

}  // namespace

SampleChain run_sampler(const Model& model, const SamplerConfig& config,
                        const std::optional<ParameterVector>& init,
                        const RoundObserver& observer) {
  return run_chain(model, config, init, observer);
}

SampleChain hmc_reference_sampler(const Model& model, SamplerConfig config,
                                  const std::optional<ParameterVector>& init,
                                  const RoundObserver& observer) {
  if (config.kind == SamplerKind::kSvrgHmc) config.kind = SamplerKind::kHmc;
  return run_chain(model, config, init, observer);
}

void save_chain(std::ostream& out, const SampleChain& chain,
                const std::string& provenance_comment) {
  out << "# fedpop-chain v1\n";
  out << "# " << provenance_comment << "\n";
  out << "# F=" << chain.num_contents << " QH=" << chain.num_hyper
      << " seed=" << chain.seed
      << " gradient_evals=" << chain.gradient_eval_count
      << " diverged=" << (chain.diverged ? 1 : 0) << "\n";
  out << "sample";
  for (int f = 0; f < chain.num_contents; ++f) out << ",lambda_" << f;
  for (int q = 0; q < chain.num_hyper; ++q) out << ",rho_" << q;
  out << ",neg_log_posterior\n";
  for (std::size_t s = 0; s < chain.samples.size(); ++s) {
    out << s;
    const auto& v = chain.samples[s].flat();
    for (int i = 0; i < v.size(); ++i) out << ',' << format_double(v[i]);
    out << ',' << format_double(chain.neg_log_posterior[s]) << "\n";
  }
}

SampleChain load_chain(std::istream& in) {
  SampleChain chain;
  std::string line;
  bool version_seen = false;
  bool header_seen = false;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (line.rfind("# fedpop-chain", 0) == 0) version_seen = true;
      std::istringstream ms(line.substr(1));
      std::string tok;
      while (ms >> tok) {
        if (tok.rfind("F=", 0) == 0) chain.num_contents = std::stoi(tok.substr(2));
        if (tok.rfind("QH=", 0) == 0) chain.num_hyper = std::stoi(tok.substr(3));
        if (tok.rfind("seed=", 0) == 0) chain.seed = std::stoull(tok.substr(5));
        if (tok.rfind("gradient_evals=", 0) == 0)
          chain.gradient_eval_count = std::stoull(tok.substr(15));
        if (tok.rfind("diverged=", 0) == 0)
          chain.diverged = tok.substr(9) == "1";
      }
      continue;
    }
    if (!header_seen) {
      header_seen = true;
      continue;
    }
    std::istringstream row(line);
    std::string cell;
    std::vector<double> values;
    bool first = true;
    while (std::getline(row, cell, ',')) {
      if (first) {
        first = false;
        continue;
      }
      values.push_back(std::stod(cell));
    }
    const int dim = chain.num_contents + chain.num_hyper;
    if (static_cast<int>(values.size()) != dim + 1)
      throw io_error("chain row has wrong width", line_no);
    Eigen::VectorXd v(dim);
    for (int i = 0; i < dim; ++i) v[i] = values[i];
    chain.samples.emplace_back(std::move(v), chain.num_contents);
    chain.neg_log_posterior.push_back(values.back());
  }
  if (!version_seen) throw io_error("not a fedpop chain checkpoint");
  return chain;
}

}  // namespace fedpop
