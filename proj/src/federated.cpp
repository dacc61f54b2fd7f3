#include "fedpop/federated.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fedpop/errors.hpp"
#include "fedpop/rng.hpp"

namespace fedpop {
namespace {

std::vector<std::uint32_t> draw_minibatch(std::mt19937_64& eng, int population,
                                          int size) {
  // Floyd's subset sampling, ascending order; must match the local
  // sampler's draw exactly for the M=1 degeneracy.
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

GradientVector node_message_vector(FapNode& node,
                                   const ParameterVector& server_tau,
                                   const GradientVector& shared_non_data,
                                   int minibatch) {
  const auto idx =
      draw_minibatch(node.mb_engine, node.model.num_data_terms(), minibatch);
  const GradientVector est =
      node.model.svrg_data_estimate(server_tau, node.anchor, idx);
  return shared_non_data + node.weight_factor * est;
}

}  // namespace

RoundMessage local_round(FapNode& node, const ParameterVector& server_tau,
                         const GradientVector& shared_non_data, int minibatch,
                         std::int64_t round_index) {
  RoundMessage msg;
  msg.node_id = node.id;
  msg.round_index = round_index;
  msg.raw = node_message_vector(node, server_tau, shared_non_data, minibatch);
  if (!msg.raw->allFinite())
    throw numerical_error("node " + std::to_string(node.id) +
                          " produced a non-finite gradient");
  msg.payload_bits = 64ull * static_cast<std::uint64_t>(msg.raw->size());
  return msg;
}

RoundMessage quantized_local_round(FapNode& node,
                                   const ParameterVector& server_tau,
                                   const GradientVector& shared_non_data,
                                   int minibatch, std::int64_t round_index,
                                   std::uint32_t level_count,
                                   std::mt19937_64& quant_rng) {
  RoundMessage msg;
  msg.node_id = node.id;
  msg.round_index = round_index;
  const GradientVector v =
      node_message_vector(node, server_tau, shared_non_data, minibatch);
  if (!v.allFinite())
    throw numerical_error("node " + std::to_string(node.id) +
                          " produced a non-finite gradient");
  msg.encoded = encode_gradient(quantize(v, level_count, quant_rng));
  msg.payload_bits = msg.encoded->total_bits;
  return msg;
}

void server_aggregate(ServerState& state,
                      const std::vector<RoundMessage>& messages,
                      const std::vector<double>& weights, double step_size,
                      double friction, const Eigen::VectorXd& noise) {
  if (messages.size() != state.participants.size() ||
      messages.size() != weights.size())
    throw std::runtime_error("round is missing a participant message");
  for (std::size_t i = 0; i < messages.size(); ++i)
    if (messages[i].node_id != state.participants[i])
      throw std::runtime_error("round is missing a participant message");

  GradientVector agg = GradientVector::Zero(state.tau.dim());
  std::uint64_t round_bits = 0;
  for (std::size_t i = 0; i < messages.size(); ++i) {
    const auto& msg = messages[i];
    round_bits += msg.payload_bits;
    if (msg.raw) {
      agg += weights[i] * (*msg.raw);
    } else if (msg.encoded) {
      agg += weights[i] * dequantize(decode_gradient(*msg.encoded));
    } else {
      throw std::runtime_error("round is missing a participant message");
    }
  }
  if (!agg.allFinite()) throw numerical_error("aggregated gradient not finite");

  SamplerState ss{state.tau, state.theta};
  svrg_hmc_step(ss, agg, step_size, friction, noise, state.round);
  state.tau = std::move(ss.tau);
  state.theta = std::move(ss.theta);
  state.cumulative_bits += round_bits;
  ++state.round;
}

FederatedResult run_federated(const Model& global_model,
                              const ContentCatalog& catalog,
                              const std::vector<RequestMatrix>& node_data,
                              const HyperPriors& priors,
                              const FederatedConfig& config,
                              const FederatedObserver& observer) {
  const auto& sc = config.sampler;
  sc.validate(global_model.num_data_terms());
  const int num_nodes = static_cast<int>(node_data.size());
  if (num_nodes < 1) throw std::invalid_argument("need at least one node");
  if (config.participants_per_round < 0 ||
      config.participants_per_round > num_nodes)
    throw std::invalid_argument("participants per round out of range");
  if (config.mode == FederatedMode::kQuantized && config.quant_level < 1)
    throw std::invalid_argument("quantization level must be >= 1");

  // Request-mass shares; they define each node's exposure and, under
  // data-size weighting, its aggregation weight.
  std::vector<double> mass(num_nodes);
  double total_mass = 0.0;
  for (int m = 0; m < num_nodes; ++m) {
    if (node_data[m].num_contents() != global_model.num_contents() ||
        node_data[m].num_periods() != global_model.num_periods())
      throw std::invalid_argument("node matrix shape does not match the model");
    mass[m] = node_data[m].counts.sum();
    total_mass += mass[m];
  }
  if (total_mass <= 0) throw std::invalid_argument("no requests in any node");

  std::vector<FapNode> nodes;
  nodes.reserve(num_nodes);
  for (int m = 0; m < num_nodes; ++m) {
    const double share = mass[m] / total_mass;
    nodes.emplace_back(m + 1,
                       Model(catalog, node_data[m], priors, share));
    nodes.back().model.reset_gradient_eval_count();
    // Scale the local data estimate so the weighted server average
    // reconstructs the full-data gradient.
    nodes.back().weight_factor =
        config.weighting == AggregationWeighting::kUniform
            ? static_cast<double>(num_nodes)
            : (mass[m] > 0 ? total_mass / mass[m] : 0.0);
  }

  const int b = sc.resolved_minibatch(global_model.num_data_terms());
  const std::int64_t rounds = sc.outer_rounds();
  const int burn = sc.resolved_burn_in();

  ServerState server;
  server.tau = global_model.initial_parameters();
  server.theta = Eigen::VectorXd::Zero(global_model.param_dim());

  NormalStream noise(make_engine(sc.seed, RngStream::kNoise));
  Eigen::VectorXd eta(global_model.param_dim());
  auto participant_engine = make_engine(sc.seed, RngStream::kParticipants);

  FederatedResult result;
  result.chain.num_contents = global_model.num_contents();
  result.chain.num_hyper = global_model.num_hyper();
  result.chain.seed = sc.seed;
  result.comm.reserve(static_cast<std::size_t>(sc.total_steps));

  KernelMatrix kernel;
  bool kernel_fresh = false;
  const auto ensure_kernel = [&] {
    if (!kernel_fresh) {
      kernel = global_model.build_kernel_matrix(server.tau);
      kernel_fresh = true;
    }
  };

  try {
    for (std::int64_t s = 0; s < rounds; ++s) {
      for (auto& node : nodes) {
        node.anchor = node.model.make_anchor(server.tau);
        node.mb_engine = make_engine(sc.seed, RngStream::kMinibatch,
                                     static_cast<std::uint64_t>(node.id),
                                     static_cast<std::uint64_t>(s));
      }
      for (int l = 0; l < sc.inner_steps; ++l) {
        const std::int64_t step = s * sc.inner_steps + l;
        ensure_kernel();
        // All nodes share the broadcast tau, hence the same prior/GP
        // gradient; computed once and reused.
        const GradientVector non_data =
            global_model.non_data_gradient(server.tau, kernel);

        if (config.participants_per_round == 0) {
          server.participants.resize(num_nodes);
          std::iota(server.participants.begin(), server.participants.end(), 1);
        } else {
          std::vector<int> all(num_nodes);
          std::iota(all.begin(), all.end(), 1);
          server.participants.clear();
          for (int pick = 0; pick < config.participants_per_round; ++pick) {
            std::uniform_int_distribution<int> dist(
                0, static_cast<int>(all.size()) - 1);
            const int at = dist(participant_engine);
            server.participants.push_back(all[at]);
            all.erase(all.begin() + at);
          }
          std::sort(server.participants.begin(), server.participants.end());
        }

        std::vector<RoundMessage> messages;
        std::vector<double> weights;
        messages.reserve(server.participants.size());
        double weight_mass = 0.0;
        if (config.weighting == AggregationWeighting::kDataSize) {
          for (const int id : server.participants) weight_mass += mass[id - 1];
        }
        for (const int id : server.participants) {
          auto& node = nodes[id - 1];
          if (config.mode == FederatedMode::kNative) {
            messages.push_back(
                local_round(node, server.tau, non_data, b, step));
          } else {
            auto qrng = make_engine(sc.seed, RngStream::kQuantize,
                                    static_cast<std::uint64_t>(id),
                                    static_cast<std::uint64_t>(step));
            messages.push_back(quantized_local_round(node, server.tau, non_data,
                                                     b, step, config.quant_level,
                                                     qrng));
          }
          weights.push_back(
              config.weighting == AggregationWeighting::kUniform
                  ? 1.0 / static_cast<double>(server.participants.size())
                  : (weight_mass > 0 ? mass[id - 1] / weight_mass : 0.0));
        }

        noise.fill(eta);
        const std::uint64_t before = server.cumulative_bits;
        server_aggregate(server, messages, weights, sc.step_size, sc.friction,
                         eta);
        kernel_fresh = false;
        result.comm.push_back(RoundBits{step, server.cumulative_bits - before,
                                        server.cumulative_bits});
      }
      ensure_kernel();
      const double nlp = global_model.neg_log_posterior(server.tau, kernel);
      const bool collect = s >= 1;
      if (collect) {
        result.chain.samples.push_back(server.tau);
        result.chain.neg_log_posterior.push_back(nlp);
      }
      if (observer) {
        FederatedRoundRecord rec;
        rec.outer_round = s;
        rec.tau = &server.tau;
        rec.neg_log_posterior = nlp;
        rec.cumulative_bits = server.cumulative_bits;
        rec.sample_collected = collect;
        observer(rec);
      }
    }
  } catch (const diverged_error& e) {
    result.chain.diverged = true;
    result.chain.divergence_message = e.what();
  }

  const int drop =
      std::min<int>(burn, static_cast<int>(result.chain.samples.size()));
  result.chain.samples.erase(result.chain.samples.begin(),
                             result.chain.samples.begin() + drop);
  result.chain.neg_log_posterior.erase(
      result.chain.neg_log_posterior.begin(),
      result.chain.neg_log_posterior.begin() + drop);
  for (const auto& node : nodes)
    result.chain.gradient_eval_count += node.model.gradient_eval_count();
  result.cumulative_bits = server.cumulative_bits;
  return result;
}

}  // namespace fedpop
