#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <vector>

#include "fedpop/codec.hpp"
#include "fedpop/gp_model.hpp"
#include "fedpop/sampler.hpp"

namespace fedpop {

enum class FederatedMode { kNative, kQuantized };
enum class AggregationWeighting { kUniform, kDataSize };

struct FederatedConfig {
  SamplerConfig sampler;  // S, L, b, h, D, burn-in, seed
  FederatedMode mode = FederatedMode::kNative;
  std::uint32_t quant_level = 4096;  // s, quantized mode only
  AggregationWeighting weighting = AggregationWeighting::kUniform;
  int participants_per_round = 0;  // 0 = every node, every round
};

// Simulated fog node. Holds its share of the request data as a Model with
// an exposure equal to its request-mass share, so the per-datum gradients
// of all nodes sum to the centralized ones.
struct FapNode {
  int id = 0;                 // 1..M
  Model model;                // local counts, local exposure
  double weight_factor = 1.0; // scales the data estimate before aggregation
  Model::Anchor anchor;
  std::mt19937_64 mb_engine;  // reseeded at every anchor refresh

  FapNode(int node_id, Model node_model)
      : id(node_id), model(std::move(node_model)) {}
};

// One node upload for one communication round.
struct RoundMessage {
  int node_id = 0;
  std::int64_t round_index = 0;  // global server step
  std::optional<GradientVector> raw;       // native mode
  std::optional<EncodedGradient> encoded;  // quantized mode
  std::uint64_t payload_bits = 0;
};

struct ServerState {
  ParameterVector tau;
  Eigen::VectorXd theta;
  std::int64_t round = 0;  // global server step
  std::vector<int> participants;
  std::uint64_t cumulative_bits = 0;
};

// Node-side computation: the variance-reduced corrected gradient over the
// node's local data (prior/GP terms included via the shared non-data
// gradient at the broadcast tau), sent raw.
RoundMessage local_round(FapNode& node, const ParameterVector& server_tau,
                         const GradientVector& shared_non_data, int minibatch,
                         std::int64_t round_index);

// As local_round, then quantized and Elias-encoded.
RoundMessage quantized_local_round(FapNode& node,
                                   const ParameterVector& server_tau,
                                   const GradientVector& shared_non_data,
                                   int minibatch, std::int64_t round_index,
                                   std::uint32_t level_count,
                                   std::mt19937_64& quant_rng);

// Decodes payloads, averages them with the configured weighting, applies
// the friction update and advances the bit ledger. Throws if a selected
// participant's message is missing (rounds are synchronous).
void server_aggregate(ServerState& state,
                      const std::vector<RoundMessage>& messages,
                      const std::vector<double>& weights, double step_size,
                      double friction, const Eigen::VectorXd& noise);

struct RoundBits {
  std::int64_t round = 0;
  std::uint64_t bits = 0;
  std::uint64_t cumulative = 0;
};

struct FederatedResult {
  SampleChain chain;
  std::vector<RoundBits> comm;  // one entry per communication round
  std::uint64_t cumulative_bits = 0;
};

struct FederatedRoundRecord {
  std::int64_t outer_round = 0;
  const ParameterVector* tau = nullptr;
  double neg_log_posterior = 0.0;
  std::uint64_t cumulative_bits = 0;
  bool sample_collected = false;
};
using FederatedObserver = std::function<void(const FederatedRoundRecord&)>;

// Full federated loop. One communication round per inner step: every
// participant uploads one (possibly quantized) corrected gradient, the
// server aggregates once and broadcasts the new tau. Anchors refresh
// every L rounds and one sample is collected per L rounds, mirroring the
// local sampler exactly -- with M=1 and native payloads the chain is
// bit-identical to run_sampler under the same seed.
FederatedResult run_federated(const Model& global_model,
                              const ContentCatalog& catalog,
                              const std::vector<RequestMatrix>& node_data,
                              const HyperPriors& priors,
                              const FederatedConfig& config,
                              const FederatedObserver& observer = {});

}  // namespace fedpop
