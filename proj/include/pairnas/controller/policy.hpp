#pragma once

#include <filesystem>
#include <random>
#include <utility>
#include <vector>

#include "pairnas/ad/optimizer.hpp"
#include "pairnas/cell/architecture.hpp"
#include "pairnas/models/lstm.hpp"

namespace pairnas::controller {

struct ControllerConfig {
  int hidden = 64;
  int num_nodes = cell::kDefaultNodes;
  double temperature = 5.0;
  double tanh_constant = 2.5;
  double learning_rate = 3.5e-4;
  double entropy_weight = 1e-4;
  double baseline_decay = 0.999;
  double init_range = 0.1;

  // Throws ConfigError.
  void validate() const;
};

// 1 (node-0 op) + 2 per later node (input index, op).
int decision_count(int num_nodes);

// Decision d for node l >= 1: d = 2l - 1 picks the input, d = 2l the op.
std::vector<int> to_decisions(const cell::CellArchitecture& arch);
cell::CellArchitecture from_decisions(const std::vector<int>& decisions, int num_nodes);

struct SampleTrace {
  std::vector<int> decisions;
  std::vector<double> log_probs;  // per decision, each <= 0
  double entropy = 0.0;           // sum of per-decision entropies

  double log_prob() const;
};

// Differentiable log-probability and entropy of a fixed decision sequence.
struct TraceGraph {
  ad::Tensor log_prob;  // [1]
  ad::Tensor entropy;   // [1]
};

// LSTM controller. Each step consumes the embedding of the previous
// decision (a learned start vector for the first), projects the hidden state
// to logits for the current decision type, then applies
// c * tanh(logits / temperature) and a softmax over the valid choices.
class ControllerPolicy {
 public:
  ControllerPolicy(ControllerConfig config, std::mt19937_64& rng);

  const ControllerConfig& config() const { return config_; }
  int num_decisions() const { return decision_count(config_.num_nodes); }
  // Number of choices at decision d before masking.
  int vocabulary(int d) const;
  // Valid choices at decision d: input decisions of node l allow 0..l-1.
  int valid_choices(int d) const;

  // Thread-safe against concurrent samplers; no graph is recorded.
  std::pair<cell::CellArchitecture, SampleTrace> sample(std::mt19937_64& rng) const;

  // -infinity when an input index is out of range.
  double log_prob(const cell::CellArchitecture& arch) const;
  TraceGraph trace_graph(const std::vector<int>& decisions) const;

  // Per-decision probability vectors (length vocabulary(d)) along a path.
  std::vector<std::vector<double>> decision_probabilities(const std::vector<int>& decisions) const;

  std::vector<ad::Tensor> parameters() const;
  ad::NamedTensors named_parameters() const;

 private:
  struct StepOutput {
    ad::Tensor log_probs;  // [1 x K]
    ad::Tensor probs;      // [1 x K]
  };
  template <typename Choose>
  void unroll(Choose&& choose) const;

  ControllerConfig config_;
  models::LstmCellParams lstm_;
  ad::Tensor start_;                    // [1 x H]
  std::vector<ad::Tensor> embeddings_;  // one table [K_d x H] per decision feeding the next step
  ad::Tensor w_op_, b_op_;              // [H x 4], [4]
  ad::Tensor w_in_, b_in_;              // [H x (N - 1)], [N - 1]
};

struct RewardBaseline {
  double value = 0.0;
  double decay = 0.999;

  void update(double mean_reward) { value = decay * value + (1.0 - decay) * mean_reward; }
};

struct UpdateStats {
  double loss = 0.0;
  double mean_reward = 0.0;
  double baseline_used = 0.0;
  double mean_entropy = 0.0;
  double grad_norm = 0.0;
};

// Adam for the controller with no gradient clipping.
ad::Adam make_controller_optimizer(const ControllerPolicy& policy);

// One step on -mean_i[(R_i - b) * log pi(trace_i)] - entropy_weight * mean
// entropy, with b the baseline before this step; the baseline then moves
// toward mean(R). Throws DimensionError on an empty or mismatched batch.
UpdateStats reinforce_update(const ControllerPolicy& policy, ad::Adam& optimizer,
                             const std::vector<SampleTrace>& traces, const std::vector<double>& rewards,
                             RewardBaseline& baseline, double entropy_weight);

// Flattened gradient of -(reward - baseline) * log pi(decisions) over all
// policy parameters.
std::vector<double> policy_gradient(const ControllerPolicy& policy, const std::vector<int>& decisions,
                                    double reward, double baseline);

// Rewards one fixed architecture with 1 and everything else with 0, stopping
// once its probability exceeds the target.
struct BanditOptions {
  int max_updates = 500;
  int samples_per_update = 1;
  double target_probability = 0.9;
};

struct BanditResult {
  bool reached = false;
  int updates = 0;
  double final_probability = 0.0;
};

BanditResult run_bandit(const cell::CellArchitecture& target, const ControllerConfig& config,
                        const BanditOptions& options, std::uint64_t seed);

void save_controller(const std::filesystem::path& path, const ControllerPolicy& policy, const ad::Adam& optimizer,
                     const RewardBaseline& baseline);
// The policy must have been built with the saved config; throws ConfigError
// on a mismatch.
void load_controller(const std::filesystem::path& path, ControllerPolicy& policy, ad::Adam& optimizer,
                     RewardBaseline& baseline);

}  // namespace pairnas::controller
