#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "pairnas/ad/optimizer.hpp"
#include "pairnas/cell/architecture.hpp"
#include "pairnas/controller/policy.hpp"
#include "pairnas/data/dataset.hpp"
#include "pairnas/data/embedding.hpp"
#include "pairnas/models/model.hpp"

namespace pairnas::nas {

struct SearchConfig {
  int max_epochs = 150;
  int patience = 10;
  int batch_size = 32;
  int eval_batch_size = 64;
  double child_learning_rate = 1e-4;
  double child_grad_norm = 0.25;
  double child_weight_decay = 0.0;
  ad::LossKind loss = ad::LossKind::Mse;
  int controller_steps = 5;    // REINFORCE updates per epoch
  int samples_per_step = 4;    // architectures scored on dev per update
  int derive_count = 10;       // K unique architectures at the end
  int derive_attempts_per_architecture = 100;
  double reward_ema_decay = 0.9;
  controller::ControllerConfig controller;
  std::uint64_t seed = 0;

  // Throws ConfigError.
  void validate() const;
};

std::string to_json(const SearchConfig& config);
SearchConfig search_config_from_json(std::string_view text);

struct EpochRecord {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double mean_reward = 0.0;  // over every architecture scored this epoch
  double reward_ema = 0.0;
  double best_reward = 0.0;  // max mean_reward so far
  double baseline = 0.0;
  double mean_entropy = 0.0;

  bool operator==(const EpochRecord&) const = default;
};

std::string to_json(const EpochRecord& record);
EpochRecord epoch_record_from_json(std::string_view line);

// Everything the alternating loop mutates. The child spec has every layer
// switched to an ENAS cell without a fixed architecture; the sampled one is
// passed per forward, so ESIM shares it across both layers.
struct SearchState {
  SearchState(const SearchConfig& config, const models::ModelSpec& spec);

  models::SentencePairModel model;
  controller::ControllerPolicy policy;
  ad::Adam child_optimizer;
  ad::Adam controller_optimizer;
  controller::RewardBaseline baseline;
  std::mt19937_64 child_rng;       // shuffling and dropout
  std::mt19937_64 controller_rng;  // architecture sampling
  int epoch = 0;
  int best_epoch = 0;
  std::vector<EpochRecord> history;
  double seconds = 0.0;  // wall-clock accumulated across invocations

  double best_reward() const;
};

// Child spec used during search.
models::ModelSpec search_spec(models::ModelSpec spec);

using ArchitectureSource = std::function<cell::CellArchitecture(std::mt19937_64&)>;

// One pass over the training set with the controller frozen: a fresh
// architecture per minibatch (from `source`, by default the controller),
// one Adam step on the shared parameters. Returns the mean training loss.
// A non-finite loss throws NumericError naming the epoch and minibatch.
double train_shared_epoch(SearchState& state, const data::EmbeddingProvider& provider,
                          const data::SentencePairDataset& train, const SearchConfig& config,
                          const ArchitectureSource& source = {});

// Throws NumericError for a non-finite reward or a Pearson reward outside
// [-1, 1].
void validate_reward(data::TaskKind task, double reward);

// Dev-set metric of one architecture on the frozen shared parameters.
double architecture_reward(const models::SentencePairModel& model, const data::EmbeddingProvider& provider,
                           const data::SentencePairDataset& dev, const cell::CellArchitecture& arch,
                           int batch_size);

struct PhaseStats {
  std::vector<double> rewards;
  double mean_reward = 0.0;
  double mean_entropy = 0.0;
};

using RewardFunction = std::function<double(const cell::CellArchitecture&)>;

// controller_steps REINFORCE updates, each on samples_per_step sampled
// architectures. Shared parameters are frozen.
PhaseStats controller_phase(SearchState& state, const SearchConfig& config, const RewardFunction& reward);
// Rewards are dev-set metrics.
PhaseStats controller_phase(SearchState& state, const data::EmbeddingProvider& provider,
                            const data::SentencePairDataset& dev, const SearchConfig& config);

// Samples until `count` distinct genotypes are found or the attempt budget
// runs out; `complete` reports which.
struct Derived {
  std::vector<cell::CellArchitecture> architectures;
  bool complete = true;
};
Derived derive(const controller::ControllerPolicy& policy, int count, int max_attempts, std::mt19937_64& rng);

struct SearchResult {
  std::vector<EpochRecord> history;
  std::vector<cell::CellArchitecture> derived;
  bool derived_complete = true;
  bool stopped_early = false;
  bool paused = false;  // the epoch callback asked to stop; nothing derived yet
  int best_epoch = 0;
  double seconds = 0.0;  // total over every invocation
};

// Alternates the two phases for up to max_epochs, stopping once the epoch's
// mean reward has not improved for `patience` epochs, then derives K
// architectures. With a run directory the layout is
//   config.json        configuration snapshot, written first
//   metrics.jsonl      one EpochRecord per line
//   state.json         progress and RNG streams for resumption
//   shared.ckpt        child parameters and optimizer state
//   controller.ckpt    controller parameters, optimizer state, baseline
//   derived.arch       the K architectures
//   summary.json       outcome and wall-clock
// and rerunning against it resumes after the last finished epoch. A run
// directory holding a different configuration is refused with ConfigError.
// `on_epoch` sees each finished epoch after it is saved; returning false
// pauses the search.
using EpochCallback = std::function<bool(const EpochRecord&)>;
SearchResult run_search(const SearchConfig& config, const models::ModelSpec& spec,
                        const data::EmbeddingProvider& provider, const data::SentencePairDataset& train,
                        const data::SentencePairDataset& dev, const std::filesystem::path& run_dir = {},
                        const EpochCallback& on_epoch = {});

}  // namespace pairnas::nas
