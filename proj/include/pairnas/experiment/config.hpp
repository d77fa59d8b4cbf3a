#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include "pairnas/data/dataset.hpp"
#include "pairnas/data/embedding.hpp"
#include "pairnas/hpt/space.hpp"
#include "pairnas/models/spec.hpp"

namespace pairnas::experiment {

struct DatasetConfig {
  // Profile name: "mrpc", "stsb", "sick", "synthetic-cls" or "synthetic-reg".
  std::string name = "synthetic-reg";
  // TSV files. Without a dev file, dev is split off train; without a test
  // file, test is split off train first.
  std::string train, dev, test;
  bool header = false;
  // Defaults to 0.1 for files and 0.2 for synthetic data, whose dev sets
  // are otherwise too small for a stable reward.
  std::optional<double> dev_fraction;
  double test_fraction = 0.2;
  std::uint64_t split_seed = 0;
  // Synthetic profiles only.
  int synthetic_size = 256;
  std::uint64_t synthetic_seed = 0;
};

struct EmbeddingConfig {
  std::string kind = "toy-hash";  // "static", "multi-layer", "multi-layer-pair" or "toy-hash"
  std::string name = "toy";       // report label; also picks the hidden-size list
  std::string path;
  int dim = 16;
  std::uint64_t seed = 0;
};

struct BudgetConfig {
  int baseline_trials = 20;
  int derived_trials = 20;  // tune-derived, random-baseline and transfer
  int concurrency = 1;
  std::string sampler = "tpe";  // or "random"
  int search_epochs = 10;
  int search_patience = 10;
  int train_epochs = 75;
  int patience = 10;
  int derive_count = 10;
};

struct ExperimentConfig {
  DatasetConfig dataset;
  EmbeddingConfig embedding;
  std::string model = "BLM";
  BudgetConfig budget;
  std::uint64_t seed = 0;
  std::string output = "runs";
  bool memory_cap = false;  // restricted hidden sizes and batch sizes
  // Child hyperparameters for `search` when no baseline study exists; keys
  // follow the tuning space (batch_size, hidden_dim, dropout_1, ...).
  hpt::Assignment search_overrides;

  models::ModelKind model_kind() const { return models::parse_model(model); }
  data::DatasetProfile profile() const { return data::builtin_profile(dataset.name); }

  // Checks budgets and that referenced files exist. Throws ConfigError.
  void validate() const;
};

std::string to_json(const ExperimentConfig& config);
ExperimentConfig config_from_json(std::string_view text);
ExperimentConfig load_config(const std::filesystem::path& path);

// "desk" leaves the defaults; "full" asks for 500 baseline trials, 200
// derived trials and 150 search epochs.
void apply_preset(ExperimentConfig& config, std::string_view preset);

struct Splits {
  data::SentencePairDataset train, dev, test;
};

Splits load_splits(const ExperimentConfig& config);

std::unique_ptr<data::EmbeddingProvider> load_provider(const EmbeddingConfig& config);

}  // namespace pairnas::experiment
