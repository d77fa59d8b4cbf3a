#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pairnas/ad/ops.hpp"
#include "pairnas/data/dataset.hpp"
#include "pairnas/data/embedding.hpp"
#include "pairnas/data/metrics.hpp"
#include "pairnas/models/model.hpp"

namespace pairnas::nas {

struct TrainConfig {
  int max_epochs = 75;
  int patience = 10;  // epochs without dev improvement before stopping
  int batch_size = 32;
  int eval_batch_size = 64;
  double learning_rate = 1e-3;
  double weight_decay = 0.0;
  double grad_norm = 5.0;
  ad::LossKind loss = ad::LossKind::Mse;
  std::uint64_t seed = 0;

  // Throws ConfigError.
  void validate() const;
};

struct EpochPoint {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double dev_metric = 0.0;
};

struct TrainResult {
  bool diverged = false;
  std::string reason;  // set when diverged
  int best_epoch = 0;  // 0 when no epoch finished
  int epochs_run = 0;
  data::MetricReport dev;
  std::optional<data::MetricReport> test;
  std::vector<EpochPoint> curve;
};

// Trains from the model's current weights with Adam, evaluating on dev after
// every epoch and stopping after `patience` epochs without improvement. The
// best-dev weights are restored before returning, and test (when given) is
// scored with them. `extra` holds further trainable tensors such as
// embedding mixing weights. A non-finite loss or gradient stops training
// with diverged = true instead of throwing.
TrainResult train_fixed(models::SentencePairModel& model, const data::EmbeddingProvider& provider,
                        const data::SentencePairDataset& train, const data::SentencePairDataset& dev,
                        const data::SentencePairDataset* test, const TrainConfig& config,
                        const ad::NamedTensors& extra = {});

}  // namespace pairnas::nas
