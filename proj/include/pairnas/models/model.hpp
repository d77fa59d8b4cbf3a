#pragma once

#include <filesystem>
#include <memory>
#include <random>
#include <vector>

#include "pairnas/ad/ops.hpp"
#include "pairnas/ad/optimizer.hpp"
#include "pairnas/cell/recurrent.hpp"
#include "pairnas/cell/shared_params.hpp"
#include "pairnas/data/batch.hpp"
#include "pairnas/data/metrics.hpp"
#include "pairnas/models/layers.hpp"
#include "pairnas/models/lstm.hpp"
#include "pairnas/models/spec.hpp"

namespace pairnas::models {

struct ForwardOptions {
  bool training = false;
  std::mt19937_64* rng = nullptr;  // required when training
  // Replaces the architecture of every ENAS / random layer (weight-sharing search).
  const cell::CellArchitecture* arch_override = nullptr;
  cell::ExecutionMode mode = cell::ExecutionMode::Compiled;
};

// BLM: BiRNN -> max pool -> [s1; s2; |s1-s2|; s1*s2] -> FF(ReLU) -> projection.
// ESIM: BiRNN -> cross attention + enhancement -> FF(ReLU) back to the first
// hidden size -> BiRNN -> mean and max pool -> FF(ReLU) -> projection.
class SentencePairModel {
 public:
  SentencePairModel(ModelSpec spec, std::mt19937_64& rng);
  SentencePairModel(SentencePairModel&&) = default;
  SentencePairModel& operator=(SentencePairModel&&) = default;

  const ModelSpec& spec() const { return spec_; }

  // [B x 1] for regression, [B x 2] logits for classification.
  ad::Tensor forward(const data::EmbeddedBatch& batch, const ForwardOptions& options = {}) const;

  // Throws ConfigError when the loss does not suit the task.
  ad::Tensor loss(const ad::Tensor& outputs, const data::EmbeddedBatch& batch, ad::LossKind kind) const;

  // Regression values (clamped to the label range if configured) or argmax classes.
  std::vector<double> predict(const ad::Tensor& outputs) const;

  ad::NamedTensors named_parameters() const;

  // Shared cell store of an ENAS / random layer, nullptr for LSTM layers.
  const cell::SharedCellParams* cell_store(int layer, bool backward) const;

 private:
  struct RecurrentLayer {
    CellKind kind;
    std::unique_ptr<LstmCellParams> lstm_fwd, lstm_bwd;
    std::unique_ptr<cell::SharedCellParams> cell_fwd, cell_bwd;
  };

  ad::Tensor run_layer(int index, const ad::Tensor& inputs, const ad::Tensor& mask,
                       const ForwardOptions& options) const;
  ad::Tensor head(const ad::Tensor& joint, const ForwardOptions& options) const;

  ModelSpec spec_;
  std::vector<RecurrentLayer> layers_;
  std::unique_ptr<Linear> enhance_proj_;  // ESIM only
  std::unique_ptr<Linear> ff_, out_;
};

struct Evaluation {
  data::MetricReport metrics;
  std::vector<double> predictions;
};

// Sets the regression output bias to the mean training label so training
// starts from the constant best predictor. No-op for classification.
void center_regression_output(SentencePairModel& model, const data::SentencePairDataset& train);

// Inference over a whole dataset in fixed-order minibatches.
Evaluation evaluate(const SentencePairModel& model, const data::EmbeddingProvider& provider,
                    const data::SentencePairDataset& data, int batch_size,
                    const cell::CellArchitecture* arch_override = nullptr);

// One line per example: id <TAB> gold <TAB> prediction.
void write_predictions(const std::filesystem::path& path, const data::SentencePairDataset& data,
                       const std::vector<double>& predictions);

// Parameters plus a ModelSpec snapshot.
void save_model(const std::filesystem::path& path, const SentencePairModel& model);
SentencePairModel load_model(const std::filesystem::path& path);

}  // namespace pairnas::models
