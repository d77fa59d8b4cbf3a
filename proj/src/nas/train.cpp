#include "pairnas/nas/train.hpp"

#include <cmath>
#include <limits>
#include <random>

#include "pairnas/ad/checkpoint.hpp"
#include "pairnas/ad/optimizer.hpp"
#include "pairnas/data/batch.hpp"
#include "pairnas/error.hpp"

namespace pairnas::nas {

void TrainConfig::validate() const {
  if (max_epochs < 1) throw ConfigError("max_epochs must be at least 1");
  if (patience < 1) throw ConfigError("patience must be at least 1");
  if (batch_size < 1 || eval_batch_size < 1) throw ConfigError("batch sizes must be positive");
  if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight decay must be non-negative");
  if (!(grad_norm > 0.0)) throw ConfigError("grad norm must be positive");
}

TrainResult train_fixed(models::SentencePairModel& model, const data::EmbeddingProvider& provider,
                        const data::SentencePairDataset& train, const data::SentencePairDataset& dev,
                        const data::SentencePairDataset* test, const TrainConfig& config,
                        const ad::NamedTensors& extra) {
  config.validate();
  if (train.empty() || dev.empty()) throw DimensionError("train and dev sets must be non-empty");

  ad::NamedTensors tracked = model.named_parameters();
  tracked.insert(tracked.end(), extra.begin(), extra.end());
  std::vector<ad::Tensor> params;
  for (const auto& nt : tracked) params.push_back(nt.tensor);
  ad::Adam opt(params, {.learning_rate = config.learning_rate,
                        .weight_decay = config.weight_decay,
                        .clip_norm = config.grad_norm});

  std::mt19937_64 rng(config.seed);
  TrainResult result;
  auto best = ad::snapshot_values(tracked);
  double best_metric = -std::numeric_limits<double>::infinity();
  models::ForwardOptions fwd;
  fwd.training = true;
  fwd.rng = &rng;

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    double loss_sum = 0.0;
    try {
      for (const auto& idx : data::minibatches(train.size(), config.batch_size, &rng)) {
        auto batch = data::make_batch(provider, train, idx);
        ad::Tensor loss = model.loss(model.forward(batch, fwd), batch, config.loss);
        const double value = loss.item();
        if (!std::isfinite(value)) throw NumericError("non-finite training loss");
        loss_sum += value * static_cast<double>(idx.size());
        ad::backward(loss);
        opt.step();
      }
    } catch (const NumericError& e) {
      opt.zero_grad();
      result.diverged = true;
      result.reason = "epoch " + std::to_string(epoch) + ": " + e.what();
      break;
    }
    const auto eval = models::evaluate(model, provider, dev, config.eval_batch_size);
    const double metric = eval.metrics.primary();
    result.curve.push_back({epoch, loss_sum / static_cast<double>(train.size()), metric});
    result.epochs_run = epoch;
    if (metric > best_metric) {
      best_metric = metric;
      result.best_epoch = epoch;
      result.dev = eval.metrics;
      best = ad::snapshot_values(tracked);
    } else if (epoch - result.best_epoch >= config.patience) {
      break;
    }
  }

  ad::restore_snapshot(tracked, best);
  if (result.best_epoch == 0) return result;
  if (test != nullptr && !test->empty()) {
    result.test = models::evaluate(model, provider, *test, config.eval_batch_size).metrics;
  }
  return result;
}

}  // namespace pairnas::nas
