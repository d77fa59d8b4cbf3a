#include "pairnas/models/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "pairnas/ad/checkpoint.hpp"
#include "pairnas/error.hpp"

namespace pairnas::models {

SentencePairModel::SentencePairModel(ModelSpec spec, std::mt19937_64& rng) : spec_(std::move(spec)) {
  spec_.validate();
  int in = spec_.input_dim;
  for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
    const LayerSpec& ls = spec_.layers[i];
    RecurrentLayer layer{ls.cell, nullptr, nullptr, nullptr, nullptr};
    if (ls.cell == CellKind::Lstm) {
      layer.lstm_fwd = std::make_unique<LstmCellParams>(in, ls.hidden, rng);
      layer.lstm_bwd = std::make_unique<LstmCellParams>(in, ls.hidden, rng);
    } else {
      layer.cell_fwd = std::make_unique<cell::SharedCellParams>(in, ls.hidden, rng, spec_.num_nodes, spec_.highway);
      layer.cell_bwd = std::make_unique<cell::SharedCellParams>(in, ls.hidden, rng, spec_.num_nodes, spec_.highway);
    }
    layers_.push_back(std::move(layer));
    if (spec_.kind == ModelKind::Esim && i == 0) {
      enhance_proj_ = std::make_unique<Linear>(8 * ls.hidden, ls.hidden, rng);
      in = ls.hidden;
    }
  }
  const int joint = 8 * spec_.layers.back().hidden;
  const int ff_width = std::max(1, static_cast<int>(std::lround(joint * spec_.ff_ratio)));
  ff_ = std::make_unique<Linear>(joint, ff_width, rng);
  out_ = std::make_unique<Linear>(ff_width, spec_.output_dim(), rng);
}

namespace {

ad::Tensor maybe_dropout(ad::DropoutKind kind, const ad::Tensor& x, double rate, const ForwardOptions& options) {
  if (!options.training || rate == 0.0) return x;
  if (!options.rng) throw ConfigError("training forward pass needs an rng");
  return ad::dropout(kind, x, rate, true, *options.rng);
}

}  // namespace

ad::Tensor SentencePairModel::run_layer(int index, const ad::Tensor& inputs, const ad::Tensor& mask,
                                        const ForwardOptions& options) const {
  const RecurrentLayer& layer = layers_[index];
  const LayerSpec& ls = spec_.layers[index];
  ad::Tensor x = maybe_dropout(ad::DropoutKind::Variational, inputs, ls.variational_dropout, options);
  if (layer.kind == CellKind::Lstm) {
    return cell::birnn(LstmCell(*layer.lstm_fwd), LstmCell(*layer.lstm_bwd), x, mask);
  }
  const cell::CellArchitecture* arch = options.arch_override ? options.arch_override : (ls.arch ? &*ls.arch : nullptr);
  if (!arch) throw ConfigError("layer " + std::to_string(index) + " needs an architecture");
  cell::EnasCell fwd(*arch, *layer.cell_fwd, spec_.highway, options.mode);
  cell::EnasCell bwd(*arch, *layer.cell_bwd, spec_.highway, options.mode);
  return cell::birnn(fwd, bwd, x, mask);
}

ad::Tensor SentencePairModel::head(const ad::Tensor& joint, const ForwardOptions& options) const {
  ad::Tensor hidden = ad::relu((*ff_)(joint));
  return (*out_)(maybe_dropout(ad::DropoutKind::Standard, hidden, spec_.dropout_2, options));
}

ad::Tensor SentencePairModel::forward(const data::EmbeddedBatch& batch, const ForwardOptions& options) const {
  if (batch.a.rank() != 3 || batch.a.dim(2) != spec_.input_dim || batch.b.rank() != 3 ||
      batch.b.dim(2) != spec_.input_dim) {
    throw DimensionError("batch embeddings must be [B x T x " + std::to_string(spec_.input_dim) + "]");
  }
  if (spec_.kind == ModelKind::Blm) {
    ad::Tensor s1 = max_over_time(run_layer(0, batch.a, batch.mask_a, options), batch.mask_a);
    ad::Tensor s2 = max_over_time(run_layer(0, batch.b, batch.mask_b, options), batch.mask_b);
    ad::Tensor joint = maybe_dropout(ad::DropoutKind::Standard, joint_representation(s1, s2), spec_.dropout_1, options);
    return head(joint, options);
  }

  ad::Tensor a1 = run_layer(0, batch.a, batch.mask_a, options);
  ad::Tensor b1 = run_layer(0, batch.b, batch.mask_b, options);
  AttentionResult att = cross_attention(a1, b1, batch.mask_a, batch.mask_b);
  ad::Tensor ea = maybe_dropout(ad::DropoutKind::Standard, enhance(a1, att.a_tilde), spec_.dropout_1, options);
  ad::Tensor eb = maybe_dropout(ad::DropoutKind::Standard, enhance(b1, att.b_tilde), spec_.dropout_1, options);
  ad::Tensor a2 = run_layer(1, ad::relu((*enhance_proj_)(ea)), batch.mask_a, options);
  ad::Tensor b2 = run_layer(1, ad::relu((*enhance_proj_)(eb)), batch.mask_b, options);
  ad::Tensor joint = ad::concat({mean_over_time(a2, batch.mask_a), max_over_time(a2, batch.mask_a),
                                 mean_over_time(b2, batch.mask_b), max_over_time(b2, batch.mask_b)});
  return head(joint, options);
}

ad::Tensor SentencePairModel::loss(const ad::Tensor& outputs, const data::EmbeddedBatch& batch,
                                   ad::LossKind kind) const {
  const int n = batch.size();
  if (outputs.rank() != 2 || outputs.dim(0) != n || outputs.dim(1) != spec_.output_dim()) {
    throw DimensionError("model outputs do not match the batch");
  }
  if (spec_.task == data::TaskKind::Classification) {
    if (kind != ad::LossKind::CrossEntropy) throw ConfigError("classification uses cross-entropy loss");
    return ad::cross_entropy_loss(outputs, batch.classes());
  }
  ad::Tensor target({n, 1}, batch.labels);
  if (kind == ad::LossKind::Mse) return ad::mse_loss(outputs, target);
  if (kind == ad::LossKind::Mae) return ad::mae_loss(outputs, target);
  throw ConfigError("regression uses mse or mae loss");
}

std::vector<double> SentencePairModel::predict(const ad::Tensor& outputs) const {
  std::vector<double> out;
  const int n = outputs.dim(0);
  if (spec_.task == data::TaskKind::Classification) {
    for (int i = 0; i < n; ++i) out.push_back(outputs[2 * i + 1] > outputs[2 * i] ? 1.0 : 0.0);
    return out;
  }
  for (int i = 0; i < n; ++i) {
    double v = outputs[i];
    if (spec_.clamp_predictions) v = std::clamp(v, spec_.range.low, spec_.range.high);
    out.push_back(v);
  }
  return out;
}

ad::NamedTensors SentencePairModel::named_parameters() const {
  ad::NamedTensors out;
  auto append = [&out](ad::NamedTensors more) { out.insert(out.end(), more.begin(), more.end()); };
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const std::string prefix = "layer" + std::to_string(i);
    if (layers_[i].kind == CellKind::Lstm) {
      append(layers_[i].lstm_fwd->named_parameters(prefix + ".fwd"));
      append(layers_[i].lstm_bwd->named_parameters(prefix + ".bwd"));
    } else {
      append(layers_[i].cell_fwd->named_parameters(prefix + ".fwd"));
      append(layers_[i].cell_bwd->named_parameters(prefix + ".bwd"));
    }
  }
  if (enhance_proj_) append(enhance_proj_->named_parameters("enhance"));
  append(ff_->named_parameters("ff"));
  append(out_->named_parameters("out"));
  return out;
}

const cell::SharedCellParams* SentencePairModel::cell_store(int layer, bool backward) const {
  const auto& l = layers_.at(layer);
  return backward ? l.cell_bwd.get() : l.cell_fwd.get();
}

void center_regression_output(SentencePairModel& model, const data::SentencePairDataset& train) {
  if (model.spec().task != data::TaskKind::Regression || train.empty()) return;
  double mean = 0.0;
  for (const auto& ex : train.examples) mean += ex.label;
  mean /= static_cast<double>(train.size());
  for (auto& nt : model.named_parameters()) {
    if (nt.name == "out.b") nt.tensor.mutable_data()[0] = mean;
  }
}

Evaluation evaluate(const SentencePairModel& model, const data::EmbeddingProvider& provider,
                    const data::SentencePairDataset& data, int batch_size,
                    const cell::CellArchitecture* arch_override) {
  if (data.empty()) throw DimensionError("cannot evaluate on an empty dataset");
  ad::NoGradGuard no_grad;
  Evaluation result;
  std::vector<double> gold;
  ForwardOptions options;
  options.arch_override = arch_override;
  for (const auto& indices : data::minibatches(data.size(), batch_size)) {
    auto batch = data::make_batch(provider, data, indices);
    auto preds = model.predict(model.forward(batch, options));
    result.predictions.insert(result.predictions.end(), preds.begin(), preds.end());
    gold.insert(gold.end(), batch.labels.begin(), batch.labels.end());
  }
  if (data.size() < 2 && data.task == data::TaskKind::Regression) {
    result.metrics.task = data.task;
    result.metrics.pearson_defined = false;
    return result;
  }
  result.metrics = data::score(data.task, result.predictions, gold);
  return result;
}

void write_predictions(const std::filesystem::path& path, const data::SentencePairDataset& data,
                       const std::vector<double>& predictions) {
  if (predictions.size() != data.size()) throw DimensionError("one prediction per example");
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out.precision(17);
  for (std::size_t i = 0; i < data.size(); ++i) {
    out << data.examples[i].id << '\t' << data.examples[i].label << '\t' << predictions[i] << '\n';
  }
}

void save_model(const std::filesystem::path& path, const SentencePairModel& model) {
  ad::Checkpoint ckpt;
  ckpt.meta["kind"] = "model";
  ckpt.meta["spec"] = to_json(model.spec());
  ckpt.tensors = model.named_parameters();
  ad::save_checkpoint(path, ckpt);
}

SentencePairModel load_model(const std::filesystem::path& path) {
  ad::Checkpoint ckpt = ad::load_checkpoint(path);
  auto it = ckpt.meta.find("spec");
  if (it == ckpt.meta.end()) throw ParseError("checkpoint has no model spec");
  std::mt19937_64 rng(0);
  SentencePairModel model(spec_from_json(it->second), rng);
  ad::restore_values(model.named_parameters(), ckpt);
  return model;
}

}  // namespace pairnas::models
