#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pairnas/cell/architecture.hpp"
#include "pairnas/data/dataset.hpp"

namespace pairnas::models {

enum class ModelKind { Blm, Esim };
enum class CellKind { Lstm, Enas, Random };

std::string_view model_name(ModelKind kind);  // "BLM" / "ESIM"
ModelKind parse_model(std::string_view name);  // case-insensitive
std::string_view cell_notation(CellKind kind);  // "L" / "E" / "RND"

int layer_count(ModelKind kind);

// "E", "L", "E / L", "E/L", "RND / L", ... Throws ConfigError when the
// number of layers does not match the model.
std::vector<CellKind> parse_layer_plan(std::string_view plan, ModelKind kind);
std::string layer_plan_notation(const std::vector<CellKind>& plan);

struct LayerSpec {
  CellKind cell = CellKind::Lstm;
  std::optional<cell::CellArchitecture> arch;  // ENAS / random layers; may be supplied per forward instead
  int hidden = 16;
  double variational_dropout = 0.0;  // applied to this layer's input
};

struct ModelSpec {
  ModelKind kind = ModelKind::Blm;
  data::TaskKind task = data::TaskKind::Regression;
  int input_dim = 0;
  std::vector<LayerSpec> layers;
  // BLM: after the recurrent layer, before the final projection.
  // ESIM: after the enhancement layer, in the final MLP.
  double dropout_1 = 0.0;
  double dropout_2 = 0.0;
  bool highway = true;
  int num_nodes = cell::kDefaultNodes;
  double ff_ratio = 0.5;  // feedforward width as a fraction of the joint width
  bool clamp_predictions = false;
  data::LabelRange range{0.0, 5.0};

  int output_dim() const { return task == data::TaskKind::Classification ? 2 : 1; }
  std::vector<CellKind> layer_plan() const;
  std::string notation() const { return layer_plan_notation(layer_plan()); }
  // Throws ConfigError.
  void validate() const;
};

std::string to_json(const ModelSpec& spec);
ModelSpec spec_from_json(std::string_view text);

}  // namespace pairnas::models
