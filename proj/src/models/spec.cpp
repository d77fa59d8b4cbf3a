#include "pairnas/models/spec.hpp"

#include <algorithm>
#include <cctype>

#include "json.hpp"

#include "pairnas/error.hpp"

namespace pairnas::models {

using nlohmann::json;

std::string_view model_name(ModelKind kind) { return kind == ModelKind::Blm ? "BLM" : "ESIM"; }

ModelKind parse_model(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  if (lower == "blm") return ModelKind::Blm;
  if (lower == "esim") return ModelKind::Esim;
  throw ConfigError("unknown model '" + std::string(name) + "'");
}

std::string_view cell_notation(CellKind kind) {
  switch (kind) {
    case CellKind::Lstm: return "L";
    case CellKind::Enas: return "E";
    case CellKind::Random: return "RND";
  }
  return "?";
}

int layer_count(ModelKind kind) { return kind == ModelKind::Blm ? 1 : 2; }

std::vector<CellKind> parse_layer_plan(std::string_view plan, ModelKind kind) {
  std::vector<CellKind> out;
  std::size_t start = 0;
  while (start <= plan.size()) {
    std::size_t slash = plan.find('/', start);
    std::string_view part = plan.substr(start, slash == std::string_view::npos ? std::string_view::npos : slash - start);
    while (!part.empty() && part.front() == ' ') part.remove_prefix(1);
    while (!part.empty() && part.back() == ' ') part.remove_suffix(1);
    if (part == "L") {
      out.push_back(CellKind::Lstm);
    } else if (part == "E") {
      out.push_back(CellKind::Enas);
    } else if (part == "RND" || part == "R") {
      out.push_back(CellKind::Random);
    } else {
      throw ConfigError("bad layer plan '" + std::string(plan) + "'");
    }
    if (slash == std::string_view::npos) break;
    start = slash + 1;
  }
  if (static_cast<int>(out.size()) != layer_count(kind)) {
    throw ConfigError(std::string(model_name(kind)) + " takes " + std::to_string(layer_count(kind)) +
                      "-layer plans, got '" + std::string(plan) + "'");
  }
  return out;
}

std::string layer_plan_notation(const std::vector<CellKind>& plan) {
  std::string out;
  for (std::size_t i = 0; i < plan.size(); ++i) {
    if (i) out += " / ";
    out += cell_notation(plan[i]);
  }
  return out;
}

std::vector<CellKind> ModelSpec::layer_plan() const {
  std::vector<CellKind> out;
  for (const auto& l : layers) out.push_back(l.cell);
  return out;
}

void ModelSpec::validate() const {
  if (static_cast<int>(layers.size()) != layer_count(kind)) {
    throw ConfigError(std::string(model_name(kind)) + " needs exactly " + std::to_string(layer_count(kind)) +
                      " recurrent layers");
  }
  if (input_dim <= 0) throw ConfigError("model input dimension must be positive");
  auto check_rate = [](double r, const char* what) {
    if (!(r >= 0.0 && r < 1.0)) throw ConfigError(std::string(what) + " must be in [0, 1)");
  };
  check_rate(dropout_1, "dropout_1");
  check_rate(dropout_2, "dropout_2");
  if (!(ff_ratio > 0.0)) throw ConfigError("ff_ratio must be positive");
  for (const auto& l : layers) {
    if (l.hidden <= 0) throw ConfigError("hidden dimension must be positive");
    check_rate(l.variational_dropout, "variational dropout");
    if (l.arch) {
      if (l.arch->num_nodes() != num_nodes) throw ConfigError("architecture node count differs from the model's");
      l.arch->validate();
    }
  }
  if (!(range.low <= range.high)) throw ConfigError("label range is inverted");
}

namespace {

CellKind cell_from_string(const std::string& s) {
  if (s == "L") return CellKind::Lstm;
  if (s == "E") return CellKind::Enas;
  if (s == "RND") return CellKind::Random;
  throw ConfigError("bad cell kind '" + s + "'");
}

}  // namespace

std::string to_json(const ModelSpec& spec) {
  json j;
  j["model"] = model_name(spec.kind);
  j["task"] = data::task_name(spec.task);
  j["input_dim"] = spec.input_dim;
  j["dropout_1"] = spec.dropout_1;
  j["dropout_2"] = spec.dropout_2;
  j["highway"] = spec.highway;
  j["num_nodes"] = spec.num_nodes;
  j["ff_ratio"] = spec.ff_ratio;
  j["clamp_predictions"] = spec.clamp_predictions;
  j["range"] = {spec.range.low, spec.range.high};
  j["layers"] = json::array();
  for (const auto& l : spec.layers) {
    json layer{{"cell", cell_notation(l.cell)}, {"hidden", l.hidden}, {"variational_dropout", l.variational_dropout}};
    if (l.arch) layer["arch"] = cell::serialize(*l.arch);
    j["layers"].push_back(layer);
  }
  return j.dump();
}

ModelSpec spec_from_json(std::string_view text) {
  try {
    json j = json::parse(text);
    ModelSpec spec;
    spec.kind = parse_model(j.at("model").get<std::string>());
    spec.task = data::parse_task(j.at("task").get<std::string>());
    spec.input_dim = j.at("input_dim").get<int>();
    spec.dropout_1 = j.at("dropout_1").get<double>();
    spec.dropout_2 = j.at("dropout_2").get<double>();
    spec.highway = j.at("highway").get<bool>();
    spec.num_nodes = j.at("num_nodes").get<int>();
    spec.ff_ratio = j.at("ff_ratio").get<double>();
    spec.clamp_predictions = j.at("clamp_predictions").get<bool>();
    spec.range = {j.at("range").at(0).get<double>(), j.at("range").at(1).get<double>()};
    for (const auto& l : j.at("layers")) {
      LayerSpec layer;
      layer.cell = cell_from_string(l.at("cell").get<std::string>());
      layer.hidden = l.at("hidden").get<int>();
      layer.variational_dropout = l.at("variational_dropout").get<double>();
      if (l.contains("arch")) layer.arch = cell::parse_architecture(l.at("arch").get<std::string>(), spec.num_nodes);
      spec.layers.push_back(std::move(layer));
    }
    spec.validate();
    return spec;
  } catch (const json::exception& e) {
    throw ParseError(std::string("model spec: ") + e.what());
  }
}

}  // namespace pairnas::models
