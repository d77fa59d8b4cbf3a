#include "pairnas/hpt/space.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

#include "pairnas/error.hpp"

namespace pairnas::hpt {

using nlohmann::json;

ParamSpec ParamSpec::categorical(std::string name, std::vector<std::string> choices) {
  ParamSpec p;
  p.name = std::move(name);
  p.kind = ParamKind::Categorical;
  p.choices = std::move(choices);
  return p;
}

ParamSpec ParamSpec::continuous(std::string name, double low, double high, bool log_scale) {
  ParamSpec p;
  p.name = std::move(name);
  p.kind = ParamKind::Continuous;
  p.low = low;
  p.high = high;
  p.log_scale = log_scale;
  return p;
}

SearchSpace::SearchSpace(std::vector<ParamSpec> params) : params_(std::move(params)) { validate(); }

const ParamSpec* SearchSpace::find(std::string_view name) const {
  for (const auto& p : params_) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

void SearchSpace::validate() const {
  std::set<std::string> names;
  for (const auto& p : params_) {
    if (p.name.empty()) throw ConfigError("parameter without a name");
    if (!names.insert(p.name).second) throw ConfigError("duplicate parameter '" + p.name + "'");
    if (p.kind == ParamKind::Categorical) {
      if (p.choices.empty()) throw ConfigError("categorical '" + p.name + "' has no choices");
    } else {
      if (!(p.low < p.high)) throw ConfigError("continuous '" + p.name + "' needs low < high");
      if (p.log_scale && !(p.low > 0.0)) throw ConfigError("log-scale '" + p.name + "' needs positive bounds");
    }
  }
}

bool SearchSpace::contains(const Assignment& a) const {
  if (a.size() != params_.size()) return false;
  for (const auto& p : params_) {
    auto it = a.find(p.name);
    if (it == a.end()) return false;
    if (p.kind == ParamKind::Categorical) {
      const auto* s = std::get_if<std::string>(&it->second);
      if (!s || std::find(p.choices.begin(), p.choices.end(), *s) == p.choices.end()) return false;
    } else {
      const auto* v = std::get_if<double>(&it->second);
      if (!v || !(*v >= p.low && *v <= p.high)) return false;
    }
  }
  return true;
}

double number(const Assignment& a, const std::string& name) {
  auto it = a.find(name);
  if (it == a.end()) throw ConfigError("assignment lacks '" + name + "'");
  if (const auto* v = std::get_if<double>(&it->second)) return *v;
  throw ConfigError("'" + name + "' is not continuous");
}

const std::string& choice(const Assignment& a, const std::string& name) {
  auto it = a.find(name);
  if (it == a.end()) throw ConfigError("assignment lacks '" + name + "'");
  if (const auto* s = std::get_if<std::string>(&it->second)) return *s;
  throw ConfigError("'" + name + "' is not categorical");
}

int integer_choice(const Assignment& a, const std::string& name) {
  const std::string& s = choice(a, name);
  std::size_t used = 0;
  int v = 0;
  try {
    v = std::stoi(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size() || s.empty()) throw ConfigError("'" + name + "' is not an integer choice: " + s);
  return v;
}

namespace {

json assignment_json(const Assignment& a) {
  json j = json::object();
  for (const auto& [k, v] : a) {
    if (const auto* d = std::get_if<double>(&v)) {
      j[k] = *d;
    } else {
      j[k] = std::get<std::string>(v);
    }
  }
  return j;
}

}  // namespace

std::string to_json(const Assignment& a) { return assignment_json(a).dump(); }

Assignment assignment_from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("assignment: ") + e.what());
  }
  if (!j.is_object()) throw ParseError("assignment must be a JSON object");
  Assignment a;
  for (const auto& [k, v] : j.items()) {
    if (v.is_number()) {
      a[k] = v.get<double>();
    } else if (v.is_string()) {
      a[k] = v.get<std::string>();
    } else {
      throw ParseError("assignment value for '" + k + "' must be a number or string");
    }
  }
  return a;
}

void save_space(const std::filesystem::path& path, const SearchSpace& space) {
  json rows = json::array();
  for (const auto& p : space.params()) {
    if (p.kind == ParamKind::Categorical) {
      rows.push_back({{"name", p.name}, {"type", "categorical"}, {"choices", p.choices}});
    } else {
      rows.push_back({{"name", p.name}, {"type", "continuous"}, {"low", p.low}, {"high", p.high}, {"log", p.log_scale}});
    }
  }
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << json{{"params", rows}}.dump(2) << '\n';
}

SearchSpace load_space(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    json j = json::parse(buf.str());
    std::vector<ParamSpec> params;
    for (const auto& row : j.at("params")) {
      const std::string type = row.at("type").get<std::string>();
      const std::string name = row.at("name").get<std::string>();
      if (type == "categorical") {
        params.push_back(ParamSpec::categorical(name, row.at("choices").get<std::vector<std::string>>()));
      } else if (type == "continuous") {
        params.push_back(ParamSpec::continuous(name, row.at("low").get<double>(), row.at("high").get<double>(),
                                               row.value("log", false)));
      } else {
        throw ParseError("unknown parameter type '" + type + "'");
      }
    }
    return SearchSpace(std::move(params));
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

std::vector<int> hidden_dims_for(std::string_view embedding, bool memory_cap) {
  std::vector<int> dims;
  if (embedding == "bert") {
    dims = {384, 512, 768, 1152, 1536};
  } else if (embedding == "glove") {
    dims = {150, 200, 300, 450, 600};
  } else {
    dims = {8, 12, 16, 24, 32};
  }
  if (memory_cap) dims.resize(3);
  return dims;
}

SearchSpace table3_space(const Table3Options& options) {
  if (options.hidden_dims.empty()) throw ConfigError("hidden dimension list is empty");
  std::vector<ParamSpec> p;
  p.push_back(options.restrict_batch ? ParamSpec::categorical("batch_size", {"16", "32"})
                                     : ParamSpec::categorical("batch_size", {"16", "32", "64"}));
  p.push_back(ParamSpec::continuous("learning_rate", 1e-4, 1e-2, true));
  p.push_back(options.task == data::TaskKind::Regression ? ParamSpec::categorical("loss", {"mse", "mae"})
                                                         : ParamSpec::categorical("loss", {"cross_entropy"}));
  p.push_back(ParamSpec::continuous("weight_decay", 0.001, 0.1));
  p.push_back(ParamSpec::continuous("grad_norm", 0.25, 20.0));
  std::vector<std::string> dims;
  for (int d : options.hidden_dims) dims.push_back(std::to_string(d));
  p.push_back(ParamSpec::categorical("hidden_dim", dims));
  p.push_back(ParamSpec::continuous("dropout_1", 0.25, 0.75));
  p.push_back(ParamSpec::continuous("dropout_2", 0.25, 0.75));
  p.push_back(ParamSpec::continuous("variational_dropout", 0.25, 0.75));
  p.push_back(ParamSpec::categorical("seed", {"0", "1", "2", "3", "4", "5"}));
  if (!options.architectures.empty()) p.push_back(ParamSpec::categorical("architecture", options.architectures));
  return SearchSpace(std::move(p));
}

SearchSpace analytic_space() {
  return SearchSpace({ParamSpec::continuous("x", 0.0, 1.0), ParamSpec::categorical("c", {"a", "b", "c", "d"})});
}

double analytic_objective(const Assignment& a) {
  const double x = number(a, "x");
  const std::string& c = choice(a, "c");
  const double penalty = 0.05 * static_cast<double>(c[0] - 'a');
  return -((x - 0.3) * (x - 0.3)) - penalty;
}

}  // namespace pairnas::hpt
