#pragma once

#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "pairnas/data/dataset.hpp"

namespace pairnas::hpt {

enum class ParamKind { Categorical, Continuous };

struct ParamSpec {
  std::string name;
  ParamKind kind = ParamKind::Continuous;
  double low = 0.0, high = 1.0;
  bool log_scale = false;
  std::vector<std::string> choices;

  static ParamSpec categorical(std::string name, std::vector<std::string> choices);
  static ParamSpec continuous(std::string name, double low, double high, bool log_scale = false);
};

// Continuous values are doubles; categorical values are the choice strings.
using Value = std::variant<double, std::string>;
using Assignment = std::map<std::string, Value>;

class SearchSpace {
 public:
  SearchSpace() = default;
  explicit SearchSpace(std::vector<ParamSpec> params);

  const std::vector<ParamSpec>& params() const { return params_; }
  const ParamSpec* find(std::string_view name) const;
  bool has(std::string_view name) const { return find(name) != nullptr; }

  // Throws ConfigError on empty choice lists, inverted bounds, non-positive
  // log-scale bounds, or duplicate names.
  void validate() const;
  // True if every parameter is present, typed right, and within its domain.
  bool contains(const Assignment& a) const;

 private:
  std::vector<ParamSpec> params_;
};

double number(const Assignment& a, const std::string& name);
const std::string& choice(const Assignment& a, const std::string& name);
int integer_choice(const Assignment& a, const std::string& name);

std::string to_json(const Assignment& a);
Assignment assignment_from_json(std::string_view text);

// Space declaration file (JSON, one entry per row of the table).
void save_space(const std::filesystem::path& path, const SearchSpace& space);
SearchSpace load_space(const std::filesystem::path& path);

// Hidden-dimension choices per embedding family: "bert", "glove", or the
// desk-scale list used for toy and other embeddings. The memory cap keeps
// the three smallest.
std::vector<int> hidden_dims_for(std::string_view embedding, bool memory_cap = false);

struct Table3Options {
  data::TaskKind task = data::TaskKind::Regression;
  std::vector<int> hidden_dims;
  std::vector<std::string> architectures;  // serialized cells; empty for LSTM-only studies
  bool restrict_batch = false;             // batch size limited to {16, 32}
};

// batch_size, learning_rate (log), loss, weight_decay, grad_norm, hidden_dim,
// dropout_1, dropout_2, variational_dropout, seed, and architecture when
// candidates are given.
SearchSpace table3_space(const Table3Options& options);

// Objective used to compare samplers: -(x - 0.3)^2 - 0.05 * index(c) over
// x in [0, 1] and c in {a, b, c, d}. Maximum 0 at x = 0.3, c = a.
SearchSpace analytic_space();
double analytic_objective(const Assignment& a);

}  // namespace pairnas::hpt
