#include "pairnas/cell/shared_params.hpp"

#include "pairnas/error.hpp"

namespace pairnas::cell {

namespace {

ad::Tensor uniform_matrix(int rows, int cols, double range, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-range, range);
  std::vector<double> v(static_cast<std::size_t>(rows) * cols);
  for (double& x : v) x = u(rng);
  return ad::Tensor({rows, cols}, std::move(v), true);
}

}  // namespace

SharedCellParams::SharedCellParams(int input_dim, int hidden_dim, std::mt19937_64& rng, int num_nodes,
                                   bool highway, double init_range)
    : input_dim_(input_dim), hidden_dim_(hidden_dim), num_nodes_(num_nodes) {
  if (input_dim <= 0 || hidden_dim <= 0) throw ConfigError("cell dimensions must be positive");
  if (num_nodes < 1) throw ConfigError("cell needs at least one node");
  w_x_ = uniform_matrix(input_dim, hidden_dim, init_range, rng);
  w_h0_ = uniform_matrix(hidden_dim, hidden_dim, init_range, rng);
  for (int to = 1; to < num_nodes; ++to)
    for (int from = 0; from < to; ++from) {
      w_h_.push_back(uniform_matrix(hidden_dim, hidden_dim, init_range, rng));
      if (highway) w_c_.push_back(uniform_matrix(hidden_dim, hidden_dim, init_range, rng));
    }
  for (int n = 0; n < num_nodes; ++n) bias_.push_back(ad::Tensor::zeros({hidden_dim}, true));
}

const ad::Tensor& SharedCellParams::hidden(int from, int to) const {
  if (from < 0 || from >= to || to >= num_nodes_) throw DimensionError("no hidden matrix for that node pair");
  return w_h_[pair_index(from, to)];
}

const ad::Tensor& SharedCellParams::gate(int from, int to) const {
  if (w_c_.empty()) throw ConfigError("shared store was built without highway gates");
  if (from < 0 || from >= to || to >= num_nodes_) throw DimensionError("no gate matrix for that node pair");
  return w_c_[pair_index(from, to)];
}

void SharedCellParams::check_compatible(const CellArchitecture& arch) const {
  if (arch.num_nodes() != num_nodes_) {
    throw DimensionError("architecture has " + std::to_string(arch.num_nodes()) + " nodes, store has " +
                         std::to_string(num_nodes_));
  }
}

std::vector<ad::Tensor> SharedCellParams::parameters() const {
  std::vector<ad::Tensor> out{w_x_, w_h0_};
  out.insert(out.end(), w_h_.begin(), w_h_.end());
  out.insert(out.end(), w_c_.begin(), w_c_.end());
  out.insert(out.end(), bias_.begin(), bias_.end());
  return out;
}

ad::NamedTensors SharedCellParams::named_parameters(const std::string& prefix) const {
  ad::NamedTensors out{{prefix + ".w_x", w_x_}, {prefix + ".w_h0", w_h0_}};
  for (int to = 1; to < num_nodes_; ++to)
    for (int from = 0; from < to; ++from) {
      const std::string pair = std::to_string(from) + "_" + std::to_string(to);
      out.push_back({prefix + ".w_h." + pair, w_h_[pair_index(from, to)]});
      if (!w_c_.empty()) out.push_back({prefix + ".w_c." + pair, w_c_[pair_index(from, to)]});
    }
  for (int n = 0; n < num_nodes_; ++n) out.push_back({prefix + ".b." + std::to_string(n), bias_[n]});
  return out;
}

}  // namespace pairnas::cell
