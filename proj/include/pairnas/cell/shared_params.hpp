#pragma once

#include <random>
#include <string>
#include <vector>

#include "pairnas/ad/optimizer.hpp"
#include "pairnas/cell/architecture.hpp"

namespace pairnas::cell {

// The weight-sharing store. One hidden matrix (and, with highway gating, one
// gate matrix) exists for every ordered node pair j < l, whichever
// architecture is active.
class SharedCellParams {
 public:
  SharedCellParams(int input_dim, int hidden_dim, std::mt19937_64& rng, int num_nodes = kDefaultNodes,
                   bool highway = true, double init_range = 0.04);

  int input_dim() const { return input_dim_; }
  int hidden_dim() const { return hidden_dim_; }
  int num_nodes() const { return num_nodes_; }
  bool has_highway() const { return !w_c_.empty(); }

  static int pair_index(int from, int to) { return to * (to - 1) / 2 + from; }
  static int num_pairs(int num_nodes) { return num_nodes * (num_nodes - 1) / 2; }

  const ad::Tensor& w_x() const { return w_x_; }
  const ad::Tensor& w_h0() const { return w_h0_; }
  const ad::Tensor& hidden(int from, int to) const;
  // Throws ConfigError when the store was built without highway gates.
  const ad::Tensor& gate(int from, int to) const;
  const ad::Tensor& bias(int node) const { return bias_.at(node); }

  // Throws DimensionError if the architecture's node count differs.
  void check_compatible(const CellArchitecture& arch) const;

  std::vector<ad::Tensor> parameters() const;
  ad::NamedTensors named_parameters(const std::string& prefix) const;

 private:
  int input_dim_, hidden_dim_, num_nodes_;
  ad::Tensor w_x_, w_h0_;
  std::vector<ad::Tensor> w_h_, w_c_;
  std::vector<ad::Tensor> bias_;  // bias_[0] belongs to node 0
};

}  // namespace pairnas::cell
