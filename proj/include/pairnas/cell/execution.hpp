#pragma once

#include <vector>

#include "pairnas/ad/tensor.hpp"
#include "pairnas/cell/architecture.hpp"
#include "pairnas/cell/shared_params.hpp"

namespace pairnas::cell {

// Reference interpreter for one time step.
//
//   s0 = f0(x W_x + h_prev W_h0 + b0)
//   raw_l = f_l(s_j W_h[j][l] + b_l)             (j = input of node l)
//   s_l = c * raw_l + (1 - c) * s_j, c = sigmoid(s_j W_c[j][l])   if highway
//   s_l = raw_l                                                    otherwise
//   h_t = mean of s over loose ends
ad::Tensor cell_step(const CellArchitecture& arch, const SharedCellParams& params, const ad::Tensor& x_t,
                     const ad::Tensor& h_prev, bool highway);

// All consumers of one source node, evaluated with a single fused matmul
// against the concatenation of their W_h (and W_c) blocks.
struct FanOutGroup {
  struct Target {
    int node;
    Activation op;
  };
  int source;
  std::vector<Target> targets;
};

struct CompiledCellPlan {
  int num_nodes = 0;
  bool highway = false;
  Activation node0_op = Activation::Tanh;
  std::vector<FanOutGroup> groups;  // ascending source order; sources precede consumers
  std::vector<int> loose_ends;
  std::vector<bool> live;  // false for nodes that cannot reach a loose end

  int output_arity() const { return static_cast<int>(loose_ends.size()); }
};

CompiledCellPlan compile(const CellArchitecture& arch, bool highway);

// A plan bound to one parameter store for the duration of a sequence. Fused
// weight blocks are assembled once here and reused at every step.
class BoundPlan {
 public:
  BoundPlan(const CompiledCellPlan& plan, const SharedCellParams& params);

  // x_projected = x_t W_x, computed ahead of time for the whole sequence.
  ad::Tensor step(const ad::Tensor& x_projected, const ad::Tensor& h_prev) const;

 private:
  const CompiledCellPlan* plan_;
  const SharedCellParams* params_;
  std::vector<ad::Tensor> fused_;  // one per group
};

}  // namespace pairnas::cell
