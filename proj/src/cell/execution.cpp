#include "pairnas/cell/execution.hpp"

#include "pairnas/ad/ops.hpp"
#include "pairnas/error.hpp"

namespace pairnas::cell {

namespace {

void check_step_inputs(const SharedCellParams& params, const ad::Tensor& x_t, const ad::Tensor& h_prev) {
  if (x_t.rank() != 2 || h_prev.rank() != 2) throw DimensionError("cell step expects [B x D] inputs");
  if (x_t.dim(0) != h_prev.dim(0)) throw DimensionError("x_t and h_prev batch sizes differ");
  if (x_t.dim(1) != params.input_dim()) {
    throw DimensionError("input width " + std::to_string(x_t.dim(1)) + " != cell input dim " +
                         std::to_string(params.input_dim()));
  }
  if (h_prev.dim(1) != params.hidden_dim()) throw DimensionError("hidden width does not match the cell");
}

ad::Tensor highway_blend(const ad::Tensor& gate_logits, const ad::Tensor& raw, const ad::Tensor& source) {
  ad::Tensor c = ad::sigmoid(gate_logits);
  return ad::add(ad::mul(c, raw), ad::mul(ad::affine(c, -1.0, 1.0), source));
}

ad::Tensor mean_of(const std::vector<ad::Tensor>& states, const std::vector<int>& nodes) {
  ad::Tensor out = states[nodes[0]];
  for (std::size_t i = 1; i < nodes.size(); ++i) out = ad::add(out, states[nodes[i]]);
  return ad::affine(out, 1.0 / static_cast<double>(nodes.size()), 0.0);
}

}  // namespace

ad::Tensor cell_step(const CellArchitecture& arch, const SharedCellParams& params, const ad::Tensor& x_t,
                     const ad::Tensor& h_prev, bool highway) {
  arch.validate();
  params.check_compatible(arch);
  check_step_inputs(params, x_t, h_prev);
  const int n = arch.num_nodes();
  std::vector<ad::Tensor> s(n);
  s[0] = apply_activation(arch.node0_op, ad::add_bias(ad::add(ad::matmul(x_t, params.w_x()),
                                                              ad::matmul(h_prev, params.w_h0())),
                                                      params.bias(0)));
  for (int l = 1; l < n; ++l) {
    const Link& link = arch.links[l - 1];
    const ad::Tensor& src = s[link.input];
    ad::Tensor raw =
        apply_activation(link.op, ad::add_bias(ad::matmul(src, params.hidden(link.input, l)), params.bias(l)));
    s[l] = highway ? highway_blend(ad::matmul(src, params.gate(link.input, l)), raw, src) : raw;
  }
  return mean_of(s, arch.loose_ends());
}

CompiledCellPlan compile(const CellArchitecture& arch, bool highway) {
  arch.validate();
  CompiledCellPlan plan;
  plan.num_nodes = arch.num_nodes();
  plan.highway = highway;
  plan.node0_op = arch.node0_op;
  plan.loose_ends = arch.loose_ends();

  plan.live.assign(plan.num_nodes, false);
  for (int node : plan.loose_ends) plan.live[node] = true;
  for (int l = plan.num_nodes - 1; l >= 1; --l) {
    if (plan.live[l]) plan.live[arch.links[l - 1].input] = true;
  }

  for (int source = 0; source < plan.num_nodes; ++source) {
    FanOutGroup group{source, {}};
    for (int l = source + 1; l < plan.num_nodes; ++l) {
      if (arch.links[l - 1].input == source && plan.live[l]) group.targets.push_back({l, arch.links[l - 1].op});
    }
    if (!group.targets.empty()) plan.groups.push_back(std::move(group));
  }
  return plan;
}

BoundPlan::BoundPlan(const CompiledCellPlan& plan, const SharedCellParams& params)
    : plan_(&plan), params_(&params) {
  if (plan.num_nodes != params.num_nodes()) throw DimensionError("plan and parameter store node counts differ");
  if (plan.highway && !params.has_highway()) throw ConfigError("highway plan needs a store with gate matrices");
  for (const auto& group : plan.groups) {
    std::vector<ad::Tensor> blocks;
    for (const auto& t : group.targets) {
      blocks.push_back(params.hidden(group.source, t.node));
      if (plan.highway) blocks.push_back(params.gate(group.source, t.node));
    }
    fused_.push_back(blocks.size() == 1 ? blocks[0] : ad::concat(blocks));
  }
}

ad::Tensor BoundPlan::step(const ad::Tensor& x_projected, const ad::Tensor& h_prev) const {
  const SharedCellParams& p = *params_;
  const int hidden = p.hidden_dim();
  if (x_projected.rank() != 2 || x_projected.dim(1) != hidden || h_prev.rank() != 2 ||
      h_prev.dim(1) != hidden || x_projected.dim(0) != h_prev.dim(0)) {
    throw DimensionError("bound plan step expects [B x H] projected input and state");
  }
  std::vector<ad::Tensor> s(plan_->num_nodes);
  ad::Tensor pre0 = ad::add_bias(ad::add(x_projected, ad::matmul(h_prev, p.w_h0())), p.bias(0));
  s[0] = plan_->node0_op == Activation::Identity ? pre0 : apply_activation(plan_->node0_op, pre0);

  const int block = plan_->highway ? 2 * hidden : hidden;
  for (std::size_t g = 0; g < plan_->groups.size(); ++g) {
    const FanOutGroup& group = plan_->groups[g];
    const ad::Tensor& src = s[group.source];
    ad::Tensor y = ad::matmul(src, fused_[g]);
    const bool whole = group.targets.size() == 1 && !plan_->highway;
    for (std::size_t t = 0; t < group.targets.size(); ++t) {
      const auto& target = group.targets[t];
      const int offset = static_cast<int>(t) * block;
      ad::Tensor pre = ad::add_bias(whole ? y : ad::slice_last(y, offset, hidden), p.bias(target.node));
      ad::Tensor raw = target.op == Activation::Identity ? pre : apply_activation(target.op, pre);
      s[target.node] = plan_->highway ? highway_blend(ad::slice_last(y, offset + hidden, hidden), raw, src) : raw;
    }
  }
  return mean_of(s, plan_->loose_ends);
}

}  // namespace pairnas::cell
