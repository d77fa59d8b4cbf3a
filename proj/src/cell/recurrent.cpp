#include "pairnas/cell/recurrent.hpp"

#include <algorithm>

#include "pairnas/ad/ops.hpp"
#include "pairnas/error.hpp"

namespace pairnas::cell {

RecurrentState RecurrentCell::zero_state(int batch) const {
  return {ad::Tensor::zeros({batch, hidden_dim()}), ad::Tensor::zeros({batch, hidden_dim()})};
}

namespace {

class InterpretedStepper final : public Stepper {
 public:
  InterpretedStepper(const CellArchitecture& arch, const SharedCellParams& params, bool highway,
                     const ad::Tensor& inputs)
      : arch_(arch), params_(params), highway_(highway), inputs_(inputs) {}

  RecurrentState step(int t, const RecurrentState& prev) override {
    return {cell_step(arch_, params_, ad::time_step(inputs_, t), prev.h, highway_), prev.c};
  }

 private:
  const CellArchitecture& arch_;
  const SharedCellParams& params_;
  bool highway_;
  ad::Tensor inputs_;
};

class CompiledStepper final : public Stepper {
 public:
  CompiledStepper(const CompiledCellPlan& plan, const SharedCellParams& params, const ad::Tensor& inputs)
      : bound_(plan, params) {
    const int b = inputs.dim(0), t = inputs.dim(1), d = inputs.dim(2);
    ad::Tensor flat = ad::matmul(ad::reshape(inputs, {b * t, d}), params.w_x());
    projected_ = ad::reshape(flat, {b, t, params.hidden_dim()});
  }

  RecurrentState step(int t, const RecurrentState& prev) override {
    return {bound_.step(ad::time_step(projected_, t), prev.h), prev.c};
  }

 private:
  BoundPlan bound_;
  ad::Tensor projected_;
};

void check_sequence(const RecurrentCell& cell, const ad::Tensor& inputs, const ad::Tensor& mask) {
  if (inputs.rank() != 3) throw DimensionError("sequence input must be [B x T x D], got " + ad::shape_string(inputs.shape()));
  if (inputs.dim(2) != cell.input_dim()) {
    throw DimensionError("sequence feature width " + std::to_string(inputs.dim(2)) + " != cell input dim " +
                         std::to_string(cell.input_dim()));
  }
  if (inputs.dim(1) == 0) throw DimensionError("empty sequence");
  if (mask.rank() != 2 || mask.dim(0) != inputs.dim(0) || mask.dim(1) != inputs.dim(1)) {
    throw DimensionError("mask must be [B x T], got " + ad::shape_string(mask.shape()));
  }
}

}  // namespace

EnasCell::EnasCell(CellArchitecture arch, const SharedCellParams& params, bool highway, ExecutionMode mode)
    : arch_(std::move(arch)), params_(&params), highway_(highway), mode_(mode) {
  arch_.validate();
  params.check_compatible(arch_);
  if (highway && !params.has_highway()) throw ConfigError("highway cell needs a store with gate matrices");
  plan_ = compile(arch_, highway);
}

std::unique_ptr<Stepper> EnasCell::bind(const ad::Tensor& inputs) const {
  if (mode_ == ExecutionMode::Interpreted) {
    return std::make_unique<InterpretedStepper>(arch_, *params_, highway_, inputs);
  }
  return std::make_unique<CompiledStepper>(plan_, *params_, inputs);
}

ad::Tensor run_sequence(const RecurrentCell& cell, const ad::Tensor& inputs, const ad::Tensor& mask, bool reverse,
                        const RecurrentState* initial) {
  check_sequence(cell, inputs, mask);
  const int batch = inputs.dim(0), steps = inputs.dim(1);
  RecurrentState state = initial ? *initial : cell.zero_state(batch);
  if (!state.h.defined() || state.h.rank() != 2 || state.h.dim(0) != batch || state.h.dim(1) != cell.hidden_dim()) {
    throw DimensionError("initial state must be [B x H]");
  }
  auto stepper = cell.bind(inputs);
  std::vector<ad::Tensor> outputs(steps);
  std::vector<double> keep(batch);
  for (int i = 0; i < steps; ++i) {
    const int t = reverse ? steps - 1 - i : i;
    bool any = false, all = true;
    for (int b = 0; b < batch; ++b) {
      keep[b] = mask.data()[static_cast<std::size_t>(b) * steps + t] != 0.0 ? 1.0 : 0.0;
      any = any || keep[b] != 0.0;
      all = all && keep[b] != 0.0;
    }
    if (any) {
      RecurrentState next = stepper->step(t, state);
      if (all) {
        state = std::move(next);
      } else {
        state.h = ad::select_rows(keep, next.h, state.h);
        if (state.c.defined() && next.c.defined()) state.c = ad::select_rows(keep, next.c, state.c);
      }
    }
    outputs[t] = state.h;
  }
  return ad::stack_time(outputs);
}

ad::Tensor run_sequence(const CellArchitecture& arch, const SharedCellParams& params, const ad::Tensor& inputs,
                        const ad::Tensor& mask, bool reverse, bool highway, const ad::Tensor* h0) {
  EnasCell cell(arch, params, highway);
  if (!h0) return run_sequence(cell, inputs, mask, reverse);
  RecurrentState initial{*h0, ad::Tensor()};
  return run_sequence(cell, inputs, mask, reverse, &initial);
}

ad::Tensor birnn(const RecurrentCell& forward, const RecurrentCell& backward, const ad::Tensor& inputs,
                 const ad::Tensor& mask) {
  return ad::concat({run_sequence(forward, inputs, mask, false), run_sequence(backward, inputs, mask, true)});
}

ad::Tensor birnn(const CellArchitecture& arch, const SharedCellParams& params_fwd, const SharedCellParams& params_bwd,
                 const ad::Tensor& inputs, const ad::Tensor& mask, bool highway) {
  EnasCell fwd(arch, params_fwd, highway), bwd(arch, params_bwd, highway);
  return birnn(fwd, bwd, inputs, mask);
}

}  // namespace pairnas::cell
