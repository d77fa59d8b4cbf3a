#pragma once

#include <memory>

#include "pairnas/ad/tensor.hpp"
#include "pairnas/cell/architecture.hpp"
#include "pairnas/cell/execution.hpp"
#include "pairnas/cell/shared_params.hpp"

namespace pairnas::cell {

// Hidden state plus an optional memory cell (LSTM only).
struct RecurrentState {
  ad::Tensor h;
  ad::Tensor c;
};

// Per-sequence executor produced by RecurrentCell::bind.
class Stepper {
 public:
  virtual ~Stepper() = default;
  virtual RecurrentState step(int t, const RecurrentState& prev) = 0;
};

// Anything the sequence drivers can run: ENAS cells, LSTMs.
class RecurrentCell {
 public:
  virtual ~RecurrentCell() = default;
  virtual int input_dim() const = 0;
  virtual int hidden_dim() const = 0;
  virtual RecurrentState zero_state(int batch) const;
  // inputs: [B x T x D]. The stepper may precompute per-sequence work.
  virtual std::unique_ptr<Stepper> bind(const ad::Tensor& inputs) const = 0;
};

enum class ExecutionMode { Interpreted, Compiled };

// An architecture evaluated against a shared store. The store must outlive
// the cell.
class EnasCell final : public RecurrentCell {
 public:
  EnasCell(CellArchitecture arch, const SharedCellParams& params, bool highway,
           ExecutionMode mode = ExecutionMode::Compiled);

  int input_dim() const override { return params_->input_dim(); }
  int hidden_dim() const override { return params_->hidden_dim(); }
  std::unique_ptr<Stepper> bind(const ad::Tensor& inputs) const override;

  const CellArchitecture& architecture() const { return arch_; }
  const CompiledCellPlan& plan() const { return plan_; }

 private:
  CellArchitecture arch_;
  const SharedCellParams* params_;
  bool highway_;
  ExecutionMode mode_;
  CompiledCellPlan plan_;
};

// Runs the cell over [B x T x D] inputs. Where mask[b, t] == 0 the previous
// state is carried forward unchanged. Returns all hidden states, [B x T x H],
// indexed by original time position regardless of direction.
ad::Tensor run_sequence(const RecurrentCell& cell, const ad::Tensor& inputs, const ad::Tensor& mask,
                        bool reverse = false, const RecurrentState* initial = nullptr);

ad::Tensor run_sequence(const CellArchitecture& arch, const SharedCellParams& params, const ad::Tensor& inputs,
                        const ad::Tensor& mask, bool reverse = false, bool highway = true,
                        const ad::Tensor* h0 = nullptr);

// Forward and backward passes concatenated on the last axis: [B x T x 2H].
ad::Tensor birnn(const RecurrentCell& forward, const RecurrentCell& backward, const ad::Tensor& inputs,
                 const ad::Tensor& mask);

ad::Tensor birnn(const CellArchitecture& arch, const SharedCellParams& params_fwd,
                 const SharedCellParams& params_bwd, const ad::Tensor& inputs, const ad::Tensor& mask,
                 bool highway = true);

}  // namespace pairnas::cell
