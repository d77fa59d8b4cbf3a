#pragma once

#include <random>
#include <span>
#include <string_view>
#include <vector>

#include "pairnas/ad/tensor.hpp"

namespace pairnas::ad {

enum class UnaryOp { Tanh, Relu, Sigmoid, Identity, Abs };
enum class BinaryOp { Add, Sub, Mul };

// --- linear algebra -------------------------------------------------------

// [m x k] * [k x n] -> [m x n]
Tensor matmul(const Tensor& a, const Tensor& b);
// Batched: [B x m x k] * [B x k x n] -> [B x m x n]
Tensor bmm(const Tensor& a, const Tensor& b);
// Swaps the last two axes of a rank-3 tensor.
Tensor transpose_last(const Tensor& a);

// --- pointwise ------------------------------------------------------------

Tensor elementwise(UnaryOp op, const Tensor& a);
Tensor elementwise(BinaryOp op, const Tensor& a, const Tensor& b);

inline Tensor tanh(const Tensor& a) { return elementwise(UnaryOp::Tanh, a); }
inline Tensor relu(const Tensor& a) { return elementwise(UnaryOp::Relu, a); }
inline Tensor sigmoid(const Tensor& a) { return elementwise(UnaryOp::Sigmoid, a); }
inline Tensor abs(const Tensor& a) { return elementwise(UnaryOp::Abs, a); }
inline Tensor add(const Tensor& a, const Tensor& b) { return elementwise(BinaryOp::Add, a, b); }
inline Tensor sub(const Tensor& a, const Tensor& b) { return elementwise(BinaryOp::Sub, a, b); }
inline Tensor mul(const Tensor& a, const Tensor& b) { return elementwise(BinaryOp::Mul, a, b); }

// alpha * a + beta
Tensor affine(const Tensor& a, double alpha, double beta);
// a * s where s holds a single element.
Tensor scale_by(const Tensor& a, const Tensor& s);
// Adds a length-n vector to every row of a [... x n] tensor.
Tensor add_bias(const Tensor& a, const Tensor& bias);

// --- shape ----------------------------------------------------------------

Tensor reshape(const Tensor& a, Shape shape);
// Concatenates along the last axis; leading dims must agree.
Tensor concat(const std::vector<Tensor>& parts);
// Columns [begin, begin + length) of the last axis.
Tensor slice_last(const Tensor& a, int begin, int length);
// [B x T x D] -> [B x D] at time t.
Tensor time_step(const Tensor& a, int t);
// T tensors of [B x D] -> [B x T x D].
Tensor stack_time(const std::vector<Tensor>& steps);
// Row-wise select: out[i] = keep[i] ? a[i] : b[i] for [B x D] inputs.
Tensor select_rows(std::span<const double> keep, const Tensor& a, const Tensor& b);

// --- reductions -----------------------------------------------------------
//
// Masks are 0/1 tensors of the same rank as the input whose dims are either
// equal to the input's or 1 (broadcast).

enum class Reduction { Max, Mean, Sum };

Tensor reduce(Reduction op, const Tensor& a, int axis, const Tensor* mask = nullptr);
inline Tensor masked_max(const Tensor& a, int axis, const Tensor& mask) {
  return reduce(Reduction::Max, a, axis, &mask);
}
inline Tensor masked_mean(const Tensor& a, int axis, const Tensor& mask) {
  return reduce(Reduction::Mean, a, axis, &mask);
}
// Normalizes along `axis`; masked positions get probability exactly 0.
Tensor softmax(const Tensor& a, int axis, const Tensor* mask = nullptr);
// Log-probabilities along `axis`; masked positions hold 0 and receive no
// gradient.
Tensor log_softmax(const Tensor& a, int axis, const Tensor* mask = nullptr);

// Sum / mean over every element, returned as a [1] tensor.
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

// --- losses ---------------------------------------------------------------

enum class LossKind { Mse, Mae, CrossEntropy };

std::string_view loss_name(LossKind kind);  // "mse" / "mae" / "cross_entropy"
LossKind parse_loss(std::string_view name);

// pred and target must have the same number of elements.
Tensor mse_loss(const Tensor& pred, const Tensor& target);
// Subgradient 0 at an exactly zero residual.
Tensor mae_loss(const Tensor& pred, const Tensor& target);
// logits [B x C]; classes in [0, C).
Tensor cross_entropy_loss(const Tensor& logits, std::span<const int> classes);

// --- dropout --------------------------------------------------------------

enum class DropoutKind { Standard, Variational };

// Standard: i.i.d. mask per element. Variational: input [B x T x D], one
// mask per (batch row, feature) reused at every time step. Inverted
// scaling 1/(1-rate). Identity when not training or rate == 0.
Tensor dropout(DropoutKind kind, const Tensor& a, double rate, bool training, std::mt19937_64& rng);

}  // namespace pairnas::ad
