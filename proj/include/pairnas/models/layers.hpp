#pragma once

#include <random>
#include <string>

#include "pairnas/ad/optimizer.hpp"
#include "pairnas/ad/tensor.hpp"

namespace pairnas::models {

// y = x W + b over the last axis of a rank-2 or rank-3 input.
class Linear {
 public:
  Linear(int in, int out, std::mt19937_64& rng);
  int in_dim() const { return w_.dim(0); }
  int out_dim() const { return w_.dim(1); }
  ad::Tensor operator()(const ad::Tensor& x) const;
  ad::NamedTensors named_parameters(const std::string& prefix) const;

 private:
  ad::Tensor w_, b_;
};

// [s1; s2; |s1 - s2|; s1 * s2] for [B x K] inputs.
ad::Tensor joint_representation(const ad::Tensor& s1, const ad::Tensor& s2);

struct AttentionResult {
  ad::Tensor a_tilde;  // [B x Ta x K]
  ad::Tensor b_tilde;  // [B x Tb x K]
  ad::Tensor weights_a;  // [B x Ta x Tb], rows sum to 1 over unmasked b positions
  ad::Tensor weights_b;  // [B x Tb x Ta]
};

// e_ij = <a_i, b_j>; a_tilde_i = sum_j softmax_j(e_ij) b_j and symmetrically
// for b. Masks are [B x T]. Throws DegenerateError if a sentence is fully
// masked.
AttentionResult cross_attention(const ad::Tensor& a, const ad::Tensor& b, const ad::Tensor& mask_a,
                                const ad::Tensor& mask_b);

// [x; x_tilde; x - x_tilde; x * x_tilde] along the last axis.
ad::Tensor enhance(const ad::Tensor& x, const ad::Tensor& x_tilde);

// Masked pooling over time for [B x T x K] with a [B x T] mask.
ad::Tensor max_over_time(const ad::Tensor& x, const ad::Tensor& mask);
ad::Tensor mean_over_time(const ad::Tensor& x, const ad::Tensor& mask);

}  // namespace pairnas::models
