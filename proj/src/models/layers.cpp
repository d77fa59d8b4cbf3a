#include "pairnas/models/layers.hpp"

#include <cmath>

#include "pairnas/ad/ops.hpp"
#include "pairnas/error.hpp"

namespace pairnas::models {

Linear::Linear(int in, int out, std::mt19937_64& rng) {
  if (in <= 0 || out <= 0) throw ConfigError("linear layer dimensions must be positive");
  const double range = std::sqrt(6.0 / (in + out));
  std::uniform_real_distribution<double> u(-range, range);
  std::vector<double> w(static_cast<std::size_t>(in) * out);
  for (double& v : w) v = u(rng);
  w_ = ad::Tensor({in, out}, std::move(w), true);
  b_ = ad::Tensor::zeros({out}, true);
}

ad::Tensor Linear::operator()(const ad::Tensor& x) const {
  if (x.rank() == 2) return ad::add_bias(ad::matmul(x, w_), b_);
  if (x.rank() == 3) {
    const int b = x.dim(0), t = x.dim(1);
    return ad::reshape(ad::add_bias(ad::matmul(ad::reshape(x, {b * t, x.dim(2)}), w_), b_), {b, t, out_dim()});
  }
  throw DimensionError("linear layer expects a rank-2 or rank-3 input");
}

ad::NamedTensors Linear::named_parameters(const std::string& prefix) const {
  return {{prefix + ".w", w_}, {prefix + ".b", b_}};
}

ad::Tensor joint_representation(const ad::Tensor& s1, const ad::Tensor& s2) {
  if (s1.shape() != s2.shape()) throw DimensionError("pooled representations differ in shape");
  return ad::concat({s1, s2, ad::abs(ad::sub(s1, s2)), ad::mul(s1, s2)});
}

AttentionResult cross_attention(const ad::Tensor& a, const ad::Tensor& b, const ad::Tensor& mask_a,
                                const ad::Tensor& mask_b) {
  if (a.rank() != 3 || b.rank() != 3 || a.dim(0) != b.dim(0) || a.dim(2) != b.dim(2)) {
    throw DimensionError("cross attention expects [B x T x K] states with equal B and K");
  }
  const int batch = a.dim(0), ta = a.dim(1), tb = b.dim(1);
  if (mask_a.shape() != ad::Shape{batch, ta} || mask_b.shape() != ad::Shape{batch, tb}) {
    throw DimensionError("cross attention masks must be [B x T]");
  }
  ad::Tensor e = ad::bmm(a, ad::transpose_last(b));  // [B x Ta x Tb]
  ad::Tensor over_b = ad::reshape(mask_b, {batch, 1, tb});
  ad::Tensor over_a = ad::reshape(mask_a, {batch, 1, ta});
  AttentionResult r;
  r.weights_a = ad::softmax(e, 2, &over_b);
  r.weights_b = ad::softmax(ad::transpose_last(e), 2, &over_a);
  r.a_tilde = ad::bmm(r.weights_a, b);
  r.b_tilde = ad::bmm(r.weights_b, a);
  return r;
}

ad::Tensor enhance(const ad::Tensor& x, const ad::Tensor& x_tilde) {
  if (x.shape() != x_tilde.shape()) throw DimensionError("enhancement inputs differ in shape");
  return ad::concat({x, x_tilde, ad::sub(x, x_tilde), ad::mul(x, x_tilde)});
}

namespace {

ad::Tensor time_mask(const ad::Tensor& x, const ad::Tensor& mask) {
  if (x.rank() != 3 || mask.shape() != ad::Shape{x.dim(0), x.dim(1)}) {
    throw DimensionError("pooling expects [B x T x K] states and a [B x T] mask");
  }
  return ad::reshape(mask, {x.dim(0), x.dim(1), 1});
}

}  // namespace

ad::Tensor max_over_time(const ad::Tensor& x, const ad::Tensor& mask) {
  return ad::masked_max(x, 1, time_mask(x, mask));
}

ad::Tensor mean_over_time(const ad::Tensor& x, const ad::Tensor& mask) {
  return ad::masked_mean(x, 1, time_mask(x, mask));
}

}  // namespace pairnas::models
