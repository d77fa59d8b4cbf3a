#include "pairnas/models/lstm.hpp"

#include <cmath>

#include "pairnas/ad/ops.hpp"
#include "pairnas/error.hpp"

namespace pairnas::models {

namespace {

ad::Tensor uniform(ad::Shape shape, double range, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-range, range);
  std::vector<double> v(ad::num_elements(shape));
  for (double& x : v) x = u(rng);
  return ad::Tensor(std::move(shape), std::move(v), true);
}

}  // namespace

LstmCellParams::LstmCellParams(int input_dim, int hidden_dim, std::mt19937_64& rng)
    : input_dim_(input_dim), hidden_dim_(hidden_dim) {
  if (input_dim <= 0 || hidden_dim <= 0) throw ConfigError("LSTM dimensions must be positive");
  const double range = 1.0 / std::sqrt(static_cast<double>(hidden_dim));
  w_x_ = uniform({input_dim, 4 * hidden_dim}, range, rng);
  w_h_ = uniform({hidden_dim, 4 * hidden_dim}, range, rng);
  std::vector<double> b(4 * hidden_dim, 0.0);
  for (int k = hidden_dim; k < 2 * hidden_dim; ++k) b[k] = 1.0;
  bias_ = ad::Tensor({4 * hidden_dim}, std::move(b), true);
}

ad::NamedTensors LstmCellParams::named_parameters(const std::string& prefix) const {
  return {{prefix + ".w_x", w_x_}, {prefix + ".w_h", w_h_}, {prefix + ".b", bias_}};
}

cell::RecurrentState lstm_step_projected(const LstmCellParams& params, const ad::Tensor& x_projected,
                                         const ad::Tensor& h_prev, const ad::Tensor& c_prev) {
  const int hidden = params.hidden_dim();
  if (h_prev.rank() != 2 || h_prev.dim(1) != hidden || c_prev.rank() != 2 || c_prev.dim(1) != hidden ||
      h_prev.dim(0) != c_prev.dim(0) || x_projected.dim(0) != h_prev.dim(0)) {
    throw DimensionError("LSTM state must be [B x H] with matching batch");
  }
  ad::Tensor z = ad::add_bias(ad::add(x_projected, ad::matmul(h_prev, params.w_h())), params.bias());
  ad::Tensor i = ad::sigmoid(ad::slice_last(z, 0, hidden));
  ad::Tensor f = ad::sigmoid(ad::slice_last(z, hidden, hidden));
  ad::Tensor g = ad::tanh(ad::slice_last(z, 2 * hidden, hidden));
  ad::Tensor o = ad::sigmoid(ad::slice_last(z, 3 * hidden, hidden));
  ad::Tensor c = ad::add(ad::mul(f, c_prev), ad::mul(i, g));
  return {ad::mul(o, ad::tanh(c)), c};
}

cell::RecurrentState lstm_step(const LstmCellParams& params, const ad::Tensor& x_t, const ad::Tensor& h_prev,
                               const ad::Tensor& c_prev) {
  if (x_t.rank() != 2 || x_t.dim(1) != params.input_dim()) {
    throw DimensionError("LSTM input must be [B x " + std::to_string(params.input_dim()) + "]");
  }
  return lstm_step_projected(params, ad::matmul(x_t, params.w_x()), h_prev, c_prev);
}

namespace {

class LstmStepper final : public cell::Stepper {
 public:
  LstmStepper(const LstmCellParams& params, const ad::Tensor& inputs) : params_(params) {
    const int b = inputs.dim(0), t = inputs.dim(1), d = inputs.dim(2);
    projected_ = ad::reshape(ad::matmul(ad::reshape(inputs, {b * t, d}), params.w_x()), {b, t, 4 * params.hidden_dim()});
  }

  cell::RecurrentState step(int t, const cell::RecurrentState& prev) override {
    return lstm_step_projected(params_, ad::time_step(projected_, t), prev.h, prev.c);
  }

 private:
  const LstmCellParams& params_;
  ad::Tensor projected_;
};

}  // namespace

std::unique_ptr<cell::Stepper> LstmCell::bind(const ad::Tensor& inputs) const {
  return std::make_unique<LstmStepper>(*params_, inputs);
}

}  // namespace pairnas::models
