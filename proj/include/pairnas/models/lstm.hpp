#pragma once

#include <random>
#include <string>

#include "pairnas/ad/optimizer.hpp"
#include "pairnas/cell/recurrent.hpp"

namespace pairnas::models {

// Gate blocks are laid out [i | f | g | o] along the 4H axis.
class LstmCellParams {
 public:
  LstmCellParams(int input_dim, int hidden_dim, std::mt19937_64& rng);

  int input_dim() const { return input_dim_; }
  int hidden_dim() const { return hidden_dim_; }
  const ad::Tensor& w_x() const { return w_x_; }  // [D x 4H]
  const ad::Tensor& w_h() const { return w_h_; }  // [H x 4H]
  const ad::Tensor& bias() const { return bias_; }  // [4H], forget block starts at 1

  std::vector<ad::Tensor> parameters() const { return {w_x_, w_h_, bias_}; }
  ad::NamedTensors named_parameters(const std::string& prefix) const;

 private:
  int input_dim_, hidden_dim_;
  ad::Tensor w_x_, w_h_, bias_;
};

// i = sigmoid(z_i), f = sigmoid(z_f), g = tanh(z_g), o = sigmoid(z_o)
// c_t = f * c_prev + i * g, h_t = o * tanh(c_t)
cell::RecurrentState lstm_step(const LstmCellParams& params, const ad::Tensor& x_t, const ad::Tensor& h_prev,
                               const ad::Tensor& c_prev);

// Same update with x_t W_x supplied.
cell::RecurrentState lstm_step_projected(const LstmCellParams& params, const ad::Tensor& x_projected,
                                         const ad::Tensor& h_prev, const ad::Tensor& c_prev);

class LstmCell final : public cell::RecurrentCell {
 public:
  explicit LstmCell(const LstmCellParams& params) : params_(&params) {}
  int input_dim() const override { return params_->input_dim(); }
  int hidden_dim() const override { return params_->hidden_dim(); }
  std::unique_ptr<cell::Stepper> bind(const ad::Tensor& inputs) const override;

 private:
  const LstmCellParams* params_;
};

}  // namespace pairnas::models
