#pragma once

#include <string>
#include <vector>

#include "pairnas/ad/tensor.hpp"

namespace pairnas::ad {

struct NamedTensor {
  std::string name;
  Tensor tensor;
};
using NamedTensors = std::vector<NamedTensor>;

struct AdamConfig {
  double learning_rate = 1e-3;
  double weight_decay = 0.0;  // decoupled
  double clip_norm = 1.0;     // global gradient-norm threshold, > 0
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Scales every gradient by threshold / norm when the global norm exceeds the
// threshold. Returns the norm measured before clipping.
double clip_grad_norm(std::vector<Tensor>& params, double threshold);
double global_grad_norm(const std::vector<Tensor>& params);

// Adam with decoupled weight decay. Parameters whose gradient buffer is
// empty (untouched by the last backward pass) are skipped entirely.
class Adam {
 public:
  Adam(std::vector<Tensor> params, AdamConfig config);

  // Clips, updates, then clears all gradients. Throws NumericError on a
  // non-finite gradient. Returns the pre-clip global norm.
  double step();
  void zero_grad();

  const AdamConfig& config() const { return config_; }
  AdamConfig& config() { return config_; }
  long steps_taken() const { return step_; }
  const std::vector<Tensor>& params() const { return params_; }

  // Moment buffers exposed for checkpointing.
  NamedTensors state(const std::string& prefix) const;
  void load_state(const NamedTensors& state, const std::string& prefix);

 private:
  std::vector<Tensor> params_;
  std::vector<std::vector<double>> m_, v_;
  std::vector<long> count_;  // per-parameter update count for bias correction
  AdamConfig config_;
  long step_ = 0;
};

}  // namespace pairnas::ad
