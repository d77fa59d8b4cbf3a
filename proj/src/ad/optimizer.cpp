#include "pairnas/ad/optimizer.hpp"

#include <cmath>

#include "pairnas/error.hpp"

namespace pairnas::ad {

double global_grad_norm(const std::vector<Tensor>& params) {
  double sq = 0.0;
  for (const auto& p : params) {
    for (double g : p.grad()) sq += g * g;
  }
  return std::sqrt(sq);
}

double clip_grad_norm(std::vector<Tensor>& params, double threshold) {
  if (!(threshold > 0.0)) throw ConfigError("clip threshold must be positive");
  const double norm = global_grad_norm(params);
  if (!std::isfinite(norm)) throw NumericError("non-finite gradient norm");
  if (norm > threshold) {
    const double scale = threshold / norm;
    for (auto& p : params) {
      if (!p.has_grad()) continue;
      for (double& g : p.node()->grad) g *= scale;
    }
  }
  return norm;
}

Adam::Adam(std::vector<Tensor> params, AdamConfig config) : params_(std::move(params)), config_(config) {
  if (!(config_.clip_norm > 0.0)) throw ConfigError("clip threshold must be positive");
  for (const auto& p : params_) {
    m_.emplace_back(p.size(), 0.0);
    v_.emplace_back(p.size(), 0.0);
    count_.push_back(0);
  }
}

double Adam::step() {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    for (double g : params_[i].grad()) {
      if (!std::isfinite(g)) {
        throw NumericError("non-finite gradient in parameter " + std::to_string(i) + " of shape " +
                           shape_string(params_[i].shape()));
      }
    }
  }
  const double norm = clip_grad_norm(params_, config_.clip_norm);
  ++step_;
  const AdamConfig& c = config_;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor& p = params_[i];
    if (!p.has_grad()) continue;
    const long t = ++count_[i];
    const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(t));
    auto w = p.mutable_data();
    auto g = p.grad();
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t k = 0; k < w.size(); ++k) {
      m[k] = c.beta1 * m[k] + (1.0 - c.beta1) * g[k];
      v[k] = c.beta2 * v[k] + (1.0 - c.beta2) * g[k] * g[k];
      const double mhat = m[k] / bc1;
      const double vhat = v[k] / bc2;
      w[k] -= c.learning_rate * (c.weight_decay * w[k] + mhat / (std::sqrt(vhat) + c.epsilon));
    }
  }
  zero_grad();
  return norm;
}

void Adam::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

NamedTensors Adam::state(const std::string& prefix) const {
  NamedTensors out;
  std::vector<double> counts;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    out.push_back({prefix + ".m." + std::to_string(i), Tensor(params_[i].shape(), m_[i])});
    out.push_back({prefix + ".v." + std::to_string(i), Tensor(params_[i].shape(), v_[i])});
    counts.push_back(static_cast<double>(count_[i]));
  }
  counts.push_back(static_cast<double>(step_));
  out.push_back({prefix + ".counts", Tensor({static_cast<int>(counts.size())}, counts)});
  return out;
}

void Adam::load_state(const NamedTensors& state, const std::string& prefix) {
  auto find = [&](const std::string& name) -> const Tensor& {
    for (const auto& nt : state) {
      if (nt.name == name) return nt.tensor;
    }
    throw ConfigError("optimizer state missing " + name);
  };
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const Tensor& m = find(prefix + ".m." + std::to_string(i));
    const Tensor& v = find(prefix + ".v." + std::to_string(i));
    if (m.size() != m_[i].size() || v.size() != v_[i].size()) {
      throw DimensionError("optimizer state shape mismatch for parameter " + std::to_string(i));
    }
    m_[i].assign(m.data().begin(), m.data().end());
    v_[i].assign(v.data().begin(), v.data().end());
  }
  const Tensor& counts = find(prefix + ".counts");
  if (counts.size() != params_.size() + 1) throw DimensionError("optimizer counter length mismatch");
  for (std::size_t i = 0; i < params_.size(); ++i) count_[i] = static_cast<long>(counts[i]);
  step_ = static_cast<long>(counts[params_.size()]);
}

}  // namespace pairnas::ad
