#include "pairnas/controller/policy.hpp"

#include <cmath>
#include <limits>

#include "pairnas/ad/checkpoint.hpp"
#include "pairnas/ad/ops.hpp"
#include "pairnas/error.hpp"

namespace pairnas::controller {

void ControllerConfig::validate() const {
  if (hidden <= 0) throw ConfigError("controller hidden size must be positive");
  if (num_nodes < 2) throw ConfigError("controller needs at least 2 nodes");
  if (!(temperature > 0.0)) throw ConfigError("controller temperature must be positive");
  if (!(tanh_constant > 0.0)) throw ConfigError("controller tanh constant must be positive");
  if (!(learning_rate > 0.0)) throw ConfigError("controller learning rate must be positive");
  if (!(entropy_weight >= 0.0)) throw ConfigError("entropy weight must be non-negative");
  if (!(baseline_decay > 0.0 && baseline_decay < 1.0)) throw ConfigError("baseline decay must be in (0, 1)");
  if (!(init_range > 0.0)) throw ConfigError("controller init range must be positive");
}

int decision_count(int num_nodes) { return 1 + 2 * (num_nodes - 1); }

std::vector<int> to_decisions(const cell::CellArchitecture& arch) {
  std::vector<int> d{cell::activation_index(arch.node0_op)};
  for (const auto& link : arch.links) {
    d.push_back(link.input);
    d.push_back(cell::activation_index(link.op));
  }
  return d;
}

cell::CellArchitecture from_decisions(const std::vector<int>& decisions, int num_nodes) {
  if (static_cast<int>(decisions.size()) != decision_count(num_nodes)) {
    throw DimensionError("expected " + std::to_string(decision_count(num_nodes)) + " decisions");
  }
  cell::CellArchitecture arch;
  arch.node0_op = cell::kActivations.at(decisions[0]);
  for (int l = 1; l < num_nodes; ++l) {
    arch.links.push_back({decisions[2 * l - 1], cell::kActivations.at(decisions[2 * l])});
  }
  arch.validate();
  return arch;
}

double SampleTrace::log_prob() const {
  double total = 0.0;
  for (double v : log_probs) total += v;
  return total;
}

namespace {

ad::Tensor uniform(ad::Shape shape, double range, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-range, range);
  std::vector<double> v(ad::num_elements(shape));
  for (double& x : v) x = u(rng);
  return ad::Tensor(std::move(shape), std::move(v), true);
}

bool is_input_decision(int d) { return d % 2 == 1; }

}  // namespace

ControllerPolicy::ControllerPolicy(ControllerConfig config, std::mt19937_64& rng)
    : config_((config.validate(), config)), lstm_(config.hidden, config.hidden, rng) {
  const int h = config_.hidden;
  const double r = config_.init_range;
  start_ = uniform({1, h}, r, rng);
  for (int d = 0; d + 1 < num_decisions(); ++d) embeddings_.push_back(uniform({vocabulary(d), h}, r, rng));
  w_op_ = uniform({h, cell::kNumActivations}, r, rng);
  b_op_ = ad::Tensor::zeros({cell::kNumActivations}, true);
  w_in_ = uniform({h, config_.num_nodes - 1}, r, rng);
  b_in_ = ad::Tensor::zeros({config_.num_nodes - 1}, true);
}

int ControllerPolicy::vocabulary(int d) const {
  return is_input_decision(d) ? config_.num_nodes - 1 : cell::kNumActivations;
}

int ControllerPolicy::valid_choices(int d) const { return is_input_decision(d) ? (d + 1) / 2 : cell::kNumActivations; }

template <typename Choose>
void ControllerPolicy::unroll(Choose&& choose) const {
  const int h = config_.hidden;
  ad::Tensor x = start_;
  ad::Tensor hs = ad::Tensor::zeros({1, h});
  ad::Tensor cs = ad::Tensor::zeros({1, h});
  for (int d = 0; d < num_decisions(); ++d) {
    auto state = models::lstm_step(lstm_, x, hs, cs);
    hs = state.h;
    cs = state.c;
    const bool input = is_input_decision(d);
    ad::Tensor logits = ad::add_bias(ad::matmul(hs, input ? w_in_ : w_op_), input ? b_in_ : b_op_);
    logits = ad::affine(ad::tanh(ad::affine(logits, 1.0 / config_.temperature, 0.0)), config_.tanh_constant, 0.0);
    const int k = vocabulary(d);
    std::vector<double> m(k, 0.0);
    for (int c = 0; c < valid_choices(d); ++c) m[c] = 1.0;
    ad::Tensor mask({1, k}, std::move(m));
    StepOutput out{ad::log_softmax(logits, 1, &mask), ad::softmax(logits, 1, &mask)};
    const int choice = choose(d, out);
    if (d + 1 < num_decisions()) {
      x = ad::slice_last(ad::reshape(embeddings_[d], {1, k * h}), choice * h, h);
    }
  }
}

std::pair<cell::CellArchitecture, SampleTrace> ControllerPolicy::sample(std::mt19937_64& rng) const {
  ad::NoGradGuard no_grad;
  SampleTrace trace;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  unroll([&](int d, const StepOutput& out) {
    const int valid = valid_choices(d);
    const double r = u(rng);
    double cum = 0.0;
    int choice = valid - 1;
    for (int c = 0; c < valid; ++c) {
      cum += out.probs[c];
      if (r < cum) {
        choice = c;
        break;
      }
    }
    double entropy = 0.0;
    for (int c = 0; c < valid; ++c) entropy -= out.probs[c] * out.log_probs[c];
    trace.decisions.push_back(choice);
    trace.log_probs.push_back(out.log_probs[choice]);
    trace.entropy += entropy;
    return choice;
  });
  return {from_decisions(trace.decisions, config_.num_nodes), std::move(trace)};
}

double ControllerPolicy::log_prob(const cell::CellArchitecture& arch) const {
  if (arch.num_nodes() != config_.num_nodes) throw DimensionError("architecture node count differs from the policy's");
  for (int l = 1; l < arch.num_nodes(); ++l) {
    const int in = arch.links[l - 1].input;
    if (in < 0 || in >= l) return -std::numeric_limits<double>::infinity();
  }
  ad::NoGradGuard no_grad;
  return trace_graph(to_decisions(arch)).log_prob.item();
}

TraceGraph ControllerPolicy::trace_graph(const std::vector<int>& decisions) const {
  if (static_cast<int>(decisions.size()) != num_decisions()) throw DimensionError("wrong number of decisions");
  TraceGraph g{ad::Tensor::zeros({1}), ad::Tensor::zeros({1})};
  unroll([&](int d, const StepOutput& out) {
    const int choice = decisions[d];
    if (choice < 0 || choice >= valid_choices(d)) throw ConfigError("decision out of range");
    g.log_prob = ad::add(g.log_prob, ad::reshape(ad::slice_last(out.log_probs, choice, 1), {1}));
    g.entropy = ad::sub(g.entropy, ad::sum(ad::mul(out.probs, out.log_probs)));
    return choice;
  });
  return g;
}

std::vector<std::vector<double>> ControllerPolicy::decision_probabilities(const std::vector<int>& decisions) const {
  if (static_cast<int>(decisions.size()) != num_decisions()) throw DimensionError("wrong number of decisions");
  ad::NoGradGuard no_grad;
  std::vector<std::vector<double>> out;
  unroll([&](int d, const StepOutput& step) {
    out.emplace_back(step.probs.data().begin(), step.probs.data().end());
    return decisions[d];
  });
  return out;
}

std::vector<ad::Tensor> ControllerPolicy::parameters() const {
  std::vector<ad::Tensor> out;
  for (const auto& nt : named_parameters()) out.push_back(nt.tensor);
  return out;
}

ad::NamedTensors ControllerPolicy::named_parameters() const {
  ad::NamedTensors out = lstm_.named_parameters("controller.lstm");
  out.push_back({"controller.start", start_});
  for (std::size_t d = 0; d < embeddings_.size(); ++d) {
    out.push_back({"controller.embedding." + std::to_string(d), embeddings_[d]});
  }
  out.push_back({"controller.op.w", w_op_});
  out.push_back({"controller.op.b", b_op_});
  out.push_back({"controller.input.w", w_in_});
  out.push_back({"controller.input.b", b_in_});
  return out;
}

ad::Adam make_controller_optimizer(const ControllerPolicy& policy) {
  ad::AdamConfig cfg;
  cfg.learning_rate = policy.config().learning_rate;
  cfg.clip_norm = std::numeric_limits<double>::infinity();
  return ad::Adam(policy.parameters(), cfg);
}

UpdateStats reinforce_update(const ControllerPolicy& policy, ad::Adam& optimizer,
                             const std::vector<SampleTrace>& traces, const std::vector<double>& rewards,
                             RewardBaseline& baseline, double entropy_weight) {
  if (traces.empty()) throw DimensionError("reinforce update needs at least one trace");
  if (traces.size() != rewards.size()) throw DimensionError("one reward per trace");
  const double n = static_cast<double>(traces.size());
  UpdateStats stats;
  stats.baseline_used = baseline.value;
  ad::Tensor loss = ad::Tensor::zeros({1});
  for (std::size_t i = 0; i < traces.size(); ++i) {
    TraceGraph g = policy.trace_graph(traces[i].decisions);
    loss = ad::add(loss, ad::affine(g.log_prob, -(rewards[i] - baseline.value) / n, 0.0));
    loss = ad::add(loss, ad::affine(g.entropy, -entropy_weight / n, 0.0));
    stats.mean_reward += rewards[i] / n;
    stats.mean_entropy += g.entropy.item() / n;
  }
  stats.loss = loss.item();
  optimizer.zero_grad();
  ad::backward(loss);
  stats.grad_norm = optimizer.step();
  baseline.update(stats.mean_reward);
  return stats;
}

std::vector<double> policy_gradient(const ControllerPolicy& policy, const std::vector<int>& decisions,
                                    double reward, double baseline) {
  auto params = policy.parameters();
  for (auto& p : params) p.zero_grad();
  ad::backward(ad::affine(policy.trace_graph(decisions).log_prob, -(reward - baseline), 0.0));
  std::vector<double> out;
  for (auto& p : params) {
    if (p.has_grad()) {
      out.insert(out.end(), p.grad().begin(), p.grad().end());
    } else {
      out.insert(out.end(), p.size(), 0.0);
    }
    p.zero_grad();
  }
  return out;
}

BanditResult run_bandit(const cell::CellArchitecture& target, const ControllerConfig& config,
                        const BanditOptions& options, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ControllerPolicy policy(config, rng);
  ad::Adam optimizer = make_controller_optimizer(policy);
  RewardBaseline baseline{0.0, config.baseline_decay};
  BanditResult result;
  for (int step = 0; step < options.max_updates; ++step) {
    std::vector<SampleTrace> traces;
    std::vector<double> rewards;
    for (int i = 0; i < options.samples_per_update; ++i) {
      auto [arch, trace] = policy.sample(rng);
      rewards.push_back(arch == target ? 1.0 : 0.0);
      traces.push_back(std::move(trace));
    }
    reinforce_update(policy, optimizer, traces, rewards, baseline, config.entropy_weight);
    result.updates = step + 1;
    result.final_probability = std::exp(policy.log_prob(target));
    if (result.final_probability > options.target_probability) {
      result.reached = true;
      break;
    }
  }
  return result;
}

void save_controller(const std::filesystem::path& path, const ControllerPolicy& policy, const ad::Adam& optimizer,
                     const RewardBaseline& baseline) {
  ad::Checkpoint ckpt;
  const auto& c = policy.config();
  ckpt.meta["kind"] = "controller";
  ckpt.meta["hidden"] = std::to_string(c.hidden);
  ckpt.meta["num_nodes"] = std::to_string(c.num_nodes);
  ckpt.tensors = policy.named_parameters();
  for (auto& nt : optimizer.state("adam")) ckpt.tensors.push_back(nt);
  ckpt.tensors.push_back({"baseline", ad::Tensor({2}, {baseline.value, baseline.decay})});
  ad::save_checkpoint(path, ckpt);
}

void load_controller(const std::filesystem::path& path, ControllerPolicy& policy, ad::Adam& optimizer,
                     RewardBaseline& baseline) {
  ad::Checkpoint ckpt = ad::load_checkpoint(path);
  const auto& c = policy.config();
  auto meta = [&](const char* key) {
    auto it = ckpt.meta.find(key);
    if (it == ckpt.meta.end()) throw ParseError(std::string("controller checkpoint lacks ") + key);
    return it->second;
  };
  if (meta("kind") != "controller") throw ConfigError("not a controller checkpoint");
  if (meta("hidden") != std::to_string(c.hidden) || meta("num_nodes") != std::to_string(c.num_nodes)) {
    throw ConfigError("controller checkpoint was saved with a different shape");
  }
  ad::restore_values(policy.named_parameters(), ckpt);
  optimizer.load_state(ckpt.tensors, "adam");
  const ad::Tensor* b = ckpt.find("baseline");
  if (!b || b->size() != 2) throw ParseError("controller checkpoint lacks the baseline");
  baseline.value = (*b)[0];
  baseline.decay = (*b)[1];
}

}  // namespace pairnas::controller
