#include "pairnas/nas/search.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "json.hpp"

#include "pairnas/ad/checkpoint.hpp"
#include "pairnas/data/batch.hpp"
#include "pairnas/error.hpp"

namespace pairnas::nas {

using nlohmann::json;

namespace {

std::mt19937_64 stream(std::uint64_t seed, std::uint32_t tag) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), tag};
  return std::mt19937_64(seq);
}

std::string rng_text(const std::mt19937_64& rng) {
  std::ostringstream out;
  out << rng;
  return out.str();
}

void rng_from_text(std::mt19937_64& rng, const std::string& text) {
  std::istringstream in(text);
  in >> rng;
  if (!in) throw ParseError("corrupt RNG state in search state");
}

void write_atomic(const std::filesystem::path& path, const std::string& text) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw ConfigError("cannot write " + tmp.string());
    out << text;
    if (!out) throw ConfigError("cannot write " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json controller_json(const controller::ControllerConfig& c) {
  return {{"hidden", c.hidden},
          {"num_nodes", c.num_nodes},
          {"temperature", c.temperature},
          {"tanh_constant", c.tanh_constant},
          {"learning_rate", c.learning_rate},
          {"entropy_weight", c.entropy_weight},
          {"baseline_decay", c.baseline_decay},
          {"init_range", c.init_range}};
}

controller::ControllerConfig controller_from_json(const json& j) {
  controller::ControllerConfig c;
  c.hidden = j.value("hidden", c.hidden);
  c.num_nodes = j.value("num_nodes", c.num_nodes);
  c.temperature = j.value("temperature", c.temperature);
  c.tanh_constant = j.value("tanh_constant", c.tanh_constant);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.entropy_weight = j.value("entropy_weight", c.entropy_weight);
  c.baseline_decay = j.value("baseline_decay", c.baseline_decay);
  c.init_range = j.value("init_range", c.init_range);
  return c;
}

models::SentencePairModel init_model(const SearchConfig& config, const models::ModelSpec& spec) {
  auto rng = stream(config.seed, 3);
  return models::SentencePairModel(search_spec(spec), rng);
}

controller::ControllerPolicy init_policy(const SearchConfig& config, const models::ModelSpec& spec) {
  if (config.controller.num_nodes != spec.num_nodes) {
    throw ConfigError("controller and model disagree on the number of cell nodes");
  }
  auto rng = stream(config.seed, 4);
  return controller::ControllerPolicy(config.controller, rng);
}

std::vector<ad::Tensor> tensors_of(const ad::NamedTensors& named) {
  std::vector<ad::Tensor> out;
  for (const auto& nt : named) out.push_back(nt.tensor);
  return out;
}

}  // namespace

void SearchConfig::validate() const {
  if (max_epochs < 1) throw ConfigError("max_epochs must be at least 1");
  if (patience < 1) throw ConfigError("patience must be at least 1");
  if (batch_size < 1 || eval_batch_size < 1) throw ConfigError("batch sizes must be positive");
  if (!(child_learning_rate > 0.0)) throw ConfigError("child learning rate must be positive");
  if (!(child_grad_norm > 0.0)) throw ConfigError("child grad norm must be positive");
  if (!(child_weight_decay >= 0.0)) throw ConfigError("child weight decay must be non-negative");
  if (controller_steps < 1 || samples_per_step < 1) throw ConfigError("controller steps and samples must be positive");
  if (derive_count < 1) throw ConfigError("derive count must be at least 1");
  if (derive_attempts_per_architecture < 1) throw ConfigError("derive attempts must be positive");
  if (!(reward_ema_decay >= 0.0 && reward_ema_decay < 1.0)) throw ConfigError("reward EMA decay must be in [0, 1)");
  controller.validate();
}

std::string to_json(const SearchConfig& c) {
  json j = {{"max_epochs", c.max_epochs},
            {"patience", c.patience},
            {"batch_size", c.batch_size},
            {"eval_batch_size", c.eval_batch_size},
            {"child_learning_rate", c.child_learning_rate},
            {"child_grad_norm", c.child_grad_norm},
            {"child_weight_decay", c.child_weight_decay},
            {"loss", ad::loss_name(c.loss)},
            {"controller_steps", c.controller_steps},
            {"samples_per_step", c.samples_per_step},
            {"derive_count", c.derive_count},
            {"derive_attempts_per_architecture", c.derive_attempts_per_architecture},
            {"reward_ema_decay", c.reward_ema_decay},
            {"controller", controller_json(c.controller)},
            {"seed", c.seed}};
  return j.dump(2);
}

SearchConfig search_config_from_json(std::string_view text) {
  try {
    json j = json::parse(text);
    SearchConfig c;
    c.max_epochs = j.value("max_epochs", c.max_epochs);
    c.patience = j.value("patience", c.patience);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.eval_batch_size = j.value("eval_batch_size", c.eval_batch_size);
    c.child_learning_rate = j.value("child_learning_rate", c.child_learning_rate);
    c.child_grad_norm = j.value("child_grad_norm", c.child_grad_norm);
    c.child_weight_decay = j.value("child_weight_decay", c.child_weight_decay);
    if (j.contains("loss")) c.loss = ad::parse_loss(j.at("loss").get<std::string>());
    c.controller_steps = j.value("controller_steps", c.controller_steps);
    c.samples_per_step = j.value("samples_per_step", c.samples_per_step);
    c.derive_count = j.value("derive_count", c.derive_count);
    c.derive_attempts_per_architecture =
        j.value("derive_attempts_per_architecture", c.derive_attempts_per_architecture);
    c.reward_ema_decay = j.value("reward_ema_decay", c.reward_ema_decay);
    if (j.contains("controller")) c.controller = controller_from_json(j.at("controller"));
    c.seed = j.value("seed", c.seed);
    c.validate();
    return c;
  } catch (const json::exception& e) {
    throw ParseError(std::string("search config: ") + e.what());
  }
}

std::string to_json(const EpochRecord& r) {
  json j = {{"epoch", r.epoch},
            {"train_loss", r.train_loss},
            {"mean_reward", r.mean_reward},
            {"reward_ema", r.reward_ema},
            {"best_reward", r.best_reward},
            {"baseline", r.baseline},
            {"mean_entropy", r.mean_entropy}};
  return j.dump();
}

EpochRecord epoch_record_from_json(std::string_view line) {
  try {
    json j = json::parse(line);
    EpochRecord r;
    r.epoch = j.at("epoch").get<int>();
    r.train_loss = j.at("train_loss").get<double>();
    r.mean_reward = j.at("mean_reward").get<double>();
    r.reward_ema = j.at("reward_ema").get<double>();
    r.best_reward = j.at("best_reward").get<double>();
    r.baseline = j.at("baseline").get<double>();
    r.mean_entropy = j.at("mean_entropy").get<double>();
    return r;
  } catch (const json::exception& e) {
    throw ParseError(std::string("epoch record: ") + e.what());
  }
}

models::ModelSpec search_spec(models::ModelSpec spec) {
  for (auto& layer : spec.layers) {
    layer.cell = models::CellKind::Enas;
    layer.arch.reset();
  }
  spec.validate();
  return spec;
}

SearchState::SearchState(const SearchConfig& config, const models::ModelSpec& spec)
    : model(init_model(config, spec)),
      policy(init_policy(config, spec)),
      child_optimizer(tensors_of(model.named_parameters()),
                      {.learning_rate = config.child_learning_rate,
                       .weight_decay = config.child_weight_decay,
                       .clip_norm = config.child_grad_norm}),
      controller_optimizer(controller::make_controller_optimizer(policy)),
      baseline{0.0, config.controller.baseline_decay},
      child_rng(stream(config.seed, 1)),
      controller_rng(stream(config.seed, 2)) {
  config.validate();
}

double SearchState::best_reward() const {
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& r : history) best = std::max(best, r.mean_reward);
  return best;
}

double train_shared_epoch(SearchState& state, const data::EmbeddingProvider& provider,
                          const data::SentencePairDataset& train, const SearchConfig& config,
                          const ArchitectureSource& source) {
  if (train.empty()) throw DimensionError("empty training set");
  models::ForwardOptions fwd;
  fwd.training = true;
  fwd.rng = &state.child_rng;
  double loss_sum = 0.0;
  int index = 0;
  for (const auto& idx : data::minibatches(train.size(), config.batch_size, &state.child_rng)) {
    const cell::CellArchitecture arch =
        source ? source(state.controller_rng) : state.policy.sample(state.controller_rng).first;
    fwd.arch_override = &arch;
    auto where = [&] {
      return "epoch " + std::to_string(state.epoch + 1) + ", minibatch " + std::to_string(index) +
             ", architecture '" + cell::serialize(arch) + "'";
    };
    try {
      auto batch = data::make_batch(provider, train, idx);
      ad::Tensor loss = state.model.loss(state.model.forward(batch, fwd), batch, config.loss);
      if (!std::isfinite(loss.item())) throw NumericError("non-finite loss");
      loss_sum += loss.item() * static_cast<double>(idx.size());
      ad::backward(loss);
      state.child_optimizer.step();
    } catch (const NumericError& e) {
      state.child_optimizer.zero_grad();
      throw NumericError(std::string(e.what()) + " at " + where());
    }
    ++index;
  }
  return loss_sum / static_cast<double>(train.size());
}

void validate_reward(data::TaskKind task, double reward) {
  if (!std::isfinite(reward)) throw NumericError("non-finite reward");
  if (task == data::TaskKind::Regression && !(reward >= -1.0 && reward <= 1.0)) {
    throw NumericError("Pearson reward outside [-1, 1]: " + std::to_string(reward));
  }
}

double architecture_reward(const models::SentencePairModel& model, const data::EmbeddingProvider& provider,
                           const data::SentencePairDataset& dev, const cell::CellArchitecture& arch,
                           int batch_size) {
  const auto metrics = models::evaluate(model, provider, dev, batch_size, &arch).metrics;
  validate_reward(metrics.task, metrics.primary());
  return metrics.primary();
}

PhaseStats controller_phase(SearchState& state, const data::EmbeddingProvider& provider,
                            const data::SentencePairDataset& dev, const SearchConfig& config) {
  return controller_phase(state, config, [&](const cell::CellArchitecture& arch) {
    return architecture_reward(state.model, provider, dev, arch, config.eval_batch_size);
  });
}

PhaseStats controller_phase(SearchState& state, const SearchConfig& config, const RewardFunction& reward) {
  PhaseStats stats;
  double entropy_sum = 0.0;
  for (int step = 0; step < config.controller_steps; ++step) {
    std::vector<controller::SampleTrace> traces;
    std::vector<double> rewards;
    for (int s = 0; s < config.samples_per_step; ++s) {
      auto [arch, trace] = state.policy.sample(state.controller_rng);
      rewards.push_back(reward(arch));
      entropy_sum += trace.entropy;
      traces.push_back(std::move(trace));
    }
    controller::reinforce_update(state.policy, state.controller_optimizer, traces, rewards, state.baseline,
                                 config.controller.entropy_weight);
    stats.rewards.insert(stats.rewards.end(), rewards.begin(), rewards.end());
  }
  double sum = 0.0;
  for (double r : stats.rewards) sum += r;
  const double n = static_cast<double>(stats.rewards.size());
  stats.mean_reward = sum / n;
  stats.mean_entropy = entropy_sum / n;
  return stats;
}

Derived derive(const controller::ControllerPolicy& policy, int count, int max_attempts, std::mt19937_64& rng) {
  if (count < 1) throw ConfigError("derive count must be at least 1");
  Derived out;
  std::set<cell::CellArchitecture> seen;
  for (int attempt = 0; attempt < max_attempts && static_cast<int>(out.architectures.size()) < count; ++attempt) {
    auto arch = policy.sample(rng).first;
    if (seen.insert(arch).second) out.architectures.push_back(std::move(arch));
  }
  out.complete = static_cast<int>(out.architectures.size()) == count;
  return out;
}

namespace {

struct RunFiles {
  std::filesystem::path dir;
  std::filesystem::path config() const { return dir / "config.json"; }
  std::filesystem::path metrics() const { return dir / "metrics.jsonl"; }
  std::filesystem::path state() const { return dir / "state.json"; }
  std::filesystem::path shared() const { return dir / "shared.ckpt"; }
  std::filesystem::path controller() const { return dir / "controller.ckpt"; }
  std::filesystem::path derived() const { return dir / "derived.arch"; }
  std::filesystem::path summary() const { return dir / "summary.json"; }
};

json snapshot(const SearchConfig& config, const models::ModelSpec& spec) {
  return {{"search", json::parse(to_json(config))}, {"model", json::parse(models::to_json(spec))}};
}

void save_progress(const RunFiles& files, const SearchState& state, bool finished) {
  ad::Checkpoint shared;
  shared.meta["kind"] = "search-shared";
  shared.meta["epoch"] = std::to_string(state.epoch);
  shared.tensors = state.model.named_parameters();
  for (auto& nt : state.child_optimizer.state("adam")) shared.tensors.push_back(nt);
  auto shared_tmp = files.shared();
  shared_tmp += ".tmp";
  ad::save_checkpoint(shared_tmp, shared);
  auto controller_tmp = files.controller();
  controller_tmp += ".tmp";
  controller::save_controller(controller_tmp, state.policy, state.controller_optimizer, state.baseline);

  std::string metrics;
  for (const auto& r : state.history) metrics += to_json(r) + "\n";
  write_atomic(files.metrics(), metrics);
  std::filesystem::rename(shared_tmp, files.shared());
  std::filesystem::rename(controller_tmp, files.controller());
  json j = {{"epoch", state.epoch},
            {"best_epoch", state.best_epoch},
            {"finished", finished},
            {"seconds", state.seconds},
            {"child_rng", rng_text(state.child_rng)},
            {"controller_rng", rng_text(state.controller_rng)}};
  write_atomic(files.state(), j.dump(2));
}

// Returns whether the saved run had already finished.
bool load_progress(const RunFiles& files, SearchState& state) {
  json j;
  try {
    j = json::parse(read_text(files.state()));
  } catch (const json::exception& e) {
    throw ParseError(files.state().string() + ": " + e.what());
  }
  state.epoch = j.at("epoch").get<int>();
  state.best_epoch = j.at("best_epoch").get<int>();
  state.seconds = j.value("seconds", 0.0);
  rng_from_text(state.child_rng, j.at("child_rng").get<std::string>());
  rng_from_text(state.controller_rng, j.at("controller_rng").get<std::string>());

  ad::Checkpoint shared = ad::load_checkpoint(files.shared());
  if (shared.meta["kind"] != "search-shared" || shared.meta["epoch"] != std::to_string(state.epoch)) {
    throw ConfigError(files.shared().string() + " does not match the saved search state");
  }
  ad::restore_values(state.model.named_parameters(), shared);
  state.child_optimizer.load_state(shared.tensors, "adam");
  controller::load_controller(files.controller(), state.policy, state.controller_optimizer, state.baseline);

  state.history.clear();
  std::ifstream in(files.metrics());
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      state.history.push_back(epoch_record_from_json(line));
    } catch (const ParseError& e) {
      throw ParseError(files.metrics().string() + ": " + e.what(), line_no);
    }
  }
  if (static_cast<int>(state.history.size()) != state.epoch) {
    throw ConfigError(files.metrics().string() + " does not match the saved search state");
  }
  return j.at("finished").get<bool>();
}

}  // namespace

SearchResult run_search(const SearchConfig& config, const models::ModelSpec& spec,
                        const data::EmbeddingProvider& provider, const data::SentencePairDataset& train,
                        const data::SentencePairDataset& dev, const std::filesystem::path& run_dir,
                        const EpochCallback& on_epoch) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  SearchState state(config, spec);
  models::center_regression_output(state.model, train);
  const RunFiles files{run_dir};
  const bool persist = !run_dir.empty();
  bool finished = false;

  if (persist) {
    std::filesystem::create_directories(run_dir);
    const json snap = snapshot(config, spec);
    if (std::filesystem::exists(files.config())) {
      json existing;
      try {
        existing = json::parse(read_text(files.config()));
      } catch (const json::exception& e) {
        throw ParseError(files.config().string() + ": " + e.what());
      }
      if (existing != snap) throw ConfigError(run_dir.string() + " holds a search with a different configuration");
      if (std::filesystem::exists(files.state())) finished = load_progress(files, state);
    } else {
      write_atomic(files.config(), snap.dump(2));
    }
  }

  const double prior_seconds = state.seconds;
  auto elapsed = [&] {
    return prior_seconds + std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  };
  SearchResult result;
  while (!finished && state.epoch < config.max_epochs) {
    EpochRecord rec;
    rec.epoch = state.epoch + 1;
    rec.train_loss = train_shared_epoch(state, provider, train, config);
    const PhaseStats phase = controller_phase(state, provider, dev, config);
    rec.mean_reward = phase.mean_reward;
    rec.mean_entropy = phase.mean_entropy;
    rec.reward_ema = state.history.empty() ? phase.mean_reward
                                           : config.reward_ema_decay * state.history.back().reward_ema +
                                                 (1.0 - config.reward_ema_decay) * phase.mean_reward;
    if (state.history.empty() || phase.mean_reward > state.best_reward()) state.best_epoch = rec.epoch;
    rec.best_reward = std::max(state.best_reward(), phase.mean_reward);
    rec.baseline = state.baseline.value;
    state.history.push_back(rec);
    state.epoch = rec.epoch;
    finished = state.epoch - state.best_epoch >= config.patience || state.epoch >= config.max_epochs;
    state.seconds = elapsed();
    if (persist) save_progress(files, state, finished);
    if (on_epoch && !on_epoch(rec) && !finished) {
      result.paused = true;
      break;
    }
  }

  result.history = state.history;
  result.best_epoch = state.best_epoch;
  result.seconds = state.seconds;
  result.stopped_early = finished && state.epoch < config.max_epochs;
  if (result.paused) return result;
  // Sampling from a copy keeps derivation a pure function of the saved state.
  std::mt19937_64 derive_rng = state.controller_rng;
  const Derived derived =
      derive(state.policy, config.derive_count, config.derive_count * config.derive_attempts_per_architecture,
             derive_rng);
  result.derived = derived.architectures;
  result.derived_complete = derived.complete;

  if (persist) {
    cell::write_architecture_file(files.derived(), result.derived);
    json summary = {{"epochs", state.epoch},
                    {"best_epoch", state.best_epoch},
                    {"best_reward", state.best_reward()},
                    {"stopped_early", result.stopped_early},
                    {"derived", result.derived.size()},
                    {"derived_complete", result.derived_complete},
                    {"seconds", state.seconds}};
    write_atomic(files.summary(), summary.dump(2));
  }
  return result;
}

}  // namespace pairnas::nas
