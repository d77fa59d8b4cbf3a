#include "pairnas/experiment/config.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

#include "pairnas/error.hpp"

namespace pairnas::experiment {

using nlohmann::json;

namespace {

bool is_synthetic(const DatasetConfig& d) { return d.name.rfind("synthetic-", 0) == 0; }

double dev_fraction(const DatasetConfig& d) { return d.dev_fraction.value_or(is_synthetic(d) ? 0.2 : 0.1); }

void require_file(const std::string& path, const std::string& what) {
  if (path.empty()) return;
  if (!std::filesystem::is_regular_file(path)) throw ConfigError(what + " file not found: " + path);
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

void ExperimentConfig::validate() const {
  const auto prof = profile();
  (void)model_kind();
  if (is_synthetic(dataset)) {
    if (!dataset.train.empty()) throw ConfigError("synthetic datasets take no train file");
    if (dataset.synthetic_size < 16) throw ConfigError("synthetic_size must be at least 16");
  } else {
    if (dataset.train.empty()) throw ConfigError("dataset '" + prof.name + "' needs a train file");
    require_file(dataset.train, "train");
    require_file(dataset.dev, "dev");
    require_file(dataset.test, "test");
  }
  const double dev = dev_fraction(dataset);
  if (!(dev > 0.0 && dev < 1.0)) throw ConfigError("dev_fraction must be in (0, 1)");
  if (!(dataset.test_fraction > 0.0 && dataset.test_fraction < 1.0)) {
    throw ConfigError("test_fraction must be in (0, 1)");
  }
  if (embedding.kind != "toy-hash") {
    if (embedding.path.empty()) throw ConfigError("embedding kind '" + embedding.kind + "' needs a path");
    require_file(embedding.path, "embedding");
  }
  if (embedding.dim < 1) throw ConfigError("embedding dim must be positive");
  const auto& b = budget;
  if (b.baseline_trials < 1 || b.derived_trials < 1) throw ConfigError("trial budgets must be positive");
  if (b.concurrency < 1) throw ConfigError("concurrency must be positive");
  if (b.search_epochs < 1 || b.search_patience < 1) throw ConfigError("search budgets must be positive");
  if (b.train_epochs < 1 || b.patience < 1) throw ConfigError("training budgets must be positive");
  if (b.derive_count < 1) throw ConfigError("derive_count must be positive");
  if (b.sampler != "tpe" && b.sampler != "random") throw ConfigError("sampler must be 'tpe' or 'random'");
  if (output.empty()) throw ConfigError("output directory must be set");
}

std::string to_json(const ExperimentConfig& c) {
  json dataset = {{"name", c.dataset.name},
                  {"train", c.dataset.train},
                  {"dev", c.dataset.dev},
                  {"test", c.dataset.test},
                  {"header", c.dataset.header},
                  {"dev_fraction", dev_fraction(c.dataset)},
                  {"test_fraction", c.dataset.test_fraction},
                  {"split_seed", c.dataset.split_seed},
                  {"synthetic_size", c.dataset.synthetic_size},
                  {"synthetic_seed", c.dataset.synthetic_seed}};
  json embedding = {{"kind", c.embedding.kind},
                    {"name", c.embedding.name},
                    {"path", c.embedding.path},
                    {"dim", c.embedding.dim},
                    {"seed", c.embedding.seed}};
  json budget = {{"baseline_trials", c.budget.baseline_trials},
                 {"derived_trials", c.budget.derived_trials},
                 {"concurrency", c.budget.concurrency},
                 {"sampler", c.budget.sampler},
                 {"search_epochs", c.budget.search_epochs},
                 {"search_patience", c.budget.search_patience},
                 {"train_epochs", c.budget.train_epochs},
                 {"patience", c.budget.patience},
                 {"derive_count", c.budget.derive_count}};
  json j = {{"dataset", dataset}, {"embedding", embedding}, {"model", c.model},   {"budget", budget},
            {"seed", c.seed},     {"output", c.output},       {"memory_cap", c.memory_cap}};
  if (!c.search_overrides.empty()) j["search_overrides"] = json::parse(hpt::to_json(c.search_overrides));
  return j.dump(2);
}

ExperimentConfig config_from_json(std::string_view text) {
  ExperimentConfig c;
  try {
    json j = json::parse(text);
    if (j.contains("dataset")) {
      const json& d = j.at("dataset");
      read(d, "name", c.dataset.name);
      read(d, "train", c.dataset.train);
      read(d, "dev", c.dataset.dev);
      read(d, "test", c.dataset.test);
      read(d, "header", c.dataset.header);
      if (d.contains("dev_fraction")) c.dataset.dev_fraction = d.at("dev_fraction").get<double>();
      read(d, "test_fraction", c.dataset.test_fraction);
      read(d, "split_seed", c.dataset.split_seed);
      read(d, "synthetic_size", c.dataset.synthetic_size);
      read(d, "synthetic_seed", c.dataset.synthetic_seed);
    }
    if (j.contains("embedding")) {
      const json& e = j.at("embedding");
      read(e, "kind", c.embedding.kind);
      read(e, "name", c.embedding.name);
      read(e, "path", c.embedding.path);
      read(e, "dim", c.embedding.dim);
      read(e, "seed", c.embedding.seed);
    }
    read(j, "model", c.model);
    if (j.contains("budget")) {
      const json& b = j.at("budget");
      read(b, "baseline_trials", c.budget.baseline_trials);
      read(b, "derived_trials", c.budget.derived_trials);
      read(b, "concurrency", c.budget.concurrency);
      read(b, "sampler", c.budget.sampler);
      read(b, "search_epochs", c.budget.search_epochs);
      read(b, "search_patience", c.budget.search_patience);
      read(b, "train_epochs", c.budget.train_epochs);
      read(b, "patience", c.budget.patience);
      read(b, "derive_count", c.budget.derive_count);
    }
    read(j, "seed", c.seed);
    read(j, "output", c.output);
    read(j, "memory_cap", c.memory_cap);
    if (j.contains("search_overrides")) c.search_overrides = hpt::assignment_from_json(j.at("search_overrides").dump());
  } catch (const json::exception& e) {
    throw ParseError(std::string("experiment config: ") + e.what());
  }
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return config_from_json(ss.str());
}

void apply_preset(ExperimentConfig& config, std::string_view preset) {
  if (preset == "desk") return;
  if (preset == "full") {
    config.budget.baseline_trials = 500;
    config.budget.derived_trials = 200;
    config.budget.search_epochs = 150;
    config.budget.train_epochs = 75;
    return;
  }
  throw ConfigError("unknown preset '" + std::string(preset) + "'");
}

Splits load_splits(const ExperimentConfig& config) {
  const auto& d = config.dataset;
  const auto prof = config.profile();
  data::SentencePairDataset pool;
  if (is_synthetic(d)) {
    pool = data::make_synthetic(prof.task, d.synthetic_size, d.synthetic_seed,
                                data::SyntheticOptions{.range = prof.range});
    pool.name = prof.name;
  } else {
    pool = data::load_tsv(d.train, prof, {.header = d.header});
  }
  Splits s;
  if (!d.test.empty()) {
    s.test = data::load_tsv(d.test, prof, {.header = d.header});
  } else {
    std::tie(pool, s.test) = data::split(pool, d.test_fraction, d.split_seed);
  }
  if (!d.dev.empty()) {
    s.dev = data::load_tsv(d.dev, prof, {.header = d.header});
    s.train = std::move(pool);
  } else {
    std::tie(s.train, s.dev) = data::split(pool, dev_fraction(d), d.split_seed + 1);
  }
  return s;
}

std::unique_ptr<data::EmbeddingProvider> load_provider(const EmbeddingConfig& config) {
  auto p = data::make_provider(config.kind, config.path, config.dim, config.seed);
  if (p->dim() != config.dim) {
    throw ConfigError("embedding file has dimension " + std::to_string(p->dim()) + ", config says " +
                      std::to_string(config.dim));
  }
  return p;
}

}  // namespace pairnas::experiment
