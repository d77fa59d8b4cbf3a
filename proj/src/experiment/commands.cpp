#include "pairnas/experiment/commands.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

#include "pairnas/error.hpp"
#include "pairnas/models/model.hpp"

namespace pairnas::experiment {

using models::CellKind;
using nlohmann::json;

namespace {

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw ConfigError("cannot write " + tmp.string());
    out << text;
  }
  std::filesystem::rename(tmp, path);
}

json parse_file(const std::filesystem::path& path) {
  try {
    return json::parse(read_text(path));
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

json metrics_json(const data::MetricReport& m) {
  return {{"task", data::task_name(m.task)},
          {"primary", m.primary()},
          {"pearson", m.pearson},
          {"pearson_defined", m.pearson_defined},
          {"accuracy", m.accuracy},
          {"f1", m.f1}};
}

data::MetricReport metrics_from(const json& j) {
  data::MetricReport m;
  m.task = data::parse_task(j.at("task").get<std::string>());
  m.pearson = j.at("pearson").get<double>();
  m.pearson_defined = j.at("pearson_defined").get<bool>();
  m.accuracy = j.at("accuracy").get<double>();
  m.f1 = j.at("f1").get<double>();
  return m;
}

// Writes the snapshot, or checks an existing one matches.
void claim_run_dir(const std::filesystem::path& dir, const json& snapshot) {
  std::filesystem::create_directories(dir);
  const auto path = dir / "config.json";
  if (std::filesystem::exists(path)) {
    if (parse_file(path) != snapshot) {
      throw ConfigError(dir.string() + " already holds a run with a different configuration");
    }
    return;
  }
  write_text(path, snapshot.dump(2));
}

std::vector<std::string> serialized(const std::vector<cell::CellArchitecture>& archs) {
  std::vector<std::string> out;
  for (const auto& a : archs) out.push_back(cell::serialize(a));
  return out;
}

bool has_cell_layer(const std::vector<CellKind>& plan) {
  return std::any_of(plan.begin(), plan.end(), [](CellKind c) { return c != CellKind::Lstm; });
}

}  // namespace

std::filesystem::path run_directory(const ExperimentConfig& config, const std::string& tag) {
  return std::filesystem::path(config.output) /
         (config.dataset.name + "." + config.embedding.name + "." + std::string(models::model_name(config.model_kind())) +
          "." + tag);
}

std::string plan_tag(const std::vector<CellKind>& plan) {
  std::string out;
  for (std::size_t i = 0; i < plan.size(); ++i) {
    if (i) out += "-";
    out += models::cell_notation(plan[i]);
  }
  return out;
}

hpt::SearchSpace tuning_space(const ExperimentConfig& config, const std::vector<cell::CellArchitecture>& architectures) {
  hpt::Table3Options o;
  o.task = config.profile().task;
  o.hidden_dims = hpt::hidden_dims_for(config.embedding.name, config.memory_cap);
  o.architectures = serialized(architectures);
  o.restrict_batch = config.memory_cap;
  return hpt::table3_space(o);
}

models::ModelSpec trial_spec(const ExperimentConfig& config, const std::vector<CellKind>& plan,
                             const hpt::Assignment& params, int input_dim) {
  const auto profile = config.profile();
  models::ModelSpec spec;
  spec.kind = config.model_kind();
  spec.task = profile.task;
  spec.range = profile.range;
  spec.input_dim = input_dim;
  spec.dropout_1 = hpt::number(params, "dropout_1");
  spec.dropout_2 = hpt::number(params, "dropout_2");
  std::optional<cell::CellArchitecture> arch;
  if (has_cell_layer(plan)) {
    arch = cell::parse_architecture(hpt::choice(params, "architecture"), spec.num_nodes);
  }
  for (CellKind kind : plan) {
    models::LayerSpec layer;
    layer.cell = kind;
    layer.hidden = hpt::integer_choice(params, "hidden_dim");
    layer.variational_dropout = hpt::number(params, "variational_dropout");
    if (kind != CellKind::Lstm) layer.arch = arch;
    spec.layers.push_back(layer);
  }
  spec.validate();
  return spec;
}

std::uint64_t trial_model_seed(const ExperimentConfig& config, const hpt::Assignment& params) {
  std::seed_seq seq{static_cast<std::uint32_t>(config.seed), static_cast<std::uint32_t>(config.seed >> 32),
                    static_cast<std::uint32_t>(hpt::integer_choice(params, "seed"))};
  std::uint32_t words[2];
  seq.generate(words, words + 2);
  return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

nas::TrainConfig trial_train_config(const ExperimentConfig& config, const hpt::Assignment& params) {
  nas::TrainConfig t;
  t.max_epochs = config.budget.train_epochs;
  t.patience = config.budget.patience;
  t.batch_size = hpt::integer_choice(params, "batch_size");
  t.learning_rate = hpt::number(params, "learning_rate");
  t.weight_decay = hpt::number(params, "weight_decay");
  t.grad_norm = hpt::number(params, "grad_norm");
  t.loss = ad::parse_loss(hpt::choice(params, "loss"));
  t.seed = trial_model_seed(config, params) ^ 0x5eedULL;
  t.validate();
  return t;
}

nas::TrainResult run_trial(const ExperimentConfig& config, const Splits& splits,
                           const data::EmbeddingProvider& shared_provider, const std::vector<CellKind>& plan,
                           const hpt::Assignment& params, bool with_test, const std::filesystem::path& artifact_dir) {
  std::unique_ptr<data::EmbeddingProvider> own;
  const data::EmbeddingProvider* provider = &shared_provider;
  if (!shared_provider.parameters().empty()) {
    own = load_provider(config.embedding);
    provider = own.get();
  }
  const models::ModelSpec spec = trial_spec(config, plan, params, provider->dim());
  std::mt19937_64 init(trial_model_seed(config, params));
  models::SentencePairModel model(spec, init);
  models::center_regression_output(model, splits.train);
  const auto tcfg = trial_train_config(config, params);
  auto result = nas::train_fixed(model, *provider, splits.train, splits.dev, with_test ? &splits.test : nullptr, tcfg,
                                 provider->parameters());
  if (!artifact_dir.empty() && !result.diverged) {
    models::save_model(artifact_dir / "model.ckpt", model);
    if (with_test) {
      const auto eval = models::evaluate(model, *provider, splits.test, tcfg.eval_batch_size);
      models::write_predictions(artifact_dir / "test_predictions.tsv", splits.test, eval.predictions);
    }
  }
  return result;
}

StudyOutcome run_tuning(const ExperimentConfig& config, const StudyRequest& request, std::ostream& log) {
  config.validate();
  if (request.trials < 1) throw ConfigError("a study needs at least one trial");
  if (has_cell_layer(request.plan) && request.architectures.empty()) {
    throw ConfigError("plan " + models::layer_plan_notation(request.plan) + " needs candidate architectures");
  }
  json snapshot = {{"command", request.command},
                   {"plan", models::layer_plan_notation(request.plan)},
                   {"experiment", json::parse(to_json(config))},
                   {"architectures", serialized(request.architectures)},
                   {"source_dataset", request.source_dataset},
                   {"trials", request.trials}};
  claim_run_dir(request.run_dir, snapshot);

  const hpt::SearchSpace space = tuning_space(config, request.architectures);
  hpt::save_space(request.run_dir / "space.json", space);
  const Splits splits = load_splits(config);
  const auto provider = load_provider(config.embedding);

  log << request.command << ": " << models::layer_plan_notation(request.plan) << " on " << config.dataset.name
      << ", " << request.trials << " trials -> " << request.run_dir.string() << "\n";

  hpt::StudyOptions options;
  options.n_trials = request.trials;
  options.concurrency = config.budget.concurrency;
  options.mode = hpt::parse_mode(config.budget.sampler);
  options.seed = config.seed;
  options.log_path = request.run_dir / "study.jsonl";
  auto objective = [&](const hpt::Assignment& params, const hpt::TrialContext&) {
    auto r = run_trial(config, splits, *provider, request.plan, params, false);
    if (r.diverged) throw NumericError(r.reason);
    return r.dev.primary();
  };

  StudyOutcome out;
  out.run_dir = request.run_dir;
  out.trials = hpt::run_study(space, objective, options);
  int failed = 0;
  for (const auto& t : out.trials) {
    out.hpt_seconds += t.seconds;
    failed += t.status == hpt::TrialStatus::Failed;
  }
  out.best = hpt::best_trial(out.trials);
  out.tie = std::count_if(out.trials.begin(), out.trials.end(), [&](const hpt::Trial& t) {
              return t.status == hpt::TrialStatus::Done && t.objective == out.best.objective;
            }) > 1;

  const auto best_path = request.run_dir / "best.json";
  bool have_best = false;
  if (std::filesystem::exists(best_path)) {
    json b = parse_file(best_path);
    if (b.at("trial").get<int>() == out.best.id) {
      out.dev = metrics_from(b.at("dev"));
      out.test = metrics_from(b.at("test"));
      out.retrain.best_epoch = b.at("best_epoch").get<int>();
      out.retrain.epochs_run = b.at("epochs_run").get<int>();
      for (const auto& p : b.at("curve")) {
        out.retrain.curve.push_back({p.at(0).get<int>(), p.at(1).get<double>(), p.at(2).get<double>()});
      }
      have_best = true;
    }
  }
  if (!have_best) {
    out.retrain = run_trial(config, splits, *provider, request.plan, out.best.params, true, request.run_dir);
    if (out.retrain.diverged || !out.retrain.test) {
      throw NumericError("retraining the best trial failed: " + out.retrain.reason);
    }
    out.dev = out.retrain.dev;
    out.test = *out.retrain.test;
    json curve = json::array();
    for (const auto& p : out.retrain.curve) curve.push_back({p.epoch, p.train_loss, p.dev_metric});
    json b = {{"trial", out.best.id},
              {"params", json::parse(hpt::to_json(out.best.params))},
              {"study_objective", out.best.objective},
              {"dev", metrics_json(out.dev)},
              {"test", metrics_json(out.test)},
              {"best_epoch", out.retrain.best_epoch},
              {"epochs_run", out.retrain.epochs_run},
              {"tie", out.tie},
              {"curve", curve}};
    write_text(best_path, b.dump(2));
  }

  log << "  " << out.trials.size() - failed << " done, " << failed << " failed; best trial " << out.best.id
      << (out.tie ? " (tied)" : "") << ": dev " << out.dev.to_string() << ", test " << out.test.to_string() << "\n";
  return out;
}

StudyOutcome cmd_tune_baseline(const ExperimentConfig& config, std::ostream& log) {
  StudyRequest r;
  r.command = "tune-baseline";
  r.plan.assign(models::layer_count(config.model_kind()), CellKind::Lstm);
  r.trials = config.budget.baseline_trials;
  r.run_dir = run_directory(config, plan_tag(r.plan));
  return run_tuning(config, r, log);
}

SearchOutcome cmd_search(const ExperimentConfig& config, const std::filesystem::path& baseline_dir,
                         std::ostream& log) {
  config.validate();
  const std::vector<CellKind> lstm_plan(models::layer_count(config.model_kind()), CellKind::Lstm);
  const auto base_dir = baseline_dir.empty() ? run_directory(config, plan_tag(lstm_plan)) : baseline_dir;
  hpt::Assignment params;
  if (std::filesystem::exists(base_dir / "best.json")) {
    params = hpt::assignment_from_json(parse_file(base_dir / "best.json").at("params").dump());
  } else if (config.search_overrides.empty()) {
    throw ConfigError("no finished baseline study in " + base_dir.string() +
                      " and no search_overrides in the config");
  }
  for (const auto& [k, v] : config.search_overrides) params[k] = v;
  std::vector<std::string> missing;
  for (const char* key :
       {"batch_size", "hidden_dim", "dropout_1", "dropout_2", "variational_dropout", "loss", "weight_decay"}) {
    if (!params.count(key)) missing.push_back(key);
  }
  if (!missing.empty()) {
    std::string list;
    for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
    throw ConfigError("search child hyperparameters missing: " + list);
  }

  const Splits splits = load_splits(config);
  const auto provider = load_provider(config.embedding);
  const models::ModelSpec spec = nas::search_spec(trial_spec(config, lstm_plan, params, provider->dim()));

  nas::SearchConfig sc;
  sc.max_epochs = config.budget.search_epochs;
  sc.patience = config.budget.search_patience;
  sc.batch_size = hpt::integer_choice(params, "batch_size");
  if (config.memory_cap) sc.batch_size = std::min(sc.batch_size, 32);
  sc.child_weight_decay = hpt::number(params, "weight_decay");
  sc.loss = ad::parse_loss(hpt::choice(params, "loss"));
  sc.derive_count = config.budget.derive_count;
  sc.controller.num_nodes = spec.num_nodes;
  sc.seed = config.seed;

  SearchOutcome out;
  out.run_dir = run_directory(config, "search");
  std::filesystem::create_directories(out.run_dir);
  const auto exp_path = out.run_dir / "experiment.json";
  const json exp = {{"command", "search"},
                    {"experiment", json::parse(to_json(config))},
                    {"child_params", json::parse(hpt::to_json(params))}};
  if (std::filesystem::exists(exp_path) && parse_file(exp_path) != exp) {
    throw ConfigError(out.run_dir.string() + " already holds a search with a different configuration");
  }
  write_text(exp_path, exp.dump(2));

  log << "search: " << models::model_name(spec.kind) << " on " << config.dataset.name << ", up to "
      << sc.max_epochs << " epochs -> " << out.run_dir.string() << "\n";
  out.result = nas::run_search(sc, spec, *provider, splits.train, splits.dev, out.run_dir, [&](const nas::EpochRecord& r) {
    log << "  epoch " << r.epoch << "  loss " << r.train_loss << "  reward " << r.mean_reward << "  ema "
        << r.reward_ema << "\n";
    return true;
  });
  log << "  " << out.result.derived.size() << " architectures written to " << (out.run_dir / "derived.arch").string()
      << (out.result.derived_complete ? "" : " (fewer unique genotypes than requested)") << "\n";
  return out;
}

StudyOutcome cmd_tune_derived(const ExperimentConfig& config, const std::filesystem::path& arch_file,
                              const std::string& plan, std::ostream& log) {
  StudyRequest r;
  r.command = "tune-derived";
  r.plan = models::parse_layer_plan(plan, config.model_kind());
  for (CellKind c : r.plan) {
    if (c == CellKind::Random) throw ConfigError("use random-baseline for RND layers");
  }
  if (!has_cell_layer(r.plan)) throw ConfigError("plan " + plan + " has no E layer");
  r.architectures = cell::read_architecture_file(arch_file);
  if (r.architectures.empty()) throw ConfigError(arch_file.string() + " holds no architectures");
  r.trials = config.budget.derived_trials;
  r.run_dir = run_directory(config, plan_tag(r.plan));
  return run_tuning(config, r, log);
}

std::vector<cell::CellArchitecture> sample_unique(int k, std::uint64_t seed, int num_nodes) {
  if (k < 1) throw ConfigError("k must be at least 1");
  if (static_cast<std::uint64_t>(k) > cell::enumerate_count(num_nodes)) {
    throw ConfigError("the space has fewer than " + std::to_string(k) + " architectures");
  }
  std::mt19937_64 rng(seed);
  std::set<cell::CellArchitecture> seen;
  std::vector<cell::CellArchitecture> out;
  while (static_cast<int>(out.size()) < k) {
    auto a = cell::sample_uniform(rng, num_nodes);
    if (seen.insert(a).second) out.push_back(std::move(a));
  }
  return out;
}

StudyOutcome cmd_random_baseline(const ExperimentConfig& config, int k, std::uint64_t arch_seed,
                                 const std::string& plan, std::ostream& log) {
  StudyRequest r;
  r.command = "random-baseline";
  r.plan = models::parse_layer_plan(plan, config.model_kind());
  for (CellKind& c : r.plan) {
    if (c == CellKind::Enas) c = CellKind::Random;
  }
  if (!has_cell_layer(r.plan)) throw ConfigError("plan " + plan + " has no RND layer");
  r.architectures = sample_unique(k, arch_seed);
  r.trials = config.budget.derived_trials;
  r.run_dir = run_directory(config, plan_tag(r.plan));
  std::filesystem::create_directories(r.run_dir);
  cell::write_architecture_file(r.run_dir / "random.arch", r.architectures);
  return run_tuning(config, r, log);
}

StudyOutcome cmd_transfer(const ExperimentConfig& config, const std::filesystem::path& source_arch_file,
                          const std::string& source_dataset, const std::string& plan, bool allow_overlap,
                          std::ostream& log) {
  if (source_dataset.empty()) throw ConfigError("transfer needs the source dataset name");
  if (source_dataset == config.dataset.name) throw ConfigError("transfer from a dataset to itself is refused");
  if (!allow_overlap && (source_dataset == "stsb" || config.dataset.name == "stsb")) {
    throw ConfigError("stsb shares data with sick and mrpc; pass allow-overlap to transfer anyway");
  }
  StudyRequest r;
  r.command = "transfer";
  r.plan = models::parse_layer_plan(plan, config.model_kind());
  if (!has_cell_layer(r.plan)) throw ConfigError("plan " + plan + " has no E layer");
  r.architectures = cell::read_architecture_file(source_arch_file);
  if (r.architectures.empty()) throw ConfigError(source_arch_file.string() + " holds no architectures");
  r.source_dataset = source_dataset;
  r.trials = config.budget.derived_trials;
  r.run_dir = run_directory(config, plan_tag(r.plan) + "-from-" + source_dataset);
  return run_tuning(config, r, log);
}

std::string cmd_export_arch_table(const std::filesystem::path& arch_file) {
  return cell::export_table(cell::read_architecture_file(arch_file));
}

}  // namespace pairnas::experiment
