#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "pairnas/ad/checkpoint.hpp"
#include "pairnas/data/batch.hpp"
#include "pairnas/error.hpp"
#include "pairnas/nas/search.hpp"
#include "pairnas/nas/train.hpp"

namespace pairnas::nas {
namespace {

using models::CellKind;
using models::ModelKind;

struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& name) : path(std::filesystem::temp_directory_path() / name) {
    std::filesystem::remove_all(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

models::ModelSpec make_spec(ModelKind kind, data::TaskKind task, std::vector<CellKind> plan, int dim = 8,
                            int hidden = 8) {
  models::ModelSpec spec;
  spec.kind = kind;
  spec.task = task;
  spec.input_dim = dim;
  for (CellKind c : plan) spec.layers.push_back({c, std::nullopt, hidden, 0.0});
  if (task == data::TaskKind::Regression) spec.range = {0.0, 5.0};
  return spec;
}

std::vector<std::vector<double>> values_of(const ad::NamedTensors& named) { return ad::snapshot_values(named); }

SearchConfig small_search(std::uint64_t seed) {
  SearchConfig c;
  c.max_epochs = 2;
  c.batch_size = 16;
  c.controller_steps = 2;
  c.samples_per_step = 2;
  c.seed = seed;
  return c;
}

struct SmallTask {
  data::SentencePairDataset train, dev;
  data::ToyHash provider{8, 3};
  explicit SmallTask(data::TaskKind task = data::TaskKind::Regression, int n = 48) {
    auto all = data::make_synthetic(task, n, 11);
    std::tie(train, dev) = data::split(all, 0.25, 0);
  }
};

TEST(Config, Validation) {
  TrainConfig t;
  t.patience = 0;
  EXPECT_THROW(t.validate(), ConfigError);
  SearchConfig s;
  s.derive_count = 0;
  EXPECT_THROW(s.validate(), ConfigError);
  s = SearchConfig{};
  s.patience = 0;
  EXPECT_THROW(s.validate(), ConfigError);
  s = SearchConfig{};
  s.controller.num_nodes = 3;
  EXPECT_THROW(SearchState(s, make_spec(ModelKind::Blm, data::TaskKind::Regression, {CellKind::Enas})),
               ConfigError);
}

TEST(Config, SearchJsonRoundTrip) {
  SearchConfig c;
  c.child_learning_rate = 1.0 / 3.0;
  c.loss = ad::LossKind::Mae;
  c.controller.temperature = 2.25;
  c.seed = 99;
  SearchConfig back = search_config_from_json(to_json(c));
  EXPECT_EQ(to_json(back), to_json(c));
  EpochRecord r{3, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6};
  EXPECT_EQ(epoch_record_from_json(to_json(r)), r);
}

TEST(Search, ChildSpecIsAllEnas) {
  auto spec = make_spec(ModelKind::Esim, data::TaskKind::Regression, {CellKind::Lstm, CellKind::Random});
  auto child = search_spec(spec);
  for (const auto& l : child.layers) {
    EXPECT_EQ(l.cell, CellKind::Enas);
    EXPECT_FALSE(l.arch.has_value());
  }
}

TEST(Search, PhasesAreIsolated) {
  SmallTask task;
  SearchConfig cfg = small_search(1);
  SearchState state(cfg, make_spec(ModelKind::Esim, data::TaskKind::Regression, {CellKind::Enas, CellKind::Enas}));
  const auto controller_before = values_of(state.policy.named_parameters());
  const auto shared_before = values_of(state.model.named_parameters());
  train_shared_epoch(state, task.provider, task.train, cfg);
  EXPECT_EQ(values_of(state.policy.named_parameters()), controller_before);
  const auto shared_after = values_of(state.model.named_parameters());
  EXPECT_NE(shared_after, shared_before);
  controller_phase(state, task.provider, task.dev, cfg);
  EXPECT_EQ(values_of(state.model.named_parameters()), shared_after);
  EXPECT_NE(values_of(state.policy.named_parameters()), controller_before);
}

TEST(Search, UnreferencedMatricesStayFixed) {
  SmallTask task;
  SearchConfig cfg = small_search(2);
  SearchState state(cfg, make_spec(ModelKind::Blm, data::TaskKind::Regression, {CellKind::Enas}));
  // Every node reads node 0, so only the 0 -> l matrices are referenced.
  const auto arch = cell::parse_architecture("Tanh 0:Relu 0:Sigmoid 0:Tanh 0:Identity 0:Relu");
  const auto before = state.model.named_parameters();
  const auto values = values_of(before);
  train_shared_epoch(state, task.provider, task.train, cfg, [&](std::mt19937_64&) { return arch; });
  int changed = 0, fixed = 0;
  for (std::size_t i = 0; i < before.size(); ++i) {
    const std::string& name = before[i].name;
    const auto now = std::vector<double>(before[i].tensor.data().begin(), before[i].tensor.data().end());
    auto pos = name.find(".w_h.");
    if (pos == std::string::npos) pos = name.find(".w_c.");
    if (pos == std::string::npos) continue;
    const bool referenced = name.compare(pos + 5, 2, "0_") == 0;
    if (referenced) {
      EXPECT_NE(now, values[i]) << name;
      ++changed;
    } else {
      EXPECT_EQ(now, values[i]) << name;
      ++fixed;
    }
  }
  EXPECT_EQ(changed, 2 * 2 * 5);  // fwd/bwd x (w_h, w_c) x 5 pairs
  EXPECT_EQ(fixed, 2 * 2 * 10);
}

TEST(Search, FixedSourceReducesToOrdinaryTraining) {
  SmallTask task(data::TaskKind::Classification);
  SearchConfig cfg = small_search(3);
  cfg.loss = ad::LossKind::CrossEntropy;
  auto spec = make_spec(ModelKind::Blm, data::TaskKind::Classification, {CellKind::Enas});
  spec.layers[0].variational_dropout = 0.3;
  spec.dropout_1 = 0.2;
  SearchState state(cfg, spec);
  const auto arch = cell::parse_architecture("Tanh 0:Relu 1:Sigmoid 0:Tanh 2:Identity 4:Relu");

  spec.layers[0].arch = arch;
  std::mt19937_64 init(0);
  models::SentencePairModel plain(spec, init);
  ad::restore_snapshot(plain.named_parameters(), values_of(state.model.named_parameters()));
  std::vector<ad::Tensor> params;
  for (const auto& nt : plain.named_parameters()) params.push_back(nt.tensor);
  ad::Adam opt(params, {.learning_rate = cfg.child_learning_rate, .clip_norm = cfg.child_grad_norm});
  std::mt19937_64 rng = state.child_rng;

  int calls = 0;
  train_shared_epoch(state, task.provider, task.train, cfg, [&](std::mt19937_64&) {
    ++calls;
    return arch;
  });
  models::ForwardOptions fwd;
  fwd.training = true;
  fwd.rng = &rng;
  for (const auto& idx : data::minibatches(task.train.size(), cfg.batch_size, &rng)) {
    auto batch = data::make_batch(task.provider, task.train, idx);
    ad::backward(plain.loss(plain.forward(batch, fwd), batch, cfg.loss));
    opt.step();
  }
  EXPECT_EQ(calls, static_cast<int>((task.train.size() + cfg.batch_size - 1) / cfg.batch_size));
  EXPECT_EQ(values_of(plain.named_parameters()), values_of(state.model.named_parameters()));
}

TEST(Search, DivergenceAbortsWithDiagnostics) {
  SmallTask task;
  SearchConfig cfg = small_search(4);
  SearchState state(cfg, make_spec(ModelKind::Blm, data::TaskKind::Regression, {CellKind::Enas}));
  for (auto& nt : state.model.named_parameters()) {
    if (nt.name == "out.b") nt.tensor.mutable_data()[0] = std::nan("");
  }
  try {
    train_shared_epoch(state, task.provider, task.train, cfg);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("minibatch 0"), std::string::npos) << e.what();
  }
}

TEST(Search, RewardRange) {
  EXPECT_NO_THROW(validate_reward(data::TaskKind::Regression, -1.0));
  EXPECT_THROW(validate_reward(data::TaskKind::Regression, 1.0000001), NumericError);
  EXPECT_THROW(validate_reward(data::TaskKind::Regression, std::nan("")), NumericError);
  EXPECT_NO_THROW(validate_reward(data::TaskKind::Classification, 1.0));
}

TEST(Search, BaselineFollowsDecayedBlend) {
  SearchConfig cfg = small_search(5);
  cfg.controller_steps = 4;
  cfg.samples_per_step = 3;
  cfg.controller.baseline_decay = 0.7;
  SearchState state(cfg, make_spec(ModelKind::Blm, data::TaskKind::Regression, {CellKind::Enas}));
  state.baseline.value = 0.25;
  auto reward = [](const cell::CellArchitecture& a) { return 0.1 * cell::activation_index(a.node0_op); };
  PhaseStats stats = controller_phase(state, cfg, reward);
  ASSERT_EQ(stats.rewards.size(), 12u);
  double b = 0.25;
  for (int step = 0; step < 4; ++step) {
    const double mean = (stats.rewards[3 * step] + stats.rewards[3 * step + 1] + stats.rewards[3 * step + 2]) / 3.0;
    b = 0.7 * b + 0.3 * mean;
  }
  EXPECT_NEAR(state.baseline.value, b, 1e-15);
}

TEST(Search, BetterArchitectureGainsProbability) {
  // Two-node space with two rewarded architectures; the better one should
  // gain probability.
  auto spec = make_spec(ModelKind::Blm, data::TaskKind::Regression, {CellKind::Enas});
  spec.num_nodes = 2;
  const cell::CellArchitecture best = cell::parse_architecture("Tanh 0:Sigmoid", 2);
  const cell::CellArchitecture second = cell::parse_architecture("Relu 0:Relu", 2);
  auto reward = [&](const cell::CellArchitecture& a) { return a == best ? 1.0 : a == second ? 0.5 : 0.0; };
  const int phases = 50, seeds = 10;
  std::vector<double> mean_prob(phases + 1, 0.0);
  for (int seed = 0; seed < seeds; ++seed) {
    SearchConfig cfg;
    cfg.controller.num_nodes = 2;
    cfg.controller.learning_rate = 1e-3;
    cfg.seed = static_cast<std::uint64_t>(seed);
    SearchState state(cfg, spec);
    mean_prob[0] += std::exp(state.policy.log_prob(best)) / seeds;
    for (int p = 1; p <= phases; ++p) {
      controller_phase(state, cfg, reward);
      mean_prob[p] += std::exp(state.policy.log_prob(best)) / seeds;
    }
  }
  for (int p = 10; p <= phases; p += 10) EXPECT_GT(mean_prob[p], mean_prob[p - 10]) << "phase " << p;
}

TEST(Derive, UniqueValidArchitectures) {
  std::mt19937_64 init(1);
  controller::ControllerPolicy policy(controller::ControllerConfig{}, init);
  std::mt19937_64 rng(2);
  Derived d = derive(policy, 10, 1000, rng);
  EXPECT_TRUE(d.complete);
  ASSERT_EQ(d.architectures.size(), 10u);
  std::set<cell::CellArchitecture> unique(d.architectures.begin(), d.architectures.end());
  EXPECT_EQ(unique.size(), 10u);
  for (const auto& a : d.architectures) EXPECT_EQ(cell::parse_architecture(cell::serialize(a)), a);
}

TEST(Derive, ReportsShortfallWhenSpaceIsTooSmall) {
  controller::ControllerConfig cfg;
  cfg.num_nodes = 2;
  std::mt19937_64 init(1);
  controller::ControllerPolicy policy(cfg, init);
  std::mt19937_64 rng(2);
  Derived d = derive(policy, 20, 2000, rng);
  EXPECT_FALSE(d.complete);
  EXPECT_EQ(d.architectures.size(), 16u);
}

TEST(RunSearch, SmokeRunIsReproducible) {
  SmallTask task;
  auto spec = make_spec(ModelKind::Esim, data::TaskKind::Regression, {CellKind::Enas, CellKind::Lstm});
  SearchConfig cfg = small_search(6);
  auto a = run_search(cfg, spec, task.provider, task.train, task.dev);
  auto b = run_search(cfg, spec, task.provider, task.train, task.dev);
  ASSERT_EQ(a.history.size(), 2u);
  EXPECT_EQ(a.history, b.history);
  EXPECT_EQ(a.derived, b.derived);
  EXPECT_EQ(a.derived.size(), 10u);
  EXPECT_EQ(std::set<cell::CellArchitecture>(a.derived.begin(), a.derived.end()).size(), 10u);
  for (std::size_t i = 0; i < a.history.size(); ++i) {
    double best = -1e300;
    for (std::size_t j = 0; j <= i; ++j) best = std::max(best, a.history[j].mean_reward);
    EXPECT_EQ(a.history[i].best_reward, best);
  }
}

TEST(RunSearch, EarlyStoppingHonoursPatience) {
  SmallTask task;
  auto spec = make_spec(ModelKind::Blm, data::TaskKind::Regression, {CellKind::Enas});
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    SearchConfig cfg = small_search(seed);
    cfg.max_epochs = 12;
    cfg.patience = 2;
    cfg.child_learning_rate = 0.05;  // noisy rewards, so stalls happen
    auto r = run_search(cfg, spec, task.provider, task.train, task.dev);
    const int epochs = static_cast<int>(r.history.size());
    EXPECT_LE(epochs - r.best_epoch, cfg.patience);
    if (r.stopped_early) {
      EXPECT_EQ(epochs - r.best_epoch, cfg.patience);
      for (int e = r.best_epoch; e < epochs; ++e) {
        EXPECT_LE(r.history[e].mean_reward, r.history[r.best_epoch - 1].mean_reward);
      }
    } else {
      EXPECT_EQ(epochs, cfg.max_epochs);
    }
  }
}

TEST(RunSearch, RunDirectoryResumesBitIdentically) {
  SmallTask task;
  auto spec = make_spec(ModelKind::Blm, data::TaskKind::Regression, {CellKind::Enas});
  SearchConfig cfg = small_search(7);
  cfg.max_epochs = 4;
  cfg.patience = 10;
  TempDir full("pairnas_search_full"), split("pairnas_search_split");
  auto reference = run_search(cfg, spec, task.provider, task.train, task.dev, full.path);

  auto paused = run_search(cfg, spec, task.provider, task.train, task.dev, split.path,
                           [](const EpochRecord& r) { return r.epoch < 2; });
  EXPECT_TRUE(paused.paused);
  EXPECT_EQ(paused.history.size(), 2u);
  EXPECT_FALSE(std::filesystem::exists(split.path / "derived.arch"));
  auto resumed = run_search(cfg, spec, task.provider, task.train, task.dev, split.path);
  EXPECT_EQ(resumed.history, reference.history);
  EXPECT_EQ(resumed.derived, reference.derived);

  for (const char* f : {"config.json", "metrics.jsonl", "state.json", "shared.ckpt", "controller.ckpt",
                        "derived.arch", "summary.json"}) {
    EXPECT_TRUE(std::filesystem::exists(full.path / f)) << f;
  }
  EXPECT_EQ(cell::read_architecture_file(full.path / "derived.arch"), reference.derived);
  std::ifstream a(full.path / "metrics.jsonl"), b(split.path / "metrics.jsonl");
  std::string la((std::istreambuf_iterator<char>(a)), {}), lb((std::istreambuf_iterator<char>(b)), {});
  EXPECT_EQ(la, lb);

  // Finished runs are not redone.
  auto again = run_search(cfg, spec, task.provider, task.train, task.dev, full.path,
                          [](const EpochRecord&) -> bool { throw std::logic_error("reran an epoch"); });
  EXPECT_EQ(again.derived, reference.derived);

  cfg.seed = 8;
  EXPECT_THROW(run_search(cfg, spec, task.provider, task.train, task.dev, full.path), ConfigError);
}

TEST(TrainFixed, DeterministicAndRestoresBestEpoch) {
  SmallTask task;
  auto spec = make_spec(ModelKind::Blm, data::TaskKind::Regression, {CellKind::Lstm});
  spec.dropout_1 = 0.2;
  TrainConfig cfg;
  cfg.max_epochs = 12;
  cfg.patience = 3;
  cfg.batch_size = 8;
  cfg.learning_rate = 1e-2;
  cfg.seed = 5;
  auto run = [&] {
    std::mt19937_64 init(9);
    models::SentencePairModel m(spec, init);
    auto r = train_fixed(m, task.provider, task.train, task.dev, &task.dev, cfg);
    return std::make_pair(r, models::evaluate(m, task.provider, task.dev, 64).metrics.primary());
  };
  auto [a, restored] = run();
  auto [b, unused] = run();
  ASSERT_FALSE(a.diverged);
  EXPECT_EQ(a.dev.primary(), b.dev.primary());
  ASSERT_EQ(a.curve.size(), b.curve.size());
  for (std::size_t i = 0; i < a.curve.size(); ++i) {
    EXPECT_EQ(a.curve[i].train_loss, b.curve[i].train_loss);
    EXPECT_EQ(a.curve[i].dev_metric, b.curve[i].dev_metric);
  }
  EXPECT_EQ(restored, a.dev.primary());
  ASSERT_TRUE(a.test.has_value());
  EXPECT_EQ(a.test->primary(), a.dev.primary());  // same split
  double best = -1e300;
  for (const auto& p : a.curve) best = std::max(best, p.dev_metric);
  EXPECT_EQ(a.curve[a.best_epoch - 1].dev_metric, best);
  EXPECT_LE(a.epochs_run - a.best_epoch, cfg.patience);
}

TEST(TrainFixed, DivergenceIsReportedNotThrown) {
  SmallTask task;
  auto spec = make_spec(ModelKind::Blm, data::TaskKind::Regression, {CellKind::Lstm});
  std::mt19937_64 init(1);
  models::SentencePairModel m(spec, init);
  for (auto& nt : m.named_parameters()) {
    if (nt.name == "ff.w") nt.tensor.mutable_data()[0] = std::numeric_limits<double>::infinity();
  }
  TrainConfig cfg;
  cfg.max_epochs = 3;
  auto r = train_fixed(m, task.provider, task.train, task.dev, nullptr, cfg);
  EXPECT_TRUE(r.diverged);
  EXPECT_FALSE(r.reason.empty());
  EXPECT_EQ(r.best_epoch, 0);
}

TEST(TrainFixed, OverfitsSmallParaphraseSetWithTable5Cell) {
  data::ToyHash provider(16, 5);
  auto data = data::make_synthetic(data::TaskKind::Classification, 32, 9);
  auto spec = make_spec(ModelKind::Blm, data::TaskKind::Classification, {CellKind::Enas}, 16, 16);
  spec.layers[0].arch =
      cell::read_architecture_file(std::filesystem::path(PAIRNAS_TEST_DATA_DIR) / "table5.arch").front();
  std::mt19937_64 init(24);
  models::SentencePairModel m(spec, init);
  TrainConfig cfg;
  cfg.max_epochs = 200;
  cfg.patience = 200;
  cfg.batch_size = 8;
  cfg.learning_rate = 5e-3;
  cfg.loss = ad::LossKind::CrossEntropy;
  auto r = train_fixed(m, provider, data, data, nullptr, cfg);
  EXPECT_GE(r.dev.accuracy, 0.95);
}

}  // namespace
}  // namespace pairnas::nas
