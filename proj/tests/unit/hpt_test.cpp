#include <gtest/gtest.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>

#include "pairnas/error.hpp"
#include "pairnas/hpt/space.hpp"
#include "pairnas/hpt/study.hpp"
#include "pairnas/hpt/tpe.hpp"

namespace pairnas::hpt {
namespace {

struct TempFile {
  std::filesystem::path path;
  explicit TempFile(const std::string& name) : path(std::filesystem::temp_directory_path() / name) {
    std::filesystem::remove(path);
  }
  ~TempFile() { std::filesystem::remove(path); }
};

SearchSpace lstm_space() {
  Table3Options o;
  o.hidden_dims = hidden_dims_for("toy");
  return table3_space(o);
}

TEST(Space, RejectsBadDeclarations) {
  EXPECT_THROW(SearchSpace({ParamSpec::categorical("a", {})}), ConfigError);
  EXPECT_THROW(SearchSpace({ParamSpec::continuous("a", 1.0, 1.0)}), ConfigError);
  EXPECT_THROW(SearchSpace({ParamSpec::continuous("a", 0.0, 1.0, true)}), ConfigError);
  EXPECT_THROW(SearchSpace({ParamSpec::continuous("a", 0, 1), ParamSpec::continuous("a", 0, 2)}), ConfigError);
}

TEST(Space, Table3Layout) {
  SearchSpace s = lstm_space();
  EXPECT_FALSE(s.has("architecture"));
  EXPECT_EQ(s.find("batch_size")->choices, (std::vector<std::string>{"16", "32", "64"}));
  EXPECT_TRUE(s.find("learning_rate")->log_scale);
  EXPECT_EQ(s.find("learning_rate")->low, 1e-4);
  EXPECT_EQ(s.find("learning_rate")->high, 1e-2);
  EXPECT_EQ(s.find("loss")->choices, (std::vector<std::string>{"mse", "mae"}));
  EXPECT_EQ(s.find("grad_norm")->low, 0.25);
  EXPECT_EQ(s.find("grad_norm")->high, 20.0);
  EXPECT_EQ(s.find("seed")->choices.size(), 6u);

  Table3Options o;
  o.task = data::TaskKind::Classification;
  o.hidden_dims = hidden_dims_for("bert", true);
  o.architectures = {"Tanh 0:Relu 0:Relu 0:Relu 0:Relu 0:Relu", "Relu 0:Relu 1:Relu 2:Relu 3:Relu 4:Relu"};
  o.restrict_batch = true;
  SearchSpace c = table3_space(o);
  EXPECT_EQ(c.find("loss")->choices, (std::vector<std::string>{"cross_entropy"}));
  EXPECT_EQ(c.find("hidden_dim")->choices, (std::vector<std::string>{"384", "512", "768"}));
  EXPECT_EQ(c.find("batch_size")->choices, (std::vector<std::string>{"16", "32"}));
  EXPECT_EQ(c.find("architecture")->choices.size(), 2u);
  EXPECT_EQ(hidden_dims_for("glove"), (std::vector<int>{150, 200, 300, 450, 600}));
}

TEST(Space, FileRoundTrip) {
  TempFile f("pairnas_space_test.json");
  SearchSpace s = lstm_space();
  save_space(f.path, s);
  SearchSpace back = load_space(f.path);
  ASSERT_EQ(back.params().size(), s.params().size());
  for (std::size_t i = 0; i < s.params().size(); ++i) {
    EXPECT_EQ(back.params()[i].name, s.params()[i].name);
    EXPECT_EQ(back.params()[i].choices, s.params()[i].choices);
    EXPECT_EQ(back.params()[i].low, s.params()[i].low);
    EXPECT_EQ(back.params()[i].high, s.params()[i].high);
    EXPECT_EQ(back.params()[i].log_scale, s.params()[i].log_scale);
  }
}

TEST(Space, AssignmentAccessorsAndJson) {
  Assignment a{{"batch_size", std::string("32")}, {"learning_rate", 0.00123456789}};
  EXPECT_EQ(integer_choice(a, "batch_size"), 32);
  EXPECT_EQ(number(a, "learning_rate"), 0.00123456789);
  EXPECT_THROW(number(a, "batch_size"), ConfigError);
  EXPECT_THROW(choice(a, "missing"), ConfigError);
  EXPECT_EQ(assignment_from_json(to_json(a)), a);
}

TEST(Sampler, EverySuggestionStaysInBounds) {
  Table3Options o;
  o.hidden_dims = hidden_dims_for("toy");
  o.architectures = {"Tanh 0:Relu 0:Relu 0:Relu 0:Relu 0:Relu", "Relu 0:Relu 1:Relu 2:Relu 3:Relu 4:Relu"};
  SearchSpace s = table3_space(o);
  std::mt19937_64 rng(1);
  std::vector<Assignment> done;
  std::vector<Observation> history;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 10000; ++i) {
    Assignment a = i < 5000 ? sample_random(s, rng) : suggest_tpe(s, history, TpeConfig{}, rng);
    ASSERT_TRUE(s.contains(a)) << to_json(a);
    if (i < 60) done.push_back(a);
    if (i == 59) {
      for (const auto& d : done) history.push_back({&d, u(rng)});
    }
  }
}

TEST(Sampler, StartupMarginalsAreUniform) {
  SearchSpace s = lstm_space();
  std::mt19937_64 rng(2);
  const int n = 10000;
  std::map<std::string, std::map<std::string, int>> counts;
  std::vector<Observation> few;  // below the startup count: random phase
  for (int i = 0; i < n; ++i) {
    Assignment a = suggest_tpe(s, few, TpeConfig{}, rng);
    for (const auto& p : s.params()) {
      if (p.kind == ParamKind::Categorical) counts[p.name][choice(a, p.name)]++;
    }
  }
  // chi-square critical values at p = 0.001 for df = 1..5
  const double crit[] = {0, 10.828, 13.816, 16.266, 18.467, 20.515};
  for (const auto& p : s.params()) {
    if (p.kind != ParamKind::Categorical || p.choices.size() < 2) continue;
    const double expect = static_cast<double>(n) / p.choices.size();
    double chi2 = 0.0;
    for (const auto& c : p.choices) chi2 += std::pow(counts[p.name][c] - expect, 2) / expect;
    EXPECT_LT(chi2, crit[p.choices.size() - 1]) << p.name;
  }
}

TEST(Sampler, LogScaleStartupIsLogUniform) {
  SearchSpace s({ParamSpec::continuous("lr", 1e-4, 1e-2, true)});
  std::mt19937_64 rng(3);
  int below = 0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) below += number(sample_random(s, rng), "lr") < 1e-3;
  EXPECT_NEAR(static_cast<double>(below) / n, 0.5, 0.03);
}

double best_after(SamplerMode mode, const SearchSpace& space, double (*f)(const Assignment&), int trials,
                  std::uint64_t seed) {
  StudyOptions o;
  o.n_trials = trials;
  o.mode = mode;
  o.seed = seed;
  auto result = run_study(space, [f](const Assignment& a, const TrialContext&) { return f(a); }, o);
  return best_trial(result).objective;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return 0.5 * (v[(v.size() - 1) / 2] + v[v.size() / 2]);
}

double quadratic(const Assignment& a) {
  const double x = number(a, "x");
  return -(x - 0.3) * (x - 0.3);
}

TEST(Sampler, TpeBeatsRandomOnQuadratic) {
  SearchSpace s({ParamSpec::continuous("x", 0.0, 1.0)});
  std::vector<double> tpe, rnd;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    tpe.push_back(best_after(SamplerMode::Tpe, s, quadratic, 100, seed));
    rnd.push_back(best_after(SamplerMode::Random, s, quadratic, 100, seed));
  }
  EXPECT_GE(median(tpe), median(rnd));  // objectives are negated losses
}

TEST(Sampler, TpeBeatsRandomOnAnalyticObjective) {
  std::vector<double> tpe, rnd;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    tpe.push_back(best_after(SamplerMode::Tpe, analytic_space(), analytic_objective, 100, seed));
    rnd.push_back(best_after(SamplerMode::Random, analytic_space(), analytic_objective, 100, seed));
  }
  EXPECT_GE(median(tpe), median(rnd));
}

TEST(Study, RandomModeIsDeterministic) {
  StudyOptions o;
  o.n_trials = 15;
  o.mode = SamplerMode::Random;
  o.seed = 7;
  auto obj = [](const Assignment& a, const TrialContext& ctx) {
    std::mt19937_64 rng(ctx.seed);
    return analytic_objective(a) + 1e-3 * std::uniform_real_distribution<double>(0, 1)(rng);
  };
  auto a = run_study(analytic_space(), obj, o);
  auto b = run_study(analytic_space(), obj, o);
  ASSERT_EQ(a.size(), 15u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].id, static_cast<int>(i));
    EXPECT_EQ(a[i].params, b[i].params);
    EXPECT_EQ(a[i].objective, b[i].objective);
  }
}

TEST(Study, ConcurrencyKeepsRandomAssignments) {
  StudyOptions o;
  o.n_trials = 24;
  o.mode = SamplerMode::Random;
  o.seed = 8;
  auto obj = [](const Assignment& a, const TrialContext&) { return analytic_objective(a); };
  auto serial = run_study(analytic_space(), obj, o);
  o.concurrency = 4;
  auto parallel = run_study(analytic_space(), obj, o);
  ASSERT_EQ(serial.size(), parallel.size());
  for (std::size_t i = 0; i < serial.size(); ++i) {
    EXPECT_EQ(serial[i].params, parallel[i].params);
    EXPECT_EQ(serial[i].objective, parallel[i].objective);
  }
}

TEST(Study, FailuresAreRecordedAndStudyCompletes) {
  StudyOptions o;
  o.n_trials = 12;
  o.concurrency = 3;
  o.mode = SamplerMode::Tpe;
  o.tpe.startup = 4;
  auto obj = [](const Assignment& a, const TrialContext& ctx) -> double {
    if (ctx.id % 3 == 1) throw NumericError("diverged");
    if (ctx.id == 5) return std::nan("");
    return analytic_objective(a);
  };
  auto trials = run_study(analytic_space(), obj, o);
  ASSERT_EQ(trials.size(), 12u);
  int failed = 0;
  for (const auto& t : trials) {
    if (t.status == TrialStatus::Failed) {
      ++failed;
      EXPECT_FALSE(t.reason.empty());
    } else {
      EXPECT_EQ(t.status, TrialStatus::Done);
      EXPECT_TRUE(std::isfinite(t.objective));
    }
  }
  EXPECT_EQ(failed, 5);
  EXPECT_NE(best_trial(trials).id % 3, 1);
}

TEST(Study, LogIsOrderedAndResumable) {
  TempFile f("pairnas_study_test.jsonl");
  std::atomic<int> calls{0};
  auto obj = [&calls](const Assignment& a, const TrialContext&) {
    ++calls;
    return analytic_objective(a);
  };
  StudyOptions o;
  o.n_trials = 6;
  o.concurrency = 3;
  o.mode = SamplerMode::Random;
  o.seed = 9;
  o.log_path = f.path;
  auto first = run_study(analytic_space(), obj, o);
  EXPECT_EQ(calls.load(), 6);
  auto logged = read_study_log(f.path);
  ASSERT_EQ(logged.size(), 6u);
  for (int i = 0; i < 6; ++i) {
    EXPECT_EQ(logged[i].id, i);
    EXPECT_EQ(logged[i].params, first[i].params);
    EXPECT_EQ(logged[i].objective, first[i].objective);
  }

  o.n_trials = 10;
  auto resumed = run_study(analytic_space(), obj, o);
  EXPECT_EQ(calls.load(), 10);
  ASSERT_EQ(resumed.size(), 10u);
  for (int i = 0; i < 6; ++i) EXPECT_EQ(resumed[i].params, first[i].params);
  EXPECT_EQ(read_study_log(f.path).size(), 10u);

  // Same study without a log gives the same trials.
  o.log_path.clear();
  auto fresh = run_study(analytic_space(), obj, o);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(fresh[i].objective, resumed[i].objective);

  // A completed study is not rerun.
  o.log_path = f.path;
  run_study(analytic_space(), obj, o);
  EXPECT_EQ(calls.load(), 20);
}

TEST(Study, CorruptLogLineReportsLineNumber) {
  TempFile f("pairnas_study_bad.jsonl");
  {
    std::ofstream out(f.path);
    out << trial_to_json(Trial{0, {{"x", 0.5}}, TrialStatus::Done, 1.0, 0.1, ""}) << "\n{not json\n";
  }
  try {
    read_study_log(f.path);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2);
  }
}

TEST(BestTrial, TieBreaksAndErrors) {
  std::vector<Trial> t(4);
  for (int i = 0; i < 4; ++i) {
    t[i].id = i;
    t[i].status = TrialStatus::Done;
  }
  t[0].objective = 0.5;
  t[1].objective = 0.9;
  t[2].objective = 0.9;
  t[3].objective = 2.0;
  t[3].status = TrialStatus::Failed;
  EXPECT_EQ(best_trial(t).id, 1);
  std::vector<Trial> single{t[2]};
  EXPECT_EQ(best_trial(single).id, 2);
  std::vector<Trial> none{t[3]};
  EXPECT_THROW(best_trial(none), DegenerateError);
}

TEST(Study, TrialJsonRoundTrip) {
  Trial t{3, {{"x", 0.1 + 0.2}, {"c", std::string("b")}}, TrialStatus::Done, -0.123456789012345678, 1.5, ""};
  Trial back = trial_from_json(trial_to_json(t));
  EXPECT_EQ(back.id, 3);
  EXPECT_EQ(back.params, t.params);
  EXPECT_EQ(back.objective, t.objective);
  EXPECT_EQ(back.status, TrialStatus::Done);
  Trial f{4, {{"x", 0.5}}, TrialStatus::Failed, 0.0, 0.2, "diverged"};
  Trial fb = trial_from_json(trial_to_json(f));
  EXPECT_EQ(fb.status, TrialStatus::Failed);
  EXPECT_EQ(fb.reason, "diverged");
}

}  // namespace
}  // namespace pairnas::hpt
