#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>

#include "gradcheck.hpp"
#include "pairnas/ad/ops.hpp"
#include "pairnas/data/batch.hpp"
#include "pairnas/data/dataset.hpp"
#include "pairnas/data/embedding.hpp"
#include "pairnas/data/metrics.hpp"
#include "pairnas/error.hpp"

namespace pairnas::data {
namespace {

class TempDir {
 public:
  TempDir() : path_(std::filesystem::temp_directory_path() / ("pairnas_data_" + std::to_string(counter_++))) {
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  std::filesystem::path file(const std::string& name, const std::string& content) const {
    std::ofstream(path_ / name) << content;
    return path_ / name;
  }

 private:
  static inline int counter_ = 0;
  std::filesystem::path path_;
};

TEST(Tsv, LoadsToyFile) {
  TempDir dir;
  auto path = dir.file("toy.tsv", "a man runs\ta person runs\t4.2\nthe cat\ta dog\t0.5\nx y z\tx y z\t5\n");
  auto data = load_tsv(path, builtin_profile("stsb"));
  ASSERT_EQ(data.size(), 3u);
  EXPECT_EQ(data.examples[0].a, (std::vector<std::string>{"a", "man", "runs"}));
  EXPECT_DOUBLE_EQ(data.examples[0].label, 4.2);
  EXPECT_EQ(data.task, TaskKind::Regression);
}

TEST(Tsv, HeaderAndCrlf) {
  TempDir dir;
  auto path = dir.file("h.tsv", "s1\ts2\tlabel\r\nhello there\tgeneral kenobi\t1\r\n");
  auto data = load_tsv(path, builtin_profile("mrpc"), {.header = true});
  ASSERT_EQ(data.size(), 1u);
  EXPECT_EQ(data.examples[0].label, 1.0);
}

TEST(Tsv, RejectsOutOfRangeLabelWithLine) {
  TempDir dir;
  auto path = dir.file("bad.tsv", "a b\tc d\t2.0\na b\tc d\t5.5\n");
  try {
    load_tsv(path, builtin_profile("stsb"));
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2);
  }
  EXPECT_THROW(load_tsv(dir.file("sick.tsv", "a\tb\t0.5\n"), builtin_profile("sick")), ParseError);
}

TEST(Tsv, RejectsMalformedRows) {
  TempDir dir;
  auto expect_line = [&](const std::string& content, const DatasetProfile& profile, int line) {
    try {
      load_tsv(dir.file("m.tsv", content), profile);
      ADD_FAILURE() << content;
    } catch (const ParseError& e) {
      EXPECT_EQ(e.line(), line) << content;
    }
  };
  auto stsb = builtin_profile("stsb");
  expect_line("a\tb\t1\na\tb\n", stsb, 2);
  expect_line("a\tb\t1\tx\n", stsb, 1);
  expect_line("a\tb\tfoo\n", stsb, 1);
  expect_line("a\tb\t1\n\n \tb\t1\n", stsb, 3);
  expect_line("a\tb\t0.5\n", builtin_profile("mrpc"), 1);
}

TEST(Tsv, TruncatesToCap) {
  std::string long_sentence;
  for (int i = 0; i < 100; ++i) long_sentence += "t" + std::to_string(i) + " ";
  EXPECT_EQ(tokenize(long_sentence, 30).size(), 30u);
  EXPECT_EQ(tokenize(long_sentence).size(), 100u);
  TempDir dir;
  auto data = load_tsv(dir.file("c.tsv", long_sentence + "\tshort\t3\n"), builtin_profile("sick"));
  EXPECT_EQ(data.examples[0].a.size(), 30u);
  EXPECT_EQ(data.examples[0].a.back(), "t29");
}

TEST(Tsv, WriteRoundTrip) {
  auto data = make_synthetic(TaskKind::Regression, 20, 3);
  data.range = builtin_profile("synthetic-reg").range;
  auto path = std::filesystem::temp_directory_path() / "pairnas_rt.tsv";
  write_tsv(path, data);
  auto back = load_tsv(path, builtin_profile("synthetic-reg"));
  ASSERT_EQ(back.size(), data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    EXPECT_EQ(back.examples[i].a, data.examples[i].a);
    EXPECT_EQ(back.examples[i].label, data.examples[i].label);
  }
  std::filesystem::remove(path);
}

TEST(Split, SizesDeterminismAndUnion) {
  auto data = make_synthetic(TaskKind::Classification, 10, 1);
  auto [train, dev] = split(data, 0.1, 0);
  EXPECT_EQ(train.size(), 9u);
  EXPECT_EQ(dev.size(), 1u);
  auto [train2, dev2] = split(data, 0.1, 0);
  EXPECT_EQ(dev.examples[0].id, dev2.examples[0].id);

  auto big = make_synthetic(TaskKind::Regression, 237, 2);
  for (double frac : {0.1, 0.25, 0.5}) {
    auto [tr, dv] = split(big, frac, 9);
    EXPECT_LE(std::abs(static_cast<double>(dv.size()) - frac * 237), 1.0);
    std::multiset<std::string> ids;
    for (const auto& e : tr.examples) ids.insert(e.id);
    for (const auto& e : dv.examples) {
      EXPECT_EQ(std::count_if(tr.examples.begin(), tr.examples.end(), [&](const Example& x) { return x.id == e.id; }),
                0);
      ids.insert(e.id);
    }
    std::multiset<std::string> all;
    for (const auto& e : big.examples) all.insert(e.id);
    EXPECT_EQ(ids, all);
  }
}

TEST(Split, Errors) {
  auto data = make_synthetic(TaskKind::Classification, 8, 1);
  EXPECT_THROW(split(data, 0.0, 0), ConfigError);
  EXPECT_THROW(split(data, 1.0, 0), ConfigError);
  EXPECT_THROW(split(data, 0.01, 0), DegenerateError);
}

TEST(Synthetic, Reproducible) {
  auto a = make_synthetic(TaskKind::Regression, 50, 17), b = make_synthetic(TaskKind::Regression, 50, 17);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a.examples[i].a, b.examples[i].a);
    EXPECT_EQ(a.examples[i].b, b.examples[i].b);
    EXPECT_EQ(a.examples[i].label, b.examples[i].label);
  }
  EXPECT_NE(make_synthetic(TaskKind::Regression, 50, 18).examples[0].a, a.examples[0].a);
}

TEST(Synthetic, ClassificationRelation) {
  auto data = make_synthetic(TaskKind::Classification, 1000, 5);
  int positives = 0;
  for (const auto& ex : data.examples) {
    auto a = ex.a, b = ex.b;
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    ASSERT_EQ(a.size(), b.size());
    int diff = 0;
    std::vector<std::string> only_a;
    std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(only_a));
    diff = static_cast<int>(only_a.size());
    if (ex.label == 1.0) {
      EXPECT_EQ(a, b);
      ++positives;
    } else {
      EXPECT_EQ(diff, 1);
    }
  }
  EXPECT_GE(positives, 450);
  EXPECT_LE(positives, 550);
  EXPECT_NO_THROW(data.validate());
}

TEST(Synthetic, RegressionLabelsFollowJaccard) {
  auto data = make_synthetic(TaskKind::Regression, 400, 6);
  bool saw_min = false, saw_max = false;
  for (const auto& ex : data.examples) {
    const double want = 5.0 * jaccard(ex.a, ex.b);
    EXPECT_NEAR(ex.label, want, 1e-12);
    saw_min = saw_min || ex.label == 0.0;
    saw_max = saw_max || ex.label == 5.0;
  }
  EXPECT_TRUE(saw_min);
  EXPECT_TRUE(saw_max);
  EXPECT_EQ(jaccard({"a", "b"}, {"b", "a"}), 1.0);
  EXPECT_EQ(jaccard({"a", "b"}, {"c", "d"}), 0.0);
  EXPECT_THROW(make_synthetic(TaskKind::Regression, 7, 0), ConfigError);
}

TEST(Embedding, StaticLookupAndOov) {
  TempDir dir;
  auto path = dir.file("e.txt", "cat 1 2 3\ndog 4 5 6\n");
  auto provider = StaticLookup::load(path);
  EXPECT_EQ(provider.dim(), 3);
  auto e = embed(provider, {"dog", "zebra", "cat"});
  EXPECT_EQ(e.shape(), (ad::Shape{3, 3}));
  EXPECT_EQ(std::vector<double>(e.data().begin(), e.data().end()),
            (std::vector<double>{4, 5, 6, 0, 0, 0, 1, 2, 3}));
  EXPECT_THROW(StaticLookup::load(dir.file("bad.txt", "cat 1 2\ndog 1\n")), ParseError);
}

TEST(Embedding, FrozenProviderIsBitStable) {
  ToyHash toy(8, 3);
  auto a = embed(toy, {"w1", "w2", "w1"});
  auto b = embed(toy, {"w1", "w2", "w1"});
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i], b[i]);
  for (int k = 0; k < 8; ++k) {
    EXPECT_EQ(a[k], a[16 + k]);
    EXPECT_LE(std::abs(a[k]), 1.0);
  }
  EXPECT_NE(a[0], a[8]);
  EXPECT_NE(embed(ToyHash(8, 4), {"w1"})[0], a[0]);
}

TEST(Embedding, MultiLayerMixing) {
  TempDir dir;
  auto path = dir.file("m.txt", "cat 0 1 1\ncat 1 3 5\ncat 2 -1 0\ndog 0 2 2\ndog 1 0 0\ndog 2 4 4\n");
  auto provider = MultiLayerLookup::load(path);
  EXPECT_EQ(provider.num_layers(), 3);
  auto w = provider.mixing_weights();
  EXPECT_NEAR(w[0] + w[1] + w[2], 1.0, 1e-15);

  // One-hot mixing (as one-hot as a softmax can get) equals that layer.
  ad::Tensor logits = provider.mixing_logits();
  auto raw = logits.mutable_data();
  raw[0] = -800;
  raw[1] = 0;
  raw[2] = -800;
  auto e = embed(provider, {"cat", "dog", "emu"});
  EXPECT_EQ(std::vector<double>(e.data().begin(), e.data().end()), (std::vector<double>{3, 5, 0, 0, 0, 0}));

  // Mixing weights are trainable.
  std::mt19937_64 rng(1);
  for (double& v : raw) v = std::uniform_real_distribution<double>(-1, 1)(rng);
  auto loss = [&] {
    auto x = embed(provider, {"cat", "dog"});
    return ad::sum(ad::mul(x, x));
  };
  auto result = testing::check_gradients(loss, {provider.mixing_logits()});
  EXPECT_LT(result.max_rel_error, 1e-6);
  EXPECT_THROW(MultiLayerLookup::load(dir.file("gap.txt", "cat 0 1\ncat 2 1\n")), ParseError);
}

TEST(Embedding, PairPositionKeying) {
  TempDir dir;
  auto path = dir.file("p.txt", "p1/a/0 0 1\np1/a/1 0 2\np1/b/0 0 7\n");
  auto provider = MultiLayerLookup::load(path, LayerKeying::PairPosition);
  TokenContext ctx{"p1", 'a'};
  auto e = embed(provider, {"anything", "else"}, &ctx);
  EXPECT_EQ(e[0], 1.0);
  EXPECT_EQ(e[1], 2.0);
  TokenContext other{"p1", 'b'};
  EXPECT_EQ(embed(provider, {"x", "y"}, &other)[0], 7.0);
  EXPECT_EQ(embed(provider, {"x", "y"}, &other)[1], 0.0);
}

TEST(Batch, PaddingAndMasks) {
  auto data = make_synthetic(TaskKind::Classification, 8, 2, {.vocab = 40, .min_len = 2, .max_len = 6});
  ToyHash toy(4, 0);
  std::vector<std::size_t> idx{0, 1, 2, 3};
  auto batch = make_batch(toy, data, idx);
  int ta = 0;
  for (auto i : idx) ta = std::max(ta, static_cast<int>(data.examples[i].a.size()));
  EXPECT_EQ(batch.a.shape(), (ad::Shape{4, ta, 4}));
  for (int b = 0; b < 4; ++b) {
    const int len = static_cast<int>(data.examples[idx[b]].a.size());
    for (int t = 0; t < ta; ++t) {
      EXPECT_EQ(batch.mask_a[b * ta + t], t < len ? 1.0 : 0.0);
      if (t >= len) {
        for (int k = 0; k < 4; ++k) EXPECT_EQ(batch.a[(b * ta + t) * 4 + k], 0.0);
      }
    }
  }
  EXPECT_EQ(batch.classes(), (std::vector<int>{1, 0, 1, 0}));
}

TEST(Batch, MinibatchesCoverEverything) {
  std::mt19937_64 rng(4);
  auto batches = minibatches(37, 8, &rng);
  EXPECT_EQ(batches.size(), 5u);
  std::vector<std::size_t> seen;
  for (const auto& b : batches) seen.insert(seen.end(), b.begin(), b.end());
  std::sort(seen.begin(), seen.end());
  for (std::size_t i = 0; i < 37; ++i) EXPECT_EQ(seen[i], i);
  EXPECT_EQ(batches.back().size(), 5u);
}

TEST(Metrics, PearsonExamples) {
  std::vector<double> x{1, 2, 3};
  EXPECT_NEAR(pearson(x, std::vector<double>{2, 4, 6}).value, 1.0, 1e-15);
  EXPECT_NEAR(pearson(x, std::vector<double>{3, 2, 1}).value, -1.0, 1e-15);
  auto flat = pearson(x, std::vector<double>{2, 2, 2});
  EXPECT_FALSE(flat.defined);
  EXPECT_EQ(flat.value, 0.0);
  EXPECT_THROW(pearson(x, std::vector<double>{1, 2}), DimensionError);
  EXPECT_THROW(pearson(std::vector<double>{1}, std::vector<double>{1}), DimensionError);
}

// cov(x, y) = 1 / (2 n^2) * sum_i sum_j (x_i - x_j)(y_i - y_j)
double pairwise_cov(const std::vector<double>& x, const std::vector<double>& y) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = 0; j < x.size(); ++j) s += (x[i] - x[j]) * (y[i] - y[j]);
  return s / (2.0 * x.size() * x.size());
}

TEST(Metrics, PearsonMatchesPairwiseOracle) {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> g;
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<double> x(100), y(100);
    for (int i = 0; i < 100; ++i) {
      x[i] = g(rng);
      y[i] = 0.5 * x[i] + g(rng);
    }
    const double want = pairwise_cov(x, y) / std::sqrt(pairwise_cov(x, x) * pairwise_cov(y, y));
    EXPECT_NEAR(pearson(x, y).value, want, 1e-12);
  }
}

TEST(Metrics, PearsonAffineInvariance) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-3, 3);
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<double> x(30), y(30), z(30);
    for (int i = 0; i < 30; ++i) {
      x[i] = u(rng);
      y[i] = u(rng);
    }
    const double a = std::exp(u(rng)), b = u(rng);
    for (int i = 0; i < 30; ++i) z[i] = a * x[i] + b;
    EXPECT_NEAR(pearson(x, z).value, 1.0, 1e-12);
    std::vector<double> ay(30);
    for (int i = 0; i < 30; ++i) ay[i] = a * y[i] + b;
    EXPECT_NEAR(pearson(ay, x).value, pearson(y, x).value, 1e-12);
  }
}

TEST(Metrics, AccuracyAndF1) {
  std::vector<int> gold{1, 0, 1, 1, 0};
  EXPECT_EQ(accuracy(gold, gold), 1.0);
  std::vector<int> pred{1, 1, 0, 1, 0};
  EXPECT_DOUBLE_EQ(accuracy(pred, gold), 0.6);
  EXPECT_DOUBLE_EQ(f1_score(pred, gold), 2.0 * 2 / (2 * 2 + 1 + 1));
  auto report = score(TaskKind::Classification, std::vector<double>{1, 1, 0, 1, 0}, std::vector<double>{1, 0, 1, 1, 0});
  EXPECT_DOUBLE_EQ(report.primary(), 0.6);
  auto reg = score(TaskKind::Regression, std::vector<double>{3, 5, 7}, std::vector<double>{1, 2, 3});
  EXPECT_NEAR(reg.primary(), 1.0, 1e-15);
}

}  // namespace
}  // namespace pairnas::data
