#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "gradcheck.hpp"
#include "pairnas/ad/checkpoint.hpp"
#include "pairnas/ad/ops.hpp"
#include "pairnas/cell/architecture.hpp"
#include "pairnas/data/batch.hpp"
#include "pairnas/data/embedding.hpp"
#include "pairnas/error.hpp"
#include "pairnas/models/model.hpp"

namespace pairnas::models {
namespace {

ad::Tensor random_tensor(ad::Shape shape, std::mt19937_64& rng, bool grad = false) {
  std::size_t n = 1;
  for (int d : shape) n *= d;
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> v(n);
  for (double& x : v) x = g(rng);
  return ad::Tensor(shape, std::move(v), grad);
}

const char* kSmoothArch = "Tanh 0:Sigmoid 1:Tanh 0:Identity 2:Tanh 3:Sigmoid";

ModelSpec make_spec(ModelKind kind, data::TaskKind task, std::vector<CellKind> plan, int dim, int hidden) {
  ModelSpec spec;
  spec.kind = kind;
  spec.task = task;
  spec.input_dim = dim;
  for (CellKind c : plan) {
    LayerSpec l;
    l.cell = c;
    l.hidden = hidden;
    if (c != CellKind::Lstm) l.arch = cell::parse_architecture(kSmoothArch);
    spec.layers.push_back(l);
  }
  return spec;
}

void randomize_cell_biases(const SentencePairModel& model, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  for (int layer = 0; layer < static_cast<int>(model.spec().layers.size()); ++layer) {
    for (bool backward : {false, true}) {
      const cell::SharedCellParams* p = model.cell_store(layer, backward);
      if (!p) continue;
      for (int n = 0; n < p->num_nodes(); ++n) {
        ad::Tensor b = p->bias(n);
        for (double& v : b.mutable_data()) v = u(rng);
      }
    }
  }
}

// Zero biases put exact ties into max pooling (dead ReLU inputs leave LSTM
// states at exactly 0), which finite differences cannot handle.
void randomize_all_biases(const SentencePairModel& model, std::mt19937_64& rng) {
  randomize_cell_biases(model, rng);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  for (const auto& nt : model.named_parameters()) {
    if (!nt.name.ends_with(".b")) continue;
    ad::Tensor b = nt.tensor;
    for (double& v : b.mutable_data()) v += u(rng);
  }
}

std::vector<ad::Tensor> tensors_of(const ad::NamedTensors& named, std::vector<std::string>* labels) {
  std::vector<ad::Tensor> out;
  for (const auto& nt : named) {
    out.push_back(nt.tensor);
    labels->push_back(nt.name);
  }
  return out;
}

std::vector<std::size_t> iota(std::size_t n) {
  std::vector<std::size_t> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = i;
  return v;
}

TEST(Lstm, ZeroWeightsKeepScaledCell) {
  std::mt19937_64 rng(1);
  LstmCellParams p(3, 2, rng);
  for (auto t : p.parameters())
    for (double& v : t.mutable_data()) v = 0.0;
  ad::Tensor bias = p.bias();
  for (int k = 2; k < 4; ++k) bias.mutable_data()[k] = 1.0;  // forget block
  ad::Tensor x = random_tensor({1, 3}, rng);
  ad::Tensor h({1, 2}, {0.3, -0.2});
  ad::Tensor c({1, 2}, {0.8, -1.5});
  auto s = lstm_step(p, x, h, c);
  const double f = 1.0 / (1.0 + std::exp(-1.0));
  for (int k = 0; k < 2; ++k) {
    EXPECT_NEAR(s.c[k], f * c[k], 1e-15);
    EXPECT_NEAR(s.h[k], 0.5 * std::tanh(f * c[k]), 1e-15);
  }
}

TEST(Lstm, ForgetBiasStartsAtOne) {
  std::mt19937_64 rng(2);
  LstmCellParams p(4, 3, rng);
  for (int k = 0; k < 12; ++k) EXPECT_EQ(p.bias()[k], (k >= 3 && k < 6) ? 1.0 : 0.0);
}

TEST(Lstm, MatchesHandComputedGates) {
  std::mt19937_64 rng(3);
  LstmCellParams p(2, 1, rng);
  ad::Tensor x({1, 2}, {0.5, -1.0});
  ad::Tensor h({1, 1}, {0.25});
  ad::Tensor c({1, 1}, {-0.4});
  auto s = lstm_step(p, x, h, c);
  double z[4];
  for (int g = 0; g < 4; ++g) {
    z[g] = 0.5 * p.w_x()[g] - 1.0 * p.w_x()[4 + g] + 0.25 * p.w_h()[g] + p.bias()[g];
  }
  auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
  const double c_new = sig(z[1]) * -0.4 + sig(z[0]) * std::tanh(z[2]);
  EXPECT_NEAR(s.c[0], c_new, 1e-14);
  EXPECT_NEAR(s.h[0], sig(z[3]) * std::tanh(c_new), 1e-14);
}

TEST(Lstm, GradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(4);
  LstmCellParams p(3, 4, rng);
  ad::Tensor inputs = random_tensor({2, 3, 3}, rng, true);
  ad::Tensor mask({2, 3}, {1, 1, 1, 1, 1, 0});
  LstmCell cell(p);
  auto loss = [&] {
    ad::Tensor out = cell::run_sequence(cell, inputs, mask);
    return ad::sum(ad::mul(out, out));
  };
  std::vector<ad::Tensor> params = p.parameters();
  params.push_back(inputs);
  auto r = testing::check_gradients(loss, params);
  EXPECT_LT(r.max_rel_error, 1e-4) << r.worst;
}

TEST(Layers, JointRepresentationExample) {
  ad::Tensor s1({1, 2}, {1, 2});
  ad::Tensor s2({1, 2}, {3, 4});
  ad::Tensor j = joint_representation(s1, s2);
  std::vector<double> expect{1, 2, 3, 4, 2, 2, 3, 8};
  ASSERT_EQ(j.shape(), (ad::Shape{1, 8}));
  for (int k = 0; k < 8; ++k) EXPECT_EQ(j[k], expect[k]);
}

TEST(Layers, JointRepresentationSwapPermutesBlocks) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    ad::Tensor s1 = random_tensor({3, 4}, rng);
    ad::Tensor s2 = random_tensor({3, 4}, rng);
    ad::Tensor ab = joint_representation(s1, s2);
    ad::Tensor ba = joint_representation(s2, s1);
    for (int r = 0; r < 3; ++r) {
      for (int k = 0; k < 4; ++k) {
        EXPECT_EQ(ab[r * 16 + k], ba[r * 16 + 4 + k]);
        EXPECT_EQ(ab[r * 16 + 4 + k], ba[r * 16 + k]);
        EXPECT_EQ(ab[r * 16 + 8 + k], ba[r * 16 + 8 + k]);
        EXPECT_EQ(ab[r * 16 + 12 + k], ba[r * 16 + 12 + k]);
        EXPECT_GE(ab[r * 16 + 8 + k], 0.0);
      }
    }
  }
}

TEST(Layers, LinearShapesAndErrors) {
  std::mt19937_64 rng(6);
  Linear lin(4, 3, rng);
  EXPECT_EQ(lin(random_tensor({5, 4}, rng)).shape(), (ad::Shape{5, 3}));
  EXPECT_EQ(lin(random_tensor({2, 6, 4}, rng)).shape(), (ad::Shape{2, 6, 3}));
  EXPECT_THROW(lin(random_tensor({4}, rng)), DimensionError);
  EXPECT_THROW(Linear(0, 3, rng), ConfigError);
}

TEST(Attention, SingleTokenCopiesIt) {
  std::mt19937_64 rng(7);
  ad::Tensor a = random_tensor({1, 4, 3}, rng);
  ad::Tensor b = random_tensor({1, 1, 3}, rng);
  auto r = cross_attention(a, b, ad::Tensor::full({1, 4}, 1.0), ad::Tensor::full({1, 1}, 1.0));
  for (int i = 0; i < 4; ++i)
    for (int k = 0; k < 3; ++k) EXPECT_DOUBLE_EQ(r.a_tilde[i * 3 + k], b[k]);
}

TEST(Attention, RowsSumToOneAndMaskedPositionsGetZero) {
  std::mt19937_64 rng(8);
  ad::Tensor a = random_tensor({2, 3, 4}, rng);
  ad::Tensor b = random_tensor({2, 5, 4}, rng);
  ad::Tensor ma({2, 3}, {1, 1, 1, 1, 1, 0});
  ad::Tensor mb({2, 5}, {1, 1, 0, 0, 0, 1, 1, 1, 1, 1});
  auto r = cross_attention(a, b, ma, mb);
  for (int n = 0; n < 2; ++n) {
    for (int i = 0; i < 3; ++i) {
      double total = 0.0;
      for (int j = 0; j < 5; ++j) {
        double w = r.weights_a[(n * 3 + i) * 5 + j];
        if (mb[n * 5 + j] == 0.0) {
          EXPECT_EQ(w, 0.0);
        }
        total += w;
      }
      EXPECT_NEAR(total, 1.0, 1e-12);
    }
    for (int j = 0; j < 5; ++j) {
      for (int i = 0; i < 3; ++i) {
        if (ma[n * 3 + i] == 0.0) {
          EXPECT_EQ(r.weights_b[(n * 5 + j) * 3 + i], 0.0);
        }
      }
    }
  }
}

TEST(Attention, FullyMaskedSentenceRejected) {
  std::mt19937_64 rng(9);
  ad::Tensor a = random_tensor({1, 2, 3}, rng);
  ad::Tensor b = random_tensor({1, 2, 3}, rng);
  EXPECT_THROW(cross_attention(a, b, ad::Tensor::full({1, 2}, 1.0), ad::Tensor::zeros({1, 2})), DegenerateError);
}

TEST(Attention, GradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(10);
  ad::Tensor a = random_tensor({2, 3, 2}, rng, true);
  ad::Tensor b = random_tensor({2, 4, 2}, rng, true);
  ad::Tensor ma({2, 3}, {1, 1, 0, 1, 1, 1});
  ad::Tensor mb({2, 4}, {1, 1, 1, 1, 1, 0, 0, 0});
  auto loss = [&] {
    auto r = cross_attention(a, b, ma, mb);
    ad::Tensor ea = enhance(a, r.a_tilde);
    ad::Tensor eb = enhance(b, r.b_tilde);
    return ad::add(ad::sum(ad::mul(mean_over_time(ea, ma), mean_over_time(ea, ma))),
                   ad::sum(max_over_time(eb, mb)));
  };
  auto r = testing::check_gradients(loss, {a, b});
  EXPECT_LT(r.max_rel_error, 1e-4) << r.worst;
}

TEST(Spec, LayerPlanParsing) {
  EXPECT_EQ(parse_layer_plan("E / L", ModelKind::Esim), (std::vector<CellKind>{CellKind::Enas, CellKind::Lstm}));
  EXPECT_EQ(parse_layer_plan("RND/E", ModelKind::Esim), (std::vector<CellKind>{CellKind::Random, CellKind::Enas}));
  EXPECT_EQ(parse_layer_plan("E", ModelKind::Blm), (std::vector<CellKind>{CellKind::Enas}));
  EXPECT_THROW(parse_layer_plan("E / L", ModelKind::Blm), ConfigError);
  EXPECT_THROW(parse_layer_plan("X", ModelKind::Blm), ConfigError);
  EXPECT_EQ(layer_plan_notation({CellKind::Lstm, CellKind::Enas}), "L / E");
  EXPECT_EQ(parse_model("esim"), ModelKind::Esim);
  EXPECT_THROW(parse_model("bert"), ConfigError);
}

TEST(Spec, JsonRoundTrip) {
  ModelSpec spec = make_spec(ModelKind::Esim, data::TaskKind::Classification, {CellKind::Enas, CellKind::Lstm}, 5, 7);
  spec.dropout_1 = 0.25;
  spec.layers[0].variational_dropout = 0.125;
  spec.range = {0, 1};
  ModelSpec back = spec_from_json(to_json(spec));
  EXPECT_EQ(to_json(back), to_json(spec));
  EXPECT_EQ(back.notation(), "E / L");
  ASSERT_TRUE(back.layers[0].arch.has_value());
  EXPECT_EQ(*back.layers[0].arch, *spec.layers[0].arch);
  EXPECT_THROW(spec_from_json("{\"model\": 3"), ParseError);
}

TEST(Spec, ValidateRejectsBadValues) {
  ModelSpec spec = make_spec(ModelKind::Blm, data::TaskKind::Regression, {CellKind::Lstm}, 4, 4);
  spec.dropout_1 = 1.0;
  EXPECT_THROW(spec.validate(), ConfigError);
  spec.dropout_1 = 0.0;
  spec.layers.push_back(spec.layers[0]);
  EXPECT_THROW(spec.validate(), ConfigError);
}

struct Toy {
  data::ToyHash provider{4, 11};
  data::SentencePairDataset cls = data::make_synthetic(data::TaskKind::Classification, 8, 3);
  data::SentencePairDataset reg = data::make_synthetic(data::TaskKind::Regression, 8, 4);
};

TEST(Model, OutputShapes) {
  Toy toy;
  std::mt19937_64 rng(12);
  auto idx = iota(3);
  for (auto kind : {ModelKind::Blm, ModelKind::Esim}) {
    std::vector<CellKind> plan(layer_count(kind), CellKind::Enas);
    SentencePairModel reg(make_spec(kind, data::TaskKind::Regression, plan, 4, 5), rng);
    SentencePairModel cls(make_spec(kind, data::TaskKind::Classification, plan, 4, 5), rng);
    EXPECT_EQ(reg.forward(data::make_batch(toy.provider, toy.reg, idx)).shape(), (ad::Shape{3, 1}));
    EXPECT_EQ(cls.forward(data::make_batch(toy.provider, toy.cls, idx)).shape(), (ad::Shape{3, 2}));
  }
}

TEST(Model, AllCellPlansRun) {
  Toy toy;
  std::mt19937_64 rng(13);
  auto batch = data::make_batch(toy.provider, toy.reg, iota(4));
  const std::vector<CellKind> kinds{CellKind::Lstm, CellKind::Enas, CellKind::Random};
  for (CellKind k : kinds) {
    SentencePairModel m(make_spec(ModelKind::Blm, data::TaskKind::Regression, {k}, 4, 3), rng);
    auto out = m.forward(batch);
    for (double v : out.data()) EXPECT_TRUE(std::isfinite(v));
    for (CellKind k2 : kinds) {
      SentencePairModel e(make_spec(ModelKind::Esim, data::TaskKind::Regression, {k, k2}, 4, 3), rng);
      auto oe = e.forward(batch);
      for (double v : oe.data()) EXPECT_TRUE(std::isfinite(v));
    }
  }
}

TEST(Model, MissingArchitectureRejected) {
  Toy toy;
  std::mt19937_64 rng(14);
  ModelSpec spec = make_spec(ModelKind::Blm, data::TaskKind::Regression, {CellKind::Enas}, 4, 3);
  spec.layers[0].arch.reset();
  SentencePairModel m(spec, rng);
  auto batch = data::make_batch(toy.provider, toy.reg, iota(2));
  EXPECT_THROW(m.forward(batch), ConfigError);
  auto arch = cell::parse_architecture(kSmoothArch);
  ForwardOptions opts;
  opts.arch_override = &arch;
  EXPECT_EQ(m.forward(batch, opts).shape(), (ad::Shape{2, 1}));
}

TEST(Model, ArchitectureOverrideChangesOutput) {
  Toy toy;
  std::mt19937_64 rng(15);
  SentencePairModel m(make_spec(ModelKind::Blm, data::TaskKind::Regression, {CellKind::Enas}, 4, 3), rng);
  randomize_cell_biases(m, rng);
  auto batch = data::make_batch(toy.provider, toy.reg, iota(4));
  auto base = m.forward(batch);
  auto other = cell::parse_architecture("Relu 0:Tanh 0:Tanh 2:Sigmoid 1:Relu 3:Identity");
  ForwardOptions opts;
  opts.arch_override = &other;
  auto changed = m.forward(batch, opts);
  double diff = 0.0;
  for (std::size_t i = 0; i < base.size(); ++i) diff += std::abs(base[i] - changed[i]);
  EXPECT_GT(diff, 0.0);
}

TEST(Model, LossRequiresMatchingTask) {
  Toy toy;
  std::mt19937_64 rng(16);
  SentencePairModel cls(make_spec(ModelKind::Blm, data::TaskKind::Classification, {CellKind::Lstm}, 4, 3), rng);
  SentencePairModel reg(make_spec(ModelKind::Blm, data::TaskKind::Regression, {CellKind::Lstm}, 4, 3), rng);
  auto bc = data::make_batch(toy.provider, toy.cls, iota(2));
  auto br = data::make_batch(toy.provider, toy.reg, iota(2));
  EXPECT_THROW(cls.loss(cls.forward(bc), bc, ad::LossKind::Mse), ConfigError);
  EXPECT_THROW(reg.loss(reg.forward(br), br, ad::LossKind::CrossEntropy), ConfigError);
  EXPECT_NO_THROW(reg.loss(reg.forward(br), br, ad::LossKind::Mae));
}

class ModelGradients : public ::testing::TestWithParam<std::tuple<ModelKind, data::TaskKind, CellKind>> {};

TEST_P(ModelGradients, MatchFiniteDifferences) {
  auto [kind, task, cell_kind] = GetParam();
  Toy toy;
  std::mt19937_64 rng(17);
  std::vector<CellKind> plan(layer_count(kind), cell_kind);
  if (kind == ModelKind::Esim) plan[1] = CellKind::Lstm;
  SentencePairModel m(make_spec(kind, task, plan, 4, 3), rng);
  randomize_all_biases(m, rng);
  const auto& data = task == data::TaskKind::Classification ? toy.cls : toy.reg;
  std::vector<std::size_t> idx{0, 1};
  auto batch = data::make_batch(toy.provider, data, idx);
  const auto loss_kind = task == data::TaskKind::Classification ? ad::LossKind::CrossEntropy : ad::LossKind::Mse;
  auto loss = [&] { return m.loss(m.forward(batch), batch, loss_kind); };
  std::vector<std::string> labels;
  auto params = tensors_of(m.named_parameters(), &labels);
  auto r = testing::check_gradients(loss, params, labels);
  EXPECT_LT(r.max_rel_error, 1e-4) << r.worst;
}

INSTANTIATE_TEST_SUITE_P(
    Models, ModelGradients,
    ::testing::Combine(::testing::Values(ModelKind::Blm, ModelKind::Esim),
                       ::testing::Values(data::TaskKind::Classification, data::TaskKind::Regression),
                       ::testing::Values(CellKind::Lstm, CellKind::Enas)));

TEST(Model, PaddingDoesNotChangeOutputs) {
  Toy toy;
  std::mt19937_64 rng(18);
  for (auto kind : {ModelKind::Blm, ModelKind::Esim}) {
    for (CellKind c : {CellKind::Lstm, CellKind::Enas}) {
      std::vector<CellKind> plan(layer_count(kind), c);
      SentencePairModel m(make_spec(kind, data::TaskKind::Regression, plan, 4, 4), rng);
      randomize_cell_biases(m, rng);
      auto all = iota(toy.reg.size());
      auto full = m.forward(data::make_batch(toy.provider, toy.reg, all));
      for (std::size_t i = 0; i < toy.reg.size(); ++i) {
        std::vector<std::size_t> one{i};
        auto alone = m.forward(data::make_batch(toy.provider, toy.reg, one));
        EXPECT_NEAR(alone[0], full[i], 1e-9) << model_name(kind) << " example " << i;
      }
    }
  }
}

TEST(Model, DropoutOnlyInTraining) {
  Toy toy;
  std::mt19937_64 rng(19);
  ModelSpec spec = make_spec(ModelKind::Esim, data::TaskKind::Regression, {CellKind::Enas, CellKind::Lstm}, 4, 4);
  spec.dropout_1 = 0.5;
  spec.dropout_2 = 0.5;
  spec.layers[0].variational_dropout = 0.3;
  SentencePairModel m(spec, rng);
  auto batch = data::make_batch(toy.provider, toy.reg, iota(4));
  auto e1 = m.forward(batch);
  auto e2 = m.forward(batch);
  for (std::size_t i = 0; i < e1.size(); ++i) EXPECT_EQ(e1[i], e2[i]);
  ForwardOptions train;
  train.training = true;
  EXPECT_THROW(m.forward(batch, train), ConfigError);
  std::mt19937_64 drng(20);
  train.rng = &drng;
  auto t1 = m.forward(batch, train);
  double diff = 0.0;
  for (std::size_t i = 0; i < e1.size(); ++i) diff += std::abs(t1[i] - e1[i]);
  EXPECT_GT(diff, 0.0);
}

TEST(Model, PredictClampsWhenConfigured) {
  std::mt19937_64 rng(21);
  ModelSpec spec = make_spec(ModelKind::Blm, data::TaskKind::Regression, {CellKind::Lstm}, 4, 3);
  spec.clamp_predictions = true;
  spec.range = {1, 5};
  SentencePairModel m(spec, rng);
  EXPECT_EQ(m.predict(ad::Tensor({3, 1}, {-2, 3.5, 9})), (std::vector<double>{1, 3.5, 5}));
  SentencePairModel c(make_spec(ModelKind::Blm, data::TaskKind::Classification, {CellKind::Lstm}, 4, 3), rng);
  EXPECT_EQ(c.predict(ad::Tensor({2, 2}, {0.3, 0.1, -1, 2})), (std::vector<double>{0, 1}));
}

TEST(Model, SaveLoadReproducesPredictions) {
  Toy toy;
  std::mt19937_64 rng(22);
  SentencePairModel m(make_spec(ModelKind::Esim, data::TaskKind::Regression, {CellKind::Enas, CellKind::Lstm}, 4, 3), rng);
  randomize_cell_biases(m, rng);
  auto path = std::filesystem::temp_directory_path() / "pairnas_model_test.ckpt";
  save_model(path, m);
  SentencePairModel back = load_model(path);
  std::filesystem::remove(path);
  auto a = evaluate(m, toy.provider, toy.reg, 3);
  auto b = evaluate(back, toy.provider, toy.reg, 3);
  EXPECT_EQ(a.predictions, b.predictions);
  EXPECT_EQ(to_json(back.spec()), to_json(m.spec()));
}

TEST(Model, EvaluateIsBatchSizeInvariant) {
  Toy toy;
  std::mt19937_64 rng(23);
  SentencePairModel m(make_spec(ModelKind::Blm, data::TaskKind::Regression, {CellKind::Enas}, 4, 3), rng);
  auto a = evaluate(m, toy.provider, toy.reg, 1);
  auto b = evaluate(m, toy.provider, toy.reg, 8);
  ASSERT_EQ(a.predictions.size(), toy.reg.size());
  for (std::size_t i = 0; i < a.predictions.size(); ++i) EXPECT_NEAR(a.predictions[i], b.predictions[i], 1e-9);
  EXPECT_NEAR(a.metrics.pearson, b.metrics.pearson, 1e-9);
}

TEST(Model, CenteringSetsRegressionBiasToMeanLabel) {
  auto data = data::make_synthetic(data::TaskKind::Regression, 20, 3);
  std::mt19937_64 rng(1);
  SentencePairModel m(make_spec(ModelKind::Blm, data::TaskKind::Regression, {CellKind::Lstm}, 8, 8), rng);
  center_regression_output(m, data);
  double mean = 0.0;
  for (const auto& ex : data.examples) mean += ex.label;
  mean /= static_cast<double>(data.size());
  for (const auto& nt : m.named_parameters()) {
    if (nt.name == "out.b") {
      EXPECT_DOUBLE_EQ(nt.tensor[0], mean);
    }
  }
  SentencePairModel c(make_spec(ModelKind::Blm, data::TaskKind::Classification, {CellKind::Lstm}, 8, 8), rng);
  const auto before = ad::snapshot_values(c.named_parameters());
  center_regression_output(c, data::make_synthetic(data::TaskKind::Classification, 20, 3));
  EXPECT_EQ(ad::snapshot_values(c.named_parameters()), before);
}

double train_accuracy(SentencePairModel& m, const data::EmbeddingProvider& provider,
                      const data::SentencePairDataset& data, int epochs, std::uint64_t seed) {
  std::vector<ad::Tensor> params;
  for (const auto& nt : m.named_parameters()) params.push_back(nt.tensor);
  ad::AdamConfig cfg;
  cfg.learning_rate = 5e-3;
  cfg.clip_norm = 5.0;
  ad::Adam opt(params, cfg);
  std::mt19937_64 rng(seed);
  for (int e = 0; e < epochs; ++e) {
    for (const auto& idx : data::minibatches(data.size(), 8, &rng)) {
      auto batch = data::make_batch(provider, data, idx);
      ad::backward(m.loss(m.forward(batch), batch, ad::LossKind::CrossEntropy));
      opt.step();
    }
    if (evaluate(m, provider, data, 32).metrics.accuracy >= 0.95) return 1.0;
  }
  return evaluate(m, provider, data, 32).metrics.accuracy;
}

TEST(Model, BlmOverfitsSmallClassificationSet) {
  data::ToyHash provider(16, 5);
  auto data = data::make_synthetic(data::TaskKind::Classification, 32, 9);
  std::mt19937_64 rng(24);
  ModelSpec spec = make_spec(ModelKind::Blm, data::TaskKind::Classification, {CellKind::Enas}, 16, 16);
  spec.layers[0].arch =
      cell::read_architecture_file(std::filesystem::path(PAIRNAS_TEST_DATA_DIR) / "table5.arch").front();
  SentencePairModel enas(spec, rng);
  EXPECT_GE(train_accuracy(enas, provider, data, 200, 1), 0.95);
  SentencePairModel lstm(make_spec(ModelKind::Blm, data::TaskKind::Classification, {CellKind::Lstm}, 16, 16), rng);
  EXPECT_GE(train_accuracy(lstm, provider, data, 200, 2), 0.95);
}

}  // namespace
}  // namespace pairnas::models
