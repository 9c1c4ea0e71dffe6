#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "oracles.hpp"

using namespace stfcn;
using namespace stfcn::testing;

namespace {

/// Single linear dense layer on a [1, 1, n] input.
ModelGraph linear_model(Index n, std::uint64_t seed = 1) {
  ModelGraph m;
  m.variant = Variant::ann;
  m.input_shape = {1, 1, n};
  m.output_shape = {1, 1};
  DenseLayer<double> d(n, 1, Activation::linear);
  Rng rng(seed);
  initialize(d, rng);
  m.layers.emplace_back(std::move(d));
  m.layers.emplace_back(Reshape{{1, 1}});
  return m;
}

std::vector<VolumeSample> random_samples(const Shape& in, const Shape& out, int n, Rng& rng) {
  std::vector<VolumeSample> s;
  for (int k = 0; k < n; ++k) s.push_back({k, random_tensor(in, rng, 0.0, 3.0), random_tensor(out, rng, 0.0, 3.0)});
  return s;
}

ModelConfig tiny_config() {
  ModelConfig c;
  c.rows = 3;
  c.cols = 3;
  c.hidden_filters = 2;
  c.lc_filters = 2;
  c.conv2d_layers = 1;
  return c;
}

}  // namespace

TEST(Loss, Examples) {
  const Tensord a({2, 2}, {1, 2, 3, 4});
  EXPECT_EQ(mse_loss(a, a), 0.0);
  EXPECT_EQ(mse_loss(add(a, Tensord({2, 2}, {1, 1, 1, 1})), a), 1.0);
  EXPECT_THROW(mse_loss(a, zeros({4})), ShapeError);
}

TEST(Loss, MatchesDirectFormula) {
  Rng rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensord p = random_tensor({3, 5}, rng), t = random_tensor({3, 5}, rng);
    double s = 0.0;
    for (Index k = 0; k < 15; ++k) s += (p[k] - t[k]) * (p[k] - t[k]);
    EXPECT_NEAR(mse_loss(p, t), s / 15.0, 1e-14);
    Tensord pp = p;
    EXPECT_LE(max_relative_error(pp, mse_gradient(p, t), [&] { return mse_loss(pp, t); }), 1e-6);
  }
}

TEST(Adagrad, ZeroGradientLeavesParameters) {
  Tensord p({3}, {1, 2, 3});
  AdagradState st{{zeros({3})}};
  Tensord* ps[] = {&p};
  const Tensord g[] = {zeros({3})};
  adagrad_step(ps, g, st, 0.01, 1e-8);
  EXPECT_EQ(p, Tensord({3}, {1, 2, 3}));
}

TEST(Adagrad, FirstAndSecondStep) {
  Tensord p({1}, {0.0});
  AdagradState st{{zeros({1})}};
  Tensord* ps[] = {&p};
  const Tensord g[] = {Tensord({1}, {1.0})};
  adagrad_step(ps, g, st, 0.01, 1e-8);
  EXPECT_NEAR(p[0], -0.01 / (1.0 + 1e-8), 1e-18);
  const double before = p[0];
  adagrad_step(ps, g, st, 0.01, 1e-8);
  EXPECT_NEAR(before - p[0], 0.01 / std::sqrt(2.0), 1e-10);
}

TEST(Adagrad, StepsShrinkUnderConstantGradient) {
  Rng rng(2);
  Tensord p = random_tensor({5}, rng);
  const Tensord g0 = random_tensor({5}, rng);
  AdagradState st{{zeros({5})}};
  Tensord* ps[] = {&p};
  Tensord last_step({5});
  last_step.data().setConstant(1e300);
  for (int k = 0; k < 10; ++k) {
    const Tensord before = p;
    Tensord g = g0;
    if (k % 2) g.data() = -g.data();  // same magnitude, flipping sign
    const Tensord gs[] = {g};
    adagrad_step(ps, gs, st, 0.1, 1e-8);
    const Tensord step(Shape{5}, (p.data() - before.data()).cwiseAbs().eval());
    for (Index i = 0; i < 5; ++i) EXPECT_LE(step[i], last_step[i]);
    last_step = step;
  }
}

TEST(Adagrad, ShapeMismatch) {
  Tensord p({3});
  AdagradState st{{zeros({3})}};
  Tensord* ps[] = {&p};
  const Tensord g[] = {zeros({4})};
  EXPECT_THROW(adagrad_step(ps, g, st, 0.01, 1e-8), ShapeError);
  const Tensord none[] = {zeros({3}), zeros({3})};
  EXPECT_THROW(adagrad_step(ps, none, st, 0.01, 1e-8), ShapeError);
}

TEST(Train, ConstantTargetLossDecreasesMonotonically) {
  ModelGraph m = linear_model(4);
  Rng rng(3);
  std::vector<VolumeSample> s;
  for (int k = 0; k < 40; ++k) s.push_back({k, random_tensor({1, 1, 4}, rng, 0.0, 1.0), Tensord({1, 1}, {2.5})});
  TrainConfig cfg;
  cfg.max_epochs = 5;
  cfg.batch_size = 40;
  cfg.validation_fraction = 0.0;
  const TrainReport r = train(m, s, cfg);
  ASSERT_EQ(r.epochs.size(), 5u);
  for (std::size_t k = 1; k < r.epochs.size(); ++k) EXPECT_LT(r.epochs[k].train_loss, r.epochs[k - 1].train_loss);
}

TEST(Train, ZeroLearningRateChangesNothing) {
  ModelGraph m = build_variant(Variant::fcn, tiny_config());
  const auto before = parameter_checksum(m);
  Rng rng(4);
  const auto s = random_samples({3, 3, 20}, {3, 3}, 12, rng);
  TrainConfig cfg;
  cfg.learning_rate = 0.0;
  cfg.max_epochs = 3;
  cfg.batch_size = 5;
  cfg.validation_fraction = 0.0;
  const TrainReport r = train(m, s, cfg);
  EXPECT_EQ(parameter_checksum(m), before);
  for (const EpochRecord& e : r.epochs) EXPECT_NEAR(e.train_loss, r.epochs[0].train_loss, 1e-12);
}

TEST(Train, DeterministicAcrossRunsAndThreads) {
  Rng rng(5);
  const auto s = random_samples({3, 3, 20}, {3, 3}, 30, rng);
  TrainConfig cfg;
  cfg.max_epochs = 4;
  cfg.batch_size = 7;
  std::string reports[3];
  const unsigned threads[3] = {1, 1, 3};
  for (int k = 0; k < 3; ++k) {
    ModelGraph m = build_variant(Variant::lc_st_fcn, tiny_config());
    cfg.threads = threads[k];
    std::ostringstream out;
    write_train_report(out, train(m, s, cfg));
    reports[k] = out.str();
  }
  EXPECT_EQ(reports[0], reports[1]);
  EXPECT_EQ(reports[0], reports[2]);
}

TEST(Train, EarlyStoppingRestoresBestEpoch) {
  Rng rng(6);
  const auto s = random_samples({3, 3, 20}, {3, 3}, 30, rng);
  ModelGraph m = build_variant(Variant::fcn, tiny_config());
  TrainConfig cfg;
  cfg.max_epochs = 60;
  cfg.patience = 2;
  cfg.batch_size = 4;
  cfg.learning_rate = 0.05;
  cfg.validation_fraction = 0.3;
  const TrainReport r = train(m, s, cfg);
  EXPECT_LE(r.stopped_epoch, 60);
  EXPECT_EQ(r.stopped_epoch, static_cast<Index>(r.epochs.size()));
  double best = 1e300;
  for (const EpochRecord& e : r.epochs) best = std::min(best, e.val_loss);
  EXPECT_EQ(r.epochs[static_cast<std::size_t>(r.best_epoch - 1)].val_loss, best);
  const std::span<const VolumeSample> val(s.data() + 21, 9);
  EXPECT_NEAR(mean_loss(m, val, 1), best, 1e-12);
  EXPECT_EQ(r.checksum, parameter_checksum(m));
  if (r.stopped_epoch < 60) EXPECT_EQ(r.stopped_epoch - r.best_epoch, 2);
}

TEST(Train, DivergenceNamesEpochAndBatch) {
  Rng rng(7);
  const auto s = random_samples({1, 1, 4}, {1, 1}, 8, rng);
  ModelGraph m = linear_model(4);
  TrainConfig cfg;
  cfg.learning_rate = 1e300;
  cfg.batch_size = 2;
  cfg.validation_fraction = 0.0;
  try {
    train(m, s, cfg);
    FAIL() << "expected divergence";
  } catch (const DivergenceError& e) {
    EXPECT_NE(std::string(e.what()).find("epoch"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("batch"), std::string::npos);
  }
}

TEST(Train, ConfigValidation) {
  TrainConfig cfg;
  cfg.batch_size = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.validation_fraction = 1.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.learning_rate = -1.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(BatchGradient, EqualsMeanOfSampleGradients) {
  Rng rng(8);
  const ModelGraph m = build_variant(Variant::lc_st_fcn, tiny_config());
  const auto s = random_samples({3, 3, 20}, {3, 3}, 6, rng);
  const std::vector<std::size_t> idx{4, 0, 5, 2};
  Gradients batch;
  const double loss = batch_gradient(m, s, idx, 2, batch);
  Gradients mean = m.zero_gradients();
  double mean_l = 0.0;
  for (std::size_t k : idx) {
    Gradients g;
    mean_l += sample_gradient(m, s[k], g) / 4.0;
    for (std::size_t p = 0; p < g.size(); ++p) mean[p].data() += g[p].data() / 4.0;
  }
  EXPECT_NEAR(loss, mean_l, 1e-10);
  for (std::size_t p = 0; p < mean.size(); ++p)
    EXPECT_LE((batch[p].data() - mean[p].data()).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(SingleStep, SmallStepDecreasesSampleLoss) {
  Rng rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    ModelConfig c = tiny_config();
    c.seed = static_cast<std::uint64_t>(trial + 1);
    ModelGraph m = build_variant(trial % 2 ? Variant::lc_fcn : Variant::lc_st_fcn, c);
    const auto s = random_samples({3, 3, 20}, {3, 3}, 1, rng);
    Gradients g;
    const double before = sample_gradient(m, s[0], g);
    AdagradState st = make_adagrad_state(m);
    auto params = m.parameters();
    adagrad_step(params, g, st, 1e-6, 1e-8);
    EXPECT_LT(mse_loss(m.forward(s[0].input), s[0].target), before + 1e-12);
  }
}

TEST(ParallelFor, VisitsEveryIndexOnce) {
  std::vector<int> hits(101, 0);
  parallel_for(hits.size(), 4, [&](std::size_t k) { hits[k] += 1; });
  for (int h : hits) EXPECT_EQ(h, 1);
}

TEST(TrainReportFormat, Lines) {
  TrainReport r;
  r.epochs = {{1, 2.5, 3.0}, {2, 1.25, 2.0}};
  r.stopped_epoch = 2;
  r.best_epoch = 2;
  r.checksum = 0xabc;
  std::ostringstream out;
  write_train_report(out, r);
  EXPECT_EQ(out.str(), "epoch,train_loss,val_loss\n1,2.5,3\n2,1.25,2\n# stopped_epoch=2 best_epoch=2 checksum=abc\n");
}
