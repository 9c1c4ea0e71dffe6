#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "oracles.hpp"

using namespace stfcn;
using namespace stfcn::testing;

namespace {

ModelConfig small_config(Index rows = 4, Index cols = 4) {
  ModelConfig c;
  c.rows = rows;
  c.cols = cols;
  c.hidden_filters = 3;
  c.lc_filters = 2;
  c.dense_units = 8;
  c.conv2d_layers = 2;
  return c;
}

}  // namespace

TEST(Models, TemporalDepthChain) {
  ModelConfig c = small_config();
  const ModelGraph m = build_variant(Variant::lc_st_fcn, c);
  std::vector<Index> depths;
  const auto shapes = m.activation_shapes();
  for (std::size_t k = 0; k < m.layers.size(); ++k)
    if (std::holds_alternative<Conv3DLayer<double>>(m.layers[k])) depths.push_back(shapes[k][2]);
  EXPECT_EQ(depths, (std::vector<Index>{18, 14, 8, 1}));
  EXPECT_EQ(shapes.back(), (Shape{4, 4}));
}

TEST(Models, LayerSchedule) {
  const ModelGraph m = build_variant(Variant::lc_st_fcn, ModelConfig{});
  int conv3d = 0, conv2d = 0, lc2d = 0;
  for (const Layer& l : m.layers) {
    conv3d += std::holds_alternative<Conv3DLayer<double>>(l);
    conv2d += std::holds_alternative<Conv2DLayer<double>>(l);
    lc2d += std::holds_alternative<LC2DLayer<double>>(l);
  }
  EXPECT_EQ(conv3d, 4);
  EXPECT_EQ(conv2d, 4);
  EXPECT_EQ(lc2d, 2);
  EXPECT_EQ(std::get<LC2DLayer<double>>(m.layers[m.layers.size() - 2]).out_channels, 1);
}

TEST(Models, DefaultOutputShape) {
  for (Variant v : {Variant::lc_st_fcn, Variant::lc_fcn, Variant::fcn, Variant::cnn, Variant::lc_st_fcn_diff}) {
    ModelConfig c;
    c.hidden_filters = 2;
    c.lc_filters = 2;
    c.dense_units = 4;
    const ModelGraph m = build_variant(v, c);
    const Tensord y = m.forward(zeros({16, 16, 20}));
    EXPECT_EQ(y.shape(), (Shape{16, 16})) << m.name();
    EXPECT_TRUE(all_finite(y));
  }
}

TEST(Models, Errors) {
  EXPECT_THROW(build_variant("transformer", ModelConfig{}), ConfigError);
  ModelConfig c = small_config();
  c.recent = 5;
  c.period_window = 5;
  EXPECT_THROW(build_variant(Variant::lc_st_fcn, c), DepthError);
  EXPECT_NO_THROW(build_variant(Variant::fcn, c));
  const ModelGraph m = build_variant(Variant::fcn, small_config());
  EXPECT_THROW(m.forward(zeros({4, 5, 20})), ShapeError);
}

TEST(Models, ZeroParametersGiveZeroOutput) {
  Rng rng(1);
  for (Variant v : {Variant::lc_st_fcn, Variant::lc_fcn, Variant::fcn, Variant::cnn}) {
    ModelGraph m = build_variant(v, small_config());
    for (Tensord* p : m.parameters()) p->set_zero();
    EXPECT_EQ(m.forward(zeros({4, 4, 20})), zeros({4, 4}));
  }
}

TEST(Models, ParameterCountsOfHeads) {
  ModelConfig c = small_config(5, 6);
  const ModelGraph fcn = build_variant(Variant::fcn, c);
  const ModelGraph lc = build_variant(Variant::lc_fcn, c);
  ASSERT_EQ(fcn.layers.size(), lc.layers.size());
  const std::size_t n = fcn.layers.size();
  for (std::size_t k = 0; k + 3 < n; ++k) EXPECT_EQ(fcn.layer_parameter_count(k), lc.layer_parameter_count(k));
  for (std::size_t k = n - 3; k < n - 1; ++k) {
    const auto& conv = std::get<Conv2DLayer<double>>(fcn.layers[k]);
    const auto& local = std::get<LC2DLayer<double>>(lc.layers[k]);
    EXPECT_EQ(local.weights.size(), 30 * conv.weights.size());
    EXPECT_EQ(local.bias.size(), 30 * conv.bias.size());
  }
}

TEST(Models, CnnHeadDwarfsFcnHead) {
  ModelConfig c;  // 16x16
  c.lc_filters = 4;
  const ModelGraph cnn = build_variant(Variant::cnn, c);
  const ModelGraph fcn = build_variant(Variant::fcn, c);
  const auto head = [](const ModelGraph& m) {
    Index total = 0, seen = 0;
    for (std::size_t k = m.layers.size(); k-- > 0 && seen < 2;)
      if (m.layer_parameter_count(k) > 0) {
        total += m.layer_parameter_count(k);
        ++seen;
      }
    return total;
  };
  const double ratio = static_cast<double>(head(cnn)) / static_cast<double>(head(fcn));
  EXPECT_GE(ratio, 1e3);
  EXPECT_LT(ratio, 1e4);
}

TEST(Models, SameSeedSameParameters) {
  const ModelGraph a = build_variant(Variant::lc_st_fcn, small_config());
  const ModelGraph b = build_variant(Variant::lc_st_fcn, small_config());
  EXPECT_EQ(parameter_checksum(a), parameter_checksum(b));
  Rng rng(3);
  const Tensord x = random_tensor({4, 4, 20}, rng, 0.0, 5.0);
  EXPECT_EQ(a.forward(x), b.forward(x));
  ModelConfig other = small_config();
  other.seed = 2;
  EXPECT_NE(parameter_checksum(build_variant(Variant::lc_st_fcn, other)), parameter_checksum(a));
}

TEST(Models, BackwardMatchesFiniteDifferences) {
  Rng rng(4);
  for (Variant v : {Variant::lc_st_fcn, Variant::lc_fcn, Variant::fcn, Variant::cnn, Variant::ann}) {
    ModelConfig c = small_config(3, 3);
    c.conv2d_layers = 1;
    ModelGraph m = build_variant(v, c);
    for (Tensord* p : m.parameters()) fill_random(*p, rng, -0.5, 0.5);
    const Tensord x = random_tensor(m.input_shape, rng, 0.0, 2.0);
    const Tensord r = random_tensor(m.output_shape, rng);
    const Gradients g = m.backward(m.forward_trace(x), r);
    const auto params = m.parameters();
    ASSERT_EQ(g.size(), params.size());
    for (std::size_t k = 0; k < params.size(); ++k)
      EXPECT_LE(max_relative_error(*params[k], g[k], [&] { return dot(r, m.forward(x)); }), 1e-4)
          << m.name() << " tensor " << k;
  }
}

TEST(Models, CheckpointRoundTrip) {
  for (Variant v : {Variant::lc_st_fcn, Variant::lc_fcn, Variant::fcn, Variant::cnn, Variant::ann}) {
    ModelGraph m = build_variant(v, small_config());
    m.period_length = 144;
    const std::string bytes = save_checkpoint(m);
    const ModelGraph back = load_checkpoint(bytes);
    EXPECT_EQ(save_checkpoint(back), bytes);
    EXPECT_EQ(back.variant, v);
    EXPECT_EQ(back.period_length, 144);
    Rng rng(5);
    const Tensord x = random_tensor(m.input_shape, rng);
    EXPECT_EQ(back.forward(x), m.forward(x));
  }
}

TEST(Models, CheckpointCorruptionIsFormatError) {
  const std::string bytes = save_checkpoint(build_variant(Variant::fcn, small_config()));
  for (std::size_t cut : {std::size_t{0}, std::size_t{7}, std::size_t{20}, bytes.size() / 2, bytes.size() - 1})
    EXPECT_THROW(load_checkpoint(std::string_view(bytes).substr(0, cut)), FormatError) << cut;
  std::string bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(load_checkpoint(bad), FormatError);
  std::string version = bytes;
  version[8] = 9;
  EXPECT_THROW(load_checkpoint(version), FormatError);
  EXPECT_THROW(load_checkpoint(bytes + "x"), FormatError);
}

TEST(Models, ConvolutionalVariantsAreLocal) {
  // Receptive radius = number of 3x3 layers; the cnn head mixes everything.
  Rng rng(6);
  for (Variant v : {Variant::lc_st_fcn, Variant::lc_fcn, Variant::fcn, Variant::cnn}) {
    ModelConfig c = small_config(10, 10);
    c.conv2d_layers = 1;
    ModelGraph m = build_variant(v, c);
    Index radius = 0;
    for (const Layer& l : m.layers)
      radius += std::holds_alternative<Conv3DLayer<double>>(l) || std::holds_alternative<Conv2DLayer<double>>(l) ||
                std::holds_alternative<LC2DLayer<double>>(l);
    for (Tensord* p : m.parameters()) fill_random(*p, rng, 0.05, 0.5);
    Tensord x = random_tensor(m.input_shape, rng, 0.0, 3.0);
    const Tensord before = m.forward(x);
    for (Index t = 0; t < 20; ++t) x(0, 0, t) += 5.0;
    const Tensord after = m.forward(x);
    bool far_changed = false;
    for (Index i = 0; i < 10; ++i)
      for (Index j = 0; j < 10; ++j)
        if (std::max(i, j) > radius && after(i, j) != before(i, j)) far_changed = true;
    EXPECT_NE(after(0, 0), before(0, 0)) << m.name();
    if (v == Variant::cnn) EXPECT_TRUE(far_changed);
    else EXPECT_FALSE(far_changed) << m.name();
  }
}

TEST(Models, SharedAndLocalHeadsTrainIdentically) {
  // lc_fcn whose location blocks start equal and receive the location-summed
  // gradient follows the fcn trajectory exactly.
  ModelConfig c = small_config(4, 3);
  ModelGraph fcn = build_variant(Variant::fcn, c);
  ModelGraph lc = build_variant(Variant::lc_fcn, c);
  auto fp = fcn.parameters();
  auto lp = lc.parameters();
  ASSERT_EQ(fp.size(), lp.size());
  const std::size_t head = fp.size() - 4;
  const Index cells = 12;
  const auto broadcast = [&](const Tensord& shared, const Shape& shape) {
    Tensord out(shape);
    for (Index k = 0; k < cells; ++k) out.data().segment(k * shared.size(), shared.size()) = shared.data();
    return out;
  };
  const auto fold = [&](const Tensord& local, const Shape& shape) {
    Tensord out(shape);
    for (Index k = 0; k < cells; ++k) out.data() += local.data().segment(k * out.size(), out.size());
    return out;
  };
  for (std::size_t k = 0; k < fp.size(); ++k) *lp[k] = k < head ? *fp[k] : broadcast(*fp[k], lp[k]->shape());

  Rng rng(7);
  std::vector<VolumeSample> samples;
  for (int n = 0; n < 6; ++n)
    samples.push_back({n, random_tensor({4, 3, 20}, rng, 0.0, 4.0), random_tensor({4, 3}, rng, 0.0, 4.0)});
  const std::vector<std::size_t> idx{0, 1, 2, 3, 4, 5};
  AdagradState fs = make_adagrad_state(fcn), ls = make_adagrad_state(lc);
  for (int step = 0; step < 5; ++step) {
    Gradients fg, lg;
    const double floss = batch_gradient(fcn, samples, idx, 1, fg);
    const double lloss = batch_gradient(lc, samples, idx, 1, lg);
    EXPECT_NEAR(floss, lloss, 1e-10);
    for (std::size_t k = head; k < lg.size(); ++k) lg[k] = broadcast(fold(lg[k], fg[k].shape()), lg[k].shape());
    adagrad_step(fp, fg, fs, 0.05, 1e-8);
    // Accumulators of the local head see the same squares as the shared one.
    adagrad_step(lp, lg, ls, 0.05, 1e-8);
  }
  for (std::size_t k = 0; k < fp.size(); ++k) {
    const Tensord expected = k < head ? *fp[k] : broadcast(*fp[k], lp[k]->shape());
    EXPECT_LE((expected.data() - lp[k]->data()).cwiseAbs().maxCoeff(), 1e-10) << k;
  }
}

// ---------------------------------------------------------------------------
// Additive region model

TEST(Additive, PurePeriodicSeries) {
  const Index L = 12;
  std::vector<double> s(120);
  for (std::size_t t = 0; t < s.size(); ++t) s[t] = 5.0 + 3.0 * std::sin(2 * std::numbers::pi * double(t % L) / L);
  const AdditiveModel m = fit_additive(s, 0, L);
  for (Index t = 120; t < 150; ++t) EXPECT_NEAR(predict_additive(m, t), s[static_cast<std::size_t>(t % L)], 1e-9);
}

TEST(Additive, ConstantSeries) {
  const std::vector<double> s(60, 4.25);
  const AdditiveModel m = fit_additive(s, 100, 7);
  EXPECT_NEAR(predict_additive(m, 170), 4.25, 1e-12);
  EXPECT_THROW(predict_additive(m, 99), RangeError);
}

TEST(Additive, LinearPlusPeriodicWithinNoiseFloor) {
  const Index L = 24;
  Rng rng(8);
  const auto truth = [&](Index t) { return 10.0 + 0.05 * double(t) + 4.0 * std::cos(2 * std::numbers::pi * double(t % L) / L); };
  std::vector<double> s(24 * 20);
  for (std::size_t t = 0; t < s.size(); ++t) s[t] = truth(static_cast<Index>(t)) + 0.3 * rng.normal();
  const AdditiveModel m = fit_additive(s, 0, L);
  double worst = 0.0;
  for (Index t = 480; t < 528; ++t) worst = std::max(worst, std::abs(predict_additive(m, t) - truth(t)));
  EXPECT_LT(worst, 0.5);
}

TEST(RegionModels, AdditiveSetCheckpointRoundTrip) {
  SynthConfig sc;
  sc.rows = 3;
  sc.cols = 2;
  sc.days = 4;
  sc.period = 24;
  sc.dt = 3600;
  const DemandCube cube = synthesize(sc);
  const RegionModelSet set = fit_additive_models(cube, 0, 72, 24);
  const std::string bytes = save_region_models(set);
  EXPECT_TRUE(is_region_checkpoint(bytes));
  const RegionModelSet back = load_region_models(bytes);
  EXPECT_EQ(save_region_models(back), bytes);
  EXPECT_EQ(back.predict(cube.counts, 80), set.predict(cube.counts, 80));
  EXPECT_THROW(load_region_models(std::string_view(bytes).substr(0, bytes.size() - 3)), FormatError);
}

TEST(RegionModels, AnnPerRegion) {
  SynthConfig sc;
  sc.rows = 2;
  sc.cols = 2;
  sc.days = 3;
  sc.period = 24;
  sc.dt = 3600;
  const DemandCube cube = synthesize(sc);
  SampleWindow w{4, 2, 24};
  ModelConfig mc;
  mc.recent = 4;
  mc.period_window = 2;
  TrainConfig tc;
  tc.max_epochs = 3;
  tc.batch_size = 8;
  const RegionModelSet set = fit_ann_models(cube, w, 0, 60, mc, tc);
  ASSERT_EQ(set.models.size(), 4u);
  EXPECT_EQ(set.models[0].ann.input_shape, (Shape{1, 1, 6}));
  const Tensord y = set.predict(cube.counts, 65);
  EXPECT_EQ(y.shape(), (Shape{2, 2}));
  const RegionModelSet back = load_region_models(save_region_models(set));
  EXPECT_EQ(back.predict(cube.counts, 65), y);
}
