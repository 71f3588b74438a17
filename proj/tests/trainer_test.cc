#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "dgnet/checkpoint.h"
#include "dgnet/error.h"
#include "dgnet/trainer.h"
#include "support/helpers.h"

namespace dgnet {
namespace {

TEST(TrainConfig, Validation) {
  TrainConfig c;
  EXPECT_EQ(c.epochs, 160);
  EXPECT_EQ(c.batch_size, 1);
  EXPECT_EQ(c.learning_rate, 1e-4);
  EXPECT_FALSE(c.alternating);
  c.epochs = 0;
  EXPECT_THROW(c.validate(), ValidationError);
  c = TrainConfig{};
  c.batch_size = 0;
  EXPECT_THROW(c.validate(), ValidationError);
  c = TrainConfig{};
  c.learning_rate = 0;
  EXPECT_THROW(c.validate(), ValidationError);
  c.learning_rate = -1e-3;
  EXPECT_THROW(c.validate(), ValidationError);
}

TEST(Adam, ZeroGradientLeavesParameters) {
  Tensor p = Tensor::from_data({3}, {1, -2, 3}, true);
  p.zero_grad();
  std::vector<NamedTensor> params{{"p", p}};
  AdamState s;
  for (int i = 0; i < 5; ++i) adam_step(params, s, 0.1);
  EXPECT_EQ(std::vector<float>(p.data().begin(), p.data().end()), (std::vector<float>{1, -2, 3}));
  EXPECT_EQ(s.step, 5);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  Tensor p = Tensor::from_data({2}, {0.0f, 0.0f}, true);
  p.mutable_grad()[0] = 2.5f;
  p.mutable_grad()[1] = -0.01f;
  std::vector<NamedTensor> params{{"p", p}};
  AdamState s;
  adam_step(params, s, 1e-3);
  EXPECT_NEAR(p.data()[0], -1e-3, 1e-9);
  EXPECT_NEAR(p.data()[1], 1e-3, 1e-8);
}

TEST(Adam, QuadraticMatchesScalarSimulation) {
  Tensor x = Tensor::from_data({1}, {1.0f}, true);
  std::vector<NamedTensor> params{{"x", x}};
  AdamState s;
  double xs = 1.0, m = 0, v = 0;
  for (int t = 1; t <= 100; ++t) {
    x.zero_grad();
    sum(square(x)).backward();
    adam_step(params, s, 0.1);
    const double g = 2 * xs;
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    xs -= 0.1 * (m / (1 - std::pow(0.9, t))) / (std::sqrt(v / (1 - std::pow(0.999, t))) + 1e-8);
  }
  EXPECT_LT(std::abs(x.data()[0]), 0.1);
  EXPECT_NEAR(x.data()[0], xs, 1e-4);
}

TEST(Adam, ConvergesToConvexMinimiser) {
  Tensor x = Tensor::from_data({2}, {-4.0f, 10.0f}, true);
  Tensor target = Tensor::from_data({2}, {3.0f, -1.5f});
  std::vector<NamedTensor> params{{"x", x}};
  AdamState s;
  for (int t = 0; t < 3000; ++t) {
    x.zero_grad();
    sum(square(sub(x, target))).backward();
    adam_step(params, s, 0.05);
  }
  EXPECT_NEAR(x.data()[0], 3.0, 1e-2);
  EXPECT_NEAR(x.data()[1], -1.5, 1e-2);
}

TEST(Adam, ShapeMismatch) {
  Tensor a = Tensor::zeros({2}, true), b = Tensor::zeros({3}, true);
  std::vector<NamedTensor> pa{{"a", a}}, pb{{"b", b}}, both{{"a", a}, {"b", b}};
  AdamState s;
  adam_step(pa, s, 0.1);
  EXPECT_THROW(adam_step(pb, s, 0.1), ShapeError);
  EXPECT_THROW(adam_step(both, s, 0.1), ShapeError);
}

std::vector<SceneSample> tiny_dataset(int n) {
  SceneConfig sc;
  sc.size = 16;
  sc.blob_count_range = {1, 1};
  std::vector<SceneSample> out;
  for (int i = 0; i < n; ++i) {
    Rng r = Rng(77).split(static_cast<std::uint64_t>(i));
    out.push_back(synth_scene(sc, r));
  }
  return out;
}

ModelConfig tiny_model() {
  ModelConfig c;
  c.input_size = 16;
  c.channels = {4, 8, 8, 16};
  c.latent_dim = 8;
  return c;
}

TEST(Train, CurveRowsAndLossIdentity) {
  const auto data = tiny_dataset(6);
  TrainConfig tc;
  tc.epochs = 3;
  tc.batch_size = 2;
  tc.learning_rate = 1e-3;
  ModelConfig mc = tiny_model();
  mc.kl_weight = 0.5f;
  int callbacks = 0;
  const TrainResult r = train(data, mc, tc, [&](const CurveRecord&) { ++callbacks; });
  ASSERT_EQ(r.curve.size(), 3u);
  EXPECT_EQ(callbacks, 3);
  for (std::size_t i = 0; i < r.curve.size(); ++i) {
    EXPECT_EQ(r.curve[i].epoch, static_cast<std::int64_t>(i + 1));
    EXPECT_NEAR(r.curve[i].loss, r.curve[i].nll + 0.5 * r.curve[i].kl, 1e-5);
  }
}

TEST(Train, DeterministicCheckpointAndCurve) {
  const auto data = tiny_dataset(5);
  const auto dir = testing::scratch_dir("train_det");
  std::string bytes[2], curves[2];
  for (int run = 0; run < 2; ++run) {
    TrainConfig tc;
    tc.epochs = 2;
    tc.seed = 5;
    tc.checkpoint_path = (dir / ("m" + std::to_string(run) + ".dgnt")).string();
    tc.curve_path = (dir / ("c" + std::to_string(run) + ".csv")).string();
    train(data, tiny_model(), tc);
    bytes[run] = testing::read_file(tc.checkpoint_path);
    curves[run] = testing::read_file(tc.curve_path);
  }
  EXPECT_FALSE(bytes[0].empty());
  EXPECT_EQ(bytes[0], bytes[1]);
  EXPECT_EQ(curves[0], curves[1]);
  EXPECT_TRUE(curves[0].starts_with("epoch,loss,kl,nll\n"));
}

TEST(Train, SeedAndModeChangeTheResult) {
  const auto data = tiny_dataset(4);
  TrainConfig tc;
  tc.epochs = 1;
  const std::string base = encode_checkpoint(train(data, tiny_model(), tc).model);
  tc.seed = 1;
  EXPECT_NE(encode_checkpoint(train(data, tiny_model(), tc).model), base);
  tc.seed = 0;
  tc.alternating = true;
  const TrainResult alt = train(data, tiny_model(), tc);
  EXPECT_NE(encode_checkpoint(alt.model), base);
  EXPECT_EQ(alt.curve.size(), 1u);
}

TEST(Train, AlternatingUpdatesEncoderOnKlOnly) {
  // The KL step alone must still move the encoder.
  const auto data = tiny_dataset(2);
  TrainConfig tc;
  tc.epochs = 1;
  tc.alternating = true;
  const DgNet init(tiny_model(), Rng(0).split("init"));
  const TrainResult r = train(data, tiny_model(), tc);
  const auto before = init.encoder_parameters();
  const auto after = r.model.encoder_parameters();
  bool moved = false;
  for (std::size_t i = 0; i < before.size(); ++i) {
    moved |= !std::equal(before[i].tensor.data().begin(), before[i].tensor.data().end(),
                         after[i].tensor.data().begin());
  }
  EXPECT_TRUE(moved);
}

TEST(Train, InputErrors) {
  TrainConfig tc;
  tc.epochs = 1;
  EXPECT_THROW(train(std::vector<SceneSample>{}, tiny_model(), tc), ValidationError);
  auto data = tiny_dataset(1);
  ModelConfig big = tiny_model();
  big.input_size = 32;
  EXPECT_THROW(train(data, big, tc), ShapeError);
  tc.epochs = 0;
  EXPECT_THROW(train(data, tiny_model(), tc), ValidationError);
}

TEST(CurveCsv, NineSignificantDigits) {
  const std::vector<CurveRecord> curve{{1, 1.0 / 3.0, 0.25, 1.0 / 3.0 - 0.25}, {2, 2.0, 1e-10, 2.0}};
  std::ostringstream out;
  write_curve_csv(curve, out);
  EXPECT_EQ(out.str(),
            "epoch,loss,kl,nll\n"
            "1,0.333333333,0.25,0.0833333333\n"
            "2,2,1e-10,2\n");
}

TEST(Segment, ProbabilitiesMaskAndDeterminism) {
  const auto data = tiny_dataset(2);
  DgNet m(tiny_model(), Rng(8));
  const Segmentation a = segment(m, data[0].image);
  const Segmentation b = segment(m, data[0].image);
  EXPECT_EQ(a.prob, b.prob);
  EXPECT_EQ(a.mask, b.mask);
  EXPECT_TRUE(is_binary(a.mask));
  for (float p : a.prob.pixels) {
    EXPECT_GT(p, 0.0f);
    EXPECT_LT(p, 1.0f);
  }
  EXPECT_EQ(a.mask, threshold(a.prob, 0.5f));
  EXPECT_EQ(threshold(a.mask, 0.5f), a.mask);
  const Segmentation all = segment(m, data[0].image, 0.0f);
  for (float v : all.mask.pixels) EXPECT_EQ(v, 1.0f);
  EXPECT_THROW(segment(m, Image(8, 8)), ShapeError);
}

TEST(Threshold, TiesGoToOil) {
  Image p(1, 3);
  p.pixels = {0.5f, 0.4999f, 0.75f};
  EXPECT_EQ(threshold(p, 0.5f).pixels, (std::vector<float>{1, 0, 1}));
}

}  // namespace
}  // namespace dgnet
