#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <span>

#include <gtest/gtest.h>

#include "dgnet/error.h"
#include "dgnet/grad_check.h"
#include "dgnet/rng.h"
#include "dgnet/tensor.h"
#include "support/helpers.h"
#include "support/reference.h"

namespace dgnet {
namespace {

using testing::random_tensor;
using testing::to_double;

ref::Array4 to_array(const Tensor& t) {
  ref::Array4 a(t.dim(0), t.dim(1), t.dim(2), t.dim(3));
  a.v = to_double(t.data());
  return a;
}

void expect_close_rel(std::span<const float> got, const std::vector<double>& want, double tol) {
  ASSERT_EQ(got.size(), want.size());
  for (std::size_t i = 0; i < got.size(); ++i) {
    EXPECT_NEAR(got[i], want[i], tol * std::max(1.0, std::abs(want[i]))) << "index " << i;
  }
}

TEST(Shape, RejectsNonPositiveDims) {
  EXPECT_THROW(Tensor::zeros({2, 0, 3}), ShapeError);
  EXPECT_THROW(Tensor::zeros({-1}), ShapeError);
  EXPECT_THROW(Tensor::from_data({2, 2}, {1, 2, 3}), ShapeError);
  EXPECT_EQ(Tensor::zeros({2, 3, 4}).numel(), 24);
}

TEST(Rng, SameSeedSameStream) {
  Rng a(123), b(123);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
}

TEST(Rng, SplitIgnoresParentConsumption) {
  Rng a(9), b(9);
  for (int i = 0; i < 17; ++i) b.next_u64();
  Rng ca = a.split("child"), cb = b.split("child");
  for (int i = 0; i < 10; ++i) EXPECT_EQ(ca.next_u64(), cb.next_u64());
  EXPECT_NE(a.split(1).next_u64(), a.split(2).next_u64());
}

TEST(Rng, UniformAndNormalMoments) {
  Rng rng(5);
  double su = 0, sn = 0, sn2 = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    su += u;
    const double z = rng.normal();
    sn += z;
    sn2 += z * z;
  }
  EXPECT_NEAR(su / n, 0.5, 0.005);
  EXPECT_NEAR(sn / n, 0.0, 0.01);
  EXPECT_NEAR(sn2 / n, 1.0, 0.02);
  for (int i = 0; i < 1000; ++i) EXPECT_LT(rng.uniform_int(7), 7u);
}

TEST(Conv2d, IdentityKernel) {
  Rng rng(1);
  Tensor x = random_tensor({2, 1, 5, 4}, rng);
  Tensor y = conv2d(x, Tensor::full({1, 1, 1, 1}, 1.0f), Tensor::zeros({1}), 1, 0);
  EXPECT_EQ(y.shape(), x.shape());
  for (std::int64_t i = 0; i < x.numel(); ++i) EXPECT_EQ(y.data()[i], x.data()[i]);
}

TEST(Conv2d, OnesKernelOnTwos) {
  Tensor y = conv2d(Tensor::full({1, 1, 3, 3}, 2.0f), Tensor::full({1, 1, 3, 3}, 1.0f),
                    Tensor::zeros({1}), 1, 0);
  ASSERT_EQ(y.shape(), (Shape{1, 1, 1, 1}));
  EXPECT_EQ(y.item(), 18.0f);
}

TEST(Conv2d, MatchesNaiveLoops) {
  Rng rng(2);
  for (auto [stride, pad] : {std::pair{1, 0}, std::pair{1, 1}, std::pair{2, 1}}) {
    Tensor x = random_tensor({1, 2, 5, 5}, rng);
    Tensor w = random_tensor({3, 2, 3, 3}, rng);
    Tensor b = random_tensor({3}, rng);
    Tensor y = conv2d(x, w, b, stride, pad);
    ref::Array4 want = ref::conv2d(to_array(x), to_double(w.data()), 3, 3,
                                   to_double(b.data()), stride, pad);
    EXPECT_EQ(y.shape(), (Shape{1, 3, want.h, want.w}));
    expect_close_rel(y.data(), want.v, 1e-6);
  }
}

TEST(Conv2d, OutputSizeAndErrors) {
  Rng rng(3);
  Tensor x = random_tensor({2, 3, 16, 16}, rng);
  EXPECT_EQ(conv2d(x, random_tensor({5, 3, 4, 4}, rng), Tensor(), 2, 1).shape(),
            (Shape{2, 5, 8, 8}));
  EXPECT_THROW(conv2d(x, random_tensor({5, 2, 4, 4}, rng), Tensor(), 2, 1), ShapeError);
  EXPECT_THROW(conv2d(x, random_tensor({5, 3, 4, 4}, rng), Tensor::zeros({4}), 2, 1),
               ShapeError);
  EXPECT_THROW(conv2d(x, random_tensor({5, 3, 20, 20}, rng), Tensor(), 1, 0), ShapeError);
  EXPECT_THROW(conv2d(x, random_tensor({5, 3, 4, 4}, rng), Tensor(), 0, 1), ValidationError);
}

TEST(Conv2dTranspose, IdentityKernel) {
  Rng rng(4);
  Tensor x = random_tensor({1, 1, 3, 3}, rng);
  Tensor y = conv2d_transpose(x, Tensor::full({1, 1, 1, 1}, 1.0f), Tensor::zeros({1}), 1, 0);
  EXPECT_EQ(y.shape(), x.shape());
  for (std::int64_t i = 0; i < x.numel(); ++i) EXPECT_EQ(y.data()[i], x.data()[i]);
}

TEST(Conv2dTranspose, Stride2Kernel2MatchesScatter) {
  Rng rng(5);
  Tensor x = random_tensor({1, 1, 2, 2}, rng);
  Tensor w = random_tensor({1, 1, 2, 2}, rng);
  Tensor y = conv2d_transpose(x, w, Tensor::zeros({1}), 2, 0);
  ASSERT_EQ(y.shape(), (Shape{1, 1, 4, 4}));
  ref::Array4 want = ref::conv2d_transpose(to_array(x), to_double(w.data()), 1, 2, {}, 2, 0);
  expect_close_rel(y.data(), want.v, 1e-6);
}

TEST(Conv2dTranspose, MatchesNaiveScatter) {
  Rng rng(6);
  Tensor x = random_tensor({2, 3, 4, 4}, rng);
  Tensor w = random_tensor({3, 2, 4, 4}, rng);
  Tensor b = random_tensor({2}, rng);
  Tensor y = conv2d_transpose(x, w, b, 2, 1);
  ref::Array4 want =
      ref::conv2d_transpose(to_array(x), to_double(w.data()), 2, 4, to_double(b.data()), 2, 1);
  EXPECT_EQ(y.shape(), (Shape{2, 2, 8, 8}));
  expect_close_rel(y.data(), want.v, 1e-6);
}

TEST(Conv2dTranspose, IsAdjointOfConv2d) {
  Rng rng(7);
  struct Case { std::int64_t c, f, h, k; int stride, pad; };
  for (const Case& cs : {Case{2, 3, 8, 4, 2, 1}, Case{1, 2, 5, 3, 1, 1}, Case{3, 1, 7, 3, 2, 0}}) {
    Tensor w = random_tensor({cs.f, cs.c, cs.k, cs.k}, rng);
    Tensor x = random_tensor({2, cs.c, cs.h, cs.h}, rng);
    Tensor cx = conv2d(x, w, Tensor(), cs.stride, cs.pad);
    Tensor y = random_tensor(cx.shape(), rng);
    Tensor ty = conv2d_transpose(y, w, Tensor(), cs.stride, cs.pad);
    // conv2d_transpose maps back to the input size whenever the strides tile it exactly
    if (ty.shape() != x.shape()) continue;
    double lhs = 0, rhs = 0;
    for (std::int64_t i = 0; i < cx.numel(); ++i) lhs += double(cx.data()[i]) * y.data()[i];
    for (std::int64_t i = 0; i < x.numel(); ++i) rhs += double(x.data()[i]) * ty.data()[i];
    EXPECT_NEAR(lhs, rhs, 1e-4 * std::max(1.0, std::abs(lhs)));
  }
}

TEST(BatchNorm, ConstantChannelNormalisesToZero) {
  BatchNormStats stats = BatchNormStats::identity(2);
  Tensor y = batchnorm2d(Tensor::full({3, 2, 4, 4}, 7.5f), Tensor::full({2}, 1.0f),
                         Tensor::zeros({2}), stats, Mode::kTrain);
  for (float v : y.data()) EXPECT_EQ(v, 0.0f);
}

TEST(BatchNorm, AffineOnNormalisedData) {
  // +-1 in equal numbers per channel: mean 0, biased variance 1.
  std::vector<float> data;
  for (int i = 0; i < 2 * 2 * 2 * 2; ++i) data.push_back(i % 2 ? 1.0f : -1.0f);
  Tensor x = Tensor::from_data({2, 2, 2, 2}, data);
  BatchNormStats stats = BatchNormStats::identity(2);
  Tensor y = batchnorm2d(x, Tensor::full({2}, 2.0f), Tensor::full({2}, 1.0f), stats,
                         Mode::kTrain);
  for (std::int64_t i = 0; i < x.numel(); ++i) {
    EXPECT_NEAR(y.data()[i], 2.0f * x.data()[i] + 1.0f, 1e-4);
  }
}

TEST(BatchNorm, TrainOutputHasUnitStatistics) {
  Rng rng(8);
  Tensor x = random_tensor({4, 8, 16, 16}, rng, false, -3.0f, 5.0f);
  BatchNormStats stats = BatchNormStats::identity(8);
  Tensor y = batchnorm2d(x, Tensor::full({8}, 1.0f), Tensor::zeros({8}), stats, Mode::kTrain);
  for (int c = 0; c < 8; ++c) {
    double s = 0, s2 = 0;
    int m = 0;
    for (int b = 0; b < 4; ++b)
      for (int i = 0; i < 256; ++i) {
        const double v = y.data()[(b * 8 + c) * 256 + i];
        s += v;
        s2 += v * v;
        ++m;
      }
    EXPECT_NEAR(s / m, 0.0, 1e-3);
    EXPECT_NEAR(s2 / m - (s / m) * (s / m), 1.0, 1e-3);
  }
}

TEST(BatchNorm, RunningStatsAndEvalMode) {
  Tensor x = Tensor::from_data({2, 1, 1, 2}, {1, 3, 5, 7});  // mean 4, biased var 5
  BatchNormStats stats = BatchNormStats::identity(1);
  batchnorm2d(x, Tensor::full({1}, 1.0f), Tensor::zeros({1}), stats, Mode::kTrain);
  EXPECT_NEAR(stats.running_mean[0], 0.9 * 0.0 + 0.1 * 4.0, 1e-6);
  EXPECT_NEAR(stats.running_var[0], 0.9 * 1.0 + 0.1 * 5.0, 1e-6);

  const BatchNormStats before = stats;
  Tensor y = batchnorm2d(x, Tensor::full({1}, 1.0f), Tensor::zeros({1}), stats, Mode::kEval);
  EXPECT_EQ(stats.running_mean, before.running_mean);
  const double inv = 1.0 / std::sqrt(before.running_var[0] + 1e-5);
  EXPECT_NEAR(y.data()[0], (1.0 - before.running_mean[0]) * inv, 1e-5);
}

TEST(BatchNorm, ChannelMismatch) {
  BatchNormStats stats = BatchNormStats::identity(3);
  EXPECT_THROW(batchnorm2d(Tensor::zeros({1, 2, 2, 2}), Tensor::zeros({3}), Tensor::zeros({3}),
                           stats, Mode::kTrain),
               ShapeError);
}

TEST(LeakyRelu, ValuesAndSlopeGradient) {
  Tensor x = Tensor::from_data({3}, {0.0f, -1.0f, -3.0f}, true);
  Tensor y = leaky_relu(x, 0.2f);
  EXPECT_EQ(y.data()[0], 0.0f);
  EXPECT_FLOAT_EQ(y.data()[1], -0.2f);
  sum(y).backward();
  EXPECT_FLOAT_EQ(x.grad()[2], 0.2f);
  EXPECT_THROW(leaky_relu(x, 1.0f), ValidationError);
}

TEST(Dense, IdentityAndExample) {
  Rng rng(9);
  Tensor x = random_tensor({3, 2}, rng);
  Tensor eye = Tensor::from_data({2, 2}, {1, 0, 0, 1});
  Tensor y = dense(x, eye, Tensor::zeros({2}));
  for (std::int64_t i = 0; i < x.numel(); ++i) EXPECT_EQ(y.data()[i], x.data()[i]);
  Tensor z = dense(Tensor::from_data({1, 2}, {1, 2}), eye, Tensor::full({2}, 3.0f));
  EXPECT_EQ(z.data()[0], 4.0f);
  EXPECT_EQ(z.data()[1], 5.0f);
  EXPECT_THROW(dense(x, Tensor::zeros({3, 2}), Tensor::zeros({2})), ShapeError);
}

TEST(Dense, MatchesNaiveLoops) {
  Rng rng(10);
  Tensor x = random_tensor({4, 7}, rng), w = random_tensor({7, 5}, rng), b = random_tensor({5}, rng);
  Tensor y = dense(x, w, b);
  expect_close_rel(y.data(),
                   ref::dense(to_double(x.data()), 4, 7, to_double(w.data()), to_double(b.data()), 5),
                   1e-6);
}

TEST(Sigmoid, ValuesAndRange) {
  Tensor y = sigmoid(Tensor::from_data({4}, {0.0f, 100.0f, -100.0f, 2.0f}));
  EXPECT_EQ(y.data()[0], 0.5f);
  EXPECT_LT(y.data()[1], 1.0f);
  EXPECT_GT(y.data()[1], 0.99f);
  EXPECT_GT(y.data()[2], 0.0f);
  EXPECT_NEAR(y.data()[3], 1.0 / (1.0 + std::exp(-2.0)), 1e-7);
  Rng rng(11);
  Tensor x = random_tensor({100}, rng, false, -8.0f, 8.0f);
  Tensor s = sigmoid(x);
  for (int i = 0; i < 100; ++i) {
    EXPECT_NEAR(s.data()[i], 1.0 / (1.0 + std::exp(-double(x.data()[i]))), 1e-6);
  }
}

TEST(Backward, SumGivesOnes) {
  Tensor x = Tensor::from_data({3}, {1, -2, 5}, true);
  sum(x).backward();
  for (float g : x.grad()) EXPECT_EQ(g, 1.0f);
}

TEST(Backward, SumOfSquares) {
  Tensor x = Tensor::from_data({2}, {1, 2}, true);
  sum(square(x)).backward();
  EXPECT_EQ(x.grad()[0], 2.0f);
  EXPECT_EQ(x.grad()[1], 4.0f);
}

TEST(Backward, RejectsNonScalarAndAccumulates) {
  Tensor x = Tensor::from_data({2}, {1, 2}, true);
  EXPECT_THROW(square(x).backward(), ShapeError);
  Tensor loss = sum(x);
  loss.backward();
  loss.backward();
  EXPECT_EQ(x.grad()[0], 2.0f);
  x.zero_grad();
  EXPECT_EQ(x.grad()[0], 0.0f);
}

TEST(Backward, NoGradGuardRecordsNothing) {
  Tensor x = Tensor::from_data({2}, {1, 2}, true);
  Tensor y;
  {
    NoGradGuard guard;
    y = sum(square(x));
  }
  EXPECT_FALSE(y.requires_grad());
  EXPECT_TRUE(grad_mode_enabled());
}

TEST(FiniteChecks, NonFiniteIsAnError) {
  const bool before = finite_checks_enabled();
  set_finite_checks(true);
  EXPECT_THROW(log(Tensor::from_data({1}, {-1.0f})), NumericError);
  EXPECT_THROW(exp(Tensor::from_data({1}, {1000.0f})), NumericError);
  set_finite_checks(before);
}

TEST(Determinism, IdenticalInputsBitwiseIdentical) {
  auto run = [] {
    Rng rng(12);
    Tensor x = random_tensor({2, 3, 8, 8}, rng, true);
    Tensor w = random_tensor({4, 3, 4, 4}, rng, true);
    BatchNormStats st = BatchNormStats::identity(4);
    Tensor y = leaky_relu(batchnorm2d(conv2d(x, w, Tensor(), 2, 1), Tensor::full({4}, 1.0f),
                                      Tensor::zeros({4}), st, Mode::kTrain));
    Tensor loss = mean(square(y));
    loss.backward();
    std::vector<float> out(y.data().begin(), y.data().end());
    out.insert(out.end(), w.grad().begin(), w.grad().end());
    return out;
  };
  EXPECT_EQ(run(), run());
}

// Finite differences on one op at a time. Weights of the readout are kept
// positive and inputs away from kinks so every derivative is O(1).
// Max |a - n| / max(|n|, 1e-3 * max|n|) of float gradients against central
// differences of a double-precision oracle.
double against_double_fd(std::span<const float> analytic, std::vector<double> x,
                         const std::function<double(const std::vector<double>&)>& f) {
  const double h = 1e-5;
  std::vector<double> numeric(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + h;
    const double up = f(x);
    x[i] = keep - h;
    const double down = f(x);
    x[i] = keep;
    numeric[i] = (up - down) / (2 * h);
  }
  double scale = 0, worst = 0;
  for (double n : numeric) scale = std::max(scale, std::abs(n));
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = std::abs(analytic[i] - numeric[i]);
    worst = std::max(worst, d / std::max(std::abs(numeric[i]), 1e-3 * scale));
  }
  return worst;
}

class OpGradient : public ::testing::Test {
 protected:
  double check(const std::function<Tensor(const Tensor&)>& op, Tensor x, double step = 1e-2) {
    Rng rng(31);
    Tensor probe = op(x);
    Tensor w = random_tensor(probe.shape(), rng, false, 0.5f, 1.5f);
    std::vector<NamedTensor> params{{"x", x}};
    GradCheckOptions o;
    o.step = step;
    return grad_check([&] { return sum(mul(op(x), w)); }, params, o).max_rel_error;
  }
};

TEST_F(OpGradient, Elementwise) {
  Rng rng(13);
  auto pos = [&] { return random_tensor({3, 4}, rng, true, 0.5f, 2.0f); };
  auto away = [&] {
    Tensor t = random_tensor({3, 4}, rng, true, 0.2f, 2.0f);
    auto d = t.mutable_data();
    for (std::size_t i = 0; i < d.size(); i += 2) d[i] = -d[i];
    return t;
  };
  EXPECT_LT(check([](const Tensor& x) { return exp(x); }, pos()), 1e-3);
  EXPECT_LT(check([](const Tensor& x) { return log(x); }, pos()), 1e-3);
  EXPECT_LT(check([](const Tensor& x) { return square(x); }, pos()), 1e-3);
  EXPECT_LT(check([](const Tensor& x) { return sigmoid(x); }, away(), 1e-2), 1e-3);
  EXPECT_LT(check([](const Tensor& x) { return leaky_relu(x, 0.2f); }, away()), 1e-3);
  EXPECT_LT(check([](const Tensor& x) { return clamp(x, -1.5f, 1.5f); }, away()), 1e-3);
  EXPECT_LT(check([](const Tensor& x) { return scale(add_scalar(x, 2.0f), 3.0f); }, away()), 1e-3);
  Tensor other = random_tensor({3, 4}, rng, false, 0.5f, 2.0f);
  EXPECT_LT(check([&](const Tensor& x) { return mul(x, other); }, pos()), 1e-3);
  EXPECT_LT(check([&](const Tensor& x) { return sub(other, x); }, pos()), 1e-3);
  EXPECT_LT(check([&](const Tensor& x) { return add(x, other); }, pos()), 1e-3);
}

TEST_F(OpGradient, ShapeOps) {
  Rng rng(14);
  EXPECT_LT(check([](const Tensor& x) { return reshape(x, {6, 2}); },
                  random_tensor({3, 4}, rng, true)),
            1e-3);
  EXPECT_LT(check([](const Tensor& x) { return slice_cols(x, 1, 3); },
                  random_tensor({3, 4}, rng, true)),
            1e-3);
  EXPECT_LT(check([](const Tensor& x) { return scale(mean(x), 1.0f); },
                  random_tensor({3, 4}, rng, true)),
            1e-3);
}

TEST_F(OpGradient, Layers) {
  Rng rng(15);
  Tensor w = random_tensor({3, 2, 3, 3}, rng, false, 0.1f, 1.0f);
  Tensor b = random_tensor({3}, rng);
  EXPECT_LT(check([&](const Tensor& x) { return conv2d(x, w, b, 2, 1); },
                  random_tensor({2, 2, 6, 6}, rng, true)),
            1e-3);
  Tensor x0 = random_tensor({2, 2, 6, 6}, rng, false, 0.1f, 1.0f);
  EXPECT_LT(check([&](const Tensor& wt) { return conv2d(x0, wt, b, 1, 0); },
                  random_tensor({3, 2, 3, 3}, rng, true)),
            1e-3);
  Tensor wt = random_tensor({2, 3, 4, 4}, rng, false, 0.1f, 1.0f);
  EXPECT_LT(check([&](const Tensor& x) { return conv2d_transpose(x, wt, b, 2, 1); },
                  random_tensor({2, 2, 3, 3}, rng, true)),
            1e-3);
  Tensor xt = random_tensor({2, 2, 3, 3}, rng, false, 0.1f, 1.0f);
  EXPECT_LT(check([&](const Tensor& k) { return conv2d_transpose(xt, k, b, 2, 1); },
                  random_tensor({2, 3, 4, 4}, rng, true)),
            1e-3);
  Tensor dw = random_tensor({5, 3}, rng, false, 0.1f, 1.0f);
  EXPECT_LT(check([&](const Tensor& x) { return dense(x, dw, Tensor::zeros({3})); },
                  random_tensor({4, 5}, rng, true)),
            1e-3);
  Tensor dx = random_tensor({4, 5}, rng);
  EXPECT_LT(check([&](const Tensor& bb) { return dense(dx, dw, bb); }, random_tensor({3}, rng, true)),
            1e-3);
  Tensor dxp = random_tensor({4, 5}, rng, false, 0.1f, 1.0f);
  EXPECT_LT(check([&](const Tensor& ww) { return dense(dxp, ww, Tensor::zeros({3})); },
                  random_tensor({5, 3}, rng, true)),
            1e-3);
}

TEST_F(OpGradient, BatchNormAllInputs) {
  Rng rng(16);
  Tensor gamma = random_tensor({3}, rng, false, 0.5f, 1.5f);
  Tensor beta = random_tensor({3}, rng);
  BatchNormStats stats = BatchNormStats::identity(3);
  auto bn = [&](const Tensor& x, const Tensor& g, const Tensor& b) {
    return batchnorm2d(x, g, b, stats, Mode::kTrain);
  };
  Tensor x = random_tensor({2, 3, 3, 3}, rng, true, -2.0f, 2.0f);
  Tensor w = random_tensor({2, 3, 3, 3}, rng, false, 0.5f, 1.5f);
  sum(mul(bn(x, gamma, beta), w)).backward();
  const std::vector<double> wd = to_double(w.data()), gd = to_double(gamma.data()), bd = to_double(beta.data());
  const double err = against_double_fd(x.grad(), to_double(x.data()), [&](const std::vector<double>& v) {
    ref::Array4 a(2, 3, 3, 3);
    a.v = v;
    const ref::Array4 y = ref::batchnorm_train(a, gd, bd);
    double acc = 0;
    for (std::size_t i = 0; i < y.v.size(); ++i) acc += wd[i] * y.v[i];
    return acc;
  });
  EXPECT_LT(err, 1e-4);
  Tensor xf = x.detach();
  EXPECT_LT(check([&](const Tensor& g) { return bn(xf, g, beta); },
                  random_tensor({3}, rng, true, 0.5f, 1.5f)),
            1e-3);
  EXPECT_LT(check([&](const Tensor& b) { return bn(xf, gamma, b); }, random_tensor({3}, rng, true)),
            1e-3);
  BatchNormStats frozen = BatchNormStats::identity(3);
  frozen.running_mean = {0.1f, -0.2f, 0.3f};
  frozen.running_var = {0.5f, 1.5f, 2.0f};
  EXPECT_LT(check([&](const Tensor& t) { return batchnorm2d(t, gamma, beta, frozen, Mode::kEval); },
                  random_tensor({2, 3, 3, 3}, rng, true)),
            1e-3);
}

TEST(GradCheck, LinearModelIsExact) {
  // Dyadic values and step keep every float operation exact.
  Tensor x = Tensor::from_data({2, 3}, {1, 2, -1, 3, 0, 2});
  Tensor w = Tensor::from_data({3, 2}, {0.5f, -0.25f, 1.0f, 0.125f, -0.75f, 2.0f}, true);
  Tensor b = Tensor::from_data({2}, {0.5f, -1.0f}, true);
  std::vector<NamedTensor> params{{"w", w}, {"b", b}};
  GradCheckOptions o;
  o.step = 1.0 / 1024.0;
  GradCheckResult r = grad_check([&] { return sum(dense(x, w, b)); }, params, o);
  EXPECT_EQ(r.checked, 8);
  EXPECT_LT(r.max_rel_error, 1e-5);
}

TEST(GradCheck, ConvStack) {
  Rng rng(17);
  Tensor x = random_tensor({1, 1, 6, 6}, rng, false, 0.1f, 1.0f);
  Tensor w1 = random_tensor({2, 1, 3, 3}, rng, true, 0.1f, 1.0f);
  Tensor w2 = random_tensor({2, 2, 3, 3}, rng, true, 0.1f, 1.0f);
  Tensor b2 = random_tensor({2}, rng, true, 0.1f, 0.5f);
  auto loss = [&] {
    Tensor h = leaky_relu(conv2d(x, w1, Tensor(), 1, 1));
    return mean(sigmoid(scale(conv2d(h, w2, b2, 1, 0), 0.3f)));
  };
  loss().backward();
  ref::Array4 xa(1, 1, 6, 6);
  xa.v = to_double(x.data());
  auto ref_loss = [&](const std::vector<double>& a, const std::vector<double>& b,
                      const std::vector<double>& c) {
    ref::Array4 h = ref::conv2d(xa, a, 2, 3, {}, 1, 1);
    ref::leaky_relu(h.v, 0.2);
    const ref::Array4 y = ref::conv2d(h, b, 2, 3, c, 1, 0);
    double acc = 0;
    for (double v : y.v) acc += 1.0 / (1.0 + std::exp(-0.3 * v));
    return acc / static_cast<double>(y.v.size());
  };
  const auto a0 = to_double(w1.data()), b0 = to_double(w2.data()), c0 = to_double(b2.data());
  EXPECT_LT(against_double_fd(w1.grad(), a0, [&](const auto& v) { return ref_loss(v, b0, c0); }), 1e-4);
  EXPECT_LT(against_double_fd(w2.grad(), b0, [&](const auto& v) { return ref_loss(a0, v, c0); }), 1e-4);
  EXPECT_LT(against_double_fd(b2.grad(), c0, [&](const auto& v) { return ref_loss(a0, b0, v); }), 1e-4);

  // float differences resolve these gradients to roughly 1e-2 relative
  std::vector<NamedTensor> params{{"w1", w1}, {"w2", w2}, {"b2", b2}};
  GradCheckOptions o;
  o.step = 1e-2;
  GradCheckResult r = grad_check(loss, params, o);
  EXPECT_EQ(r.checked, 18 + 36 + 2);
  EXPECT_LT(r.max_rel_error, 1e-2) << r.worst_tensor << "[" << r.worst_index << "]";
}

TEST(GradCheck, FrozenParametersExcluded) {
  Tensor a = Tensor::from_data({2}, {1, 2}, true);
  Tensor frozen = Tensor::from_data({2}, {3, 4}, false);
  std::vector<NamedTensor> params{{"a", a}, {"frozen", frozen}};
  GradCheckResult r = grad_check([&] { return sum(mul(a, frozen)); }, params);
  EXPECT_EQ(r.checked, 2);
  EXPECT_NE(r.worst_tensor, "frozen");
}

TEST(GradCheck, RelativeErrorFloor) {
  EXPECT_DOUBLE_EQ(relative_error(2.0, 1.0), 0.5);
  EXPECT_DOUBLE_EQ(relative_error(0.0, 0.0), 0.0);
  EXPECT_DOUBLE_EQ(relative_error(1e-9, 0.0), 1e-9 / 1e-8);
}

}  // namespace
}  // namespace dgnet
