#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "kneeflex/error.hpp"
#include "kneeflex/layers.hpp"
#include "support/oracles.hpp"

using namespace kneeflex;
using kneeflex::testing::central_difference;
using kneeflex::testing::naive_conv;
using kneeflex::testing::random_tensor;
using kneeflex::testing::relative_error;

namespace {

constexpr float kStep = 1e-2f;
constexpr double kTol = 1e-3;

// Scalar objective sum_i c_i * y_i with fixed random coefficients.
double dot(const Tensor& y, const Tensor& c) {
  double s = 0;
  for (std::size_t i = 0; i < y.size(); ++i) s += static_cast<double>(y[i]) * c[i];
  return s;
}

std::vector<std::size_t> pick(std::size_t n, std::size_t k, std::mt19937& gen) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), gen);
  idx.resize(std::min(n, k));
  return idx;
}

Conv2D make_conv(int kh, int kw, int cin, int cout, Activation act, std::mt19937& gen) {
  Conv2D c(kh, kw, cin, cout, act);
  c.weight = random_tensor({kh, kw, cin, cout}, gen);
  c.bias = random_tensor({cout}, gen, -0.2f, 0.2f);
  return c;
}

// Smallest |pre-activation|; a finite-difference step must not cross the ReLU kink.
template <typename L, typename Fwd>
double min_abs_preactivation(L layer, const Tensor& x, Fwd fwd) {
  layer.activation = Activation::Linear;
  const Tensor z = fwd(x, layer);
  double m = 1e30;
  for (float v : z.values()) m = std::min(m, std::abs(static_cast<double>(v)));
  return m;
}

}  // namespace

TEST(Conv, AllOnesSums) {
  Conv2D c(3, 3, 1, 1, Activation::Relu);
  c.weight.fill(1.0f);
  const auto out = conv_forward(Tensor({1, 3, 3, 1}, 1.0f), c);
  ASSERT_EQ(out.shape(), (std::vector<int>{1, 1, 1, 1}));
  EXPECT_EQ(out[0], 9.0f);

  Conv2D c3(3, 3, 3, 1, Activation::Relu);
  c3.weight.fill(1.0f);
  EXPECT_EQ(conv_forward(Tensor({1, 3, 3, 3}, 1.0f), c3)[0], 27.0f);
}

TEST(Conv, ZeroInputGivesReluOfBias) {
  Conv2D c(2, 2, 2, 3, Activation::Relu);
  c.bias = Tensor({3}, std::vector<float>{0.5f, -1.0f, 2.0f});
  const auto out = conv_forward(Tensor({2, 4, 5, 2}), c);
  ASSERT_EQ(out.shape(), (std::vector<int>{2, 3, 4, 3}));
  for (std::size_t i = 0; i < out.size(); i += 3) {
    EXPECT_EQ(out[i], 0.5f);
    EXPECT_EQ(out[i + 1], 0.0f);
    EXPECT_EQ(out[i + 2], 2.0f);
  }
}

TEST(Conv, MatchesDirectLoopOracle) {
  std::mt19937 gen(1);
  for (Activation act : {Activation::Linear, Activation::Relu}) {
    const auto c = make_conv(3, 3, 2, 2, act, gen);
    const auto x = random_tensor({2, 6, 8, 2}, gen);
    const auto out = conv_forward(x, c);
    const auto ref = naive_conv(x, c.weight, c.bias, act == Activation::Relu);
    ASSERT_EQ(out.size(), ref.size());
    for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(out[i], ref[i], 1e-5);
  }
  // Multi-threaded path agrees bit-for-bit.
  const auto c = make_conv(4, 4, 3, 5, Activation::Relu, gen);
  const auto x = random_tensor({3, 9, 11, 3}, gen);
  EXPECT_EQ(conv_forward(x, c, 1), conv_forward(x, c, 3));
}

TEST(Conv, RejectsChannelMismatch) {
  Conv2D c(3, 3, 2, 1);
  EXPECT_THROW(conv_forward(Tensor({1, 5, 5, 3}), c), ShapeError);
  EXPECT_THROW(conv_forward(Tensor({1, 2, 5, 2}), c), ShapeError);
}

TEST(ConvBackward, ZeroGradOut) {
  std::mt19937 gen(2);
  const auto c = make_conv(3, 3, 2, 2, Activation::Relu, gen);
  const auto x = random_tensor({1, 5, 6, 2}, gen);
  const auto y = conv_forward(x, c);
  const auto g = conv_backward(Tensor(y.shape()), x, y, c);
  for (const Tensor* t : {&g.input, &g.weight, &g.bias})
    for (float v : t->values()) EXPECT_EQ(v, 0.0f);
}

TEST(ConvBackward, SinglePixelGradEqualsPatch) {
  std::mt19937 gen(3);
  auto c = make_conv(3, 3, 2, 1, Activation::Linear, gen);
  const auto x = random_tensor({1, 3, 3, 2}, gen);
  const auto y = conv_forward(x, c);
  ASSERT_EQ(y.size(), 1u);
  const auto g = conv_backward(Tensor({1, 1, 1, 1}, 1.0f), x, y, c);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_FLOAT_EQ(g.weight[i], x[i]);
  EXPECT_FLOAT_EQ(g.bias[0], 1.0f);

  // A dead ReLU unit blocks the gradient.
  c.activation = Activation::Relu;
  c.bias[0] = -100.0f;
  const auto y2 = conv_forward(x, c);
  const auto g2 = conv_backward(Tensor({1, 1, 1, 1}, 1.0f), x, y2, c);
  for (float v : g2.weight.values()) EXPECT_EQ(v, 0.0f);
}

TEST(ConvBackward, FiniteDifferences) {
  std::mt19937 gen(4);
  for (Activation act : {Activation::Linear, Activation::Relu}) {
    Conv2D c;
    Tensor x;
    do {
      c = make_conv(3, 3, 2, 3, act, gen);
      x = random_tensor({2, 5, 6, 2}, gen);
    } while (min_abs_preactivation(c, x, [](const Tensor& t, const Conv2D& l) { return conv_forward(t, l); }) < 0.05);
    const auto coef = random_tensor({2, 3, 4, 3}, gen);
    const auto y = conv_forward(x, c);
    const auto g = conv_backward(coef, x, y, c, true, 2);
    auto f = [&] { return dot(conv_forward(x, c), coef); };
    int checked = 0;
    for (std::size_t i : pick(c.weight.size(), 20, gen)) {
      EXPECT_LT(relative_error(g.weight[i], central_difference(&c.weight[i], kStep, f)), kTol) << "w" << i;
      ++checked;
    }
    for (std::size_t i = 0; i < c.bias.size(); ++i) {
      EXPECT_LT(relative_error(g.bias[i], central_difference(&c.bias[i], kStep, f)), kTol) << "b" << i;
      ++checked;
    }
    for (std::size_t i : pick(x.size(), 20, gen))
      EXPECT_LT(relative_error(g.input[i], central_difference(&x[i], kStep, f)), kTol) << "x" << i;
    EXPECT_GE(checked, 20);
  }
}

TEST(ConvBackward, RepeatableAcrossAllocations) {
  std::mt19937 gen(14);
  const auto c = make_conv(3, 3, 3, 8, Activation::Relu, gen);
  const auto x = random_tensor({2, 17, 23, 3}, gen);
  const auto y = conv_forward(x, c);
  const auto go = random_tensor(y.shape(), gen);
  const auto ref = conv_backward(go, x, y, c);
  std::vector<std::vector<float>> churn;
  for (int i = 1; i < 8; ++i) {
    churn.emplace_back(static_cast<std::size_t>(i * 3 + 1));  // shift later heap addresses
    const auto g = conv_backward(go, x, y, c);
    EXPECT_EQ(g.bias, ref.bias);
    EXPECT_EQ(g.weight, ref.weight);
    EXPECT_EQ(g.input, ref.input);
  }
}

TEST(ConvBackward, ThreadCountDoesNotChangeGradients) {
  std::mt19937 gen(5);
  const auto c = make_conv(3, 3, 3, 4, Activation::Relu, gen);
  const auto x = random_tensor({5, 7, 9, 3}, gen);
  const auto y = conv_forward(x, c);
  const auto go = random_tensor(y.shape(), gen);
  const auto a = conv_backward(go, x, y, c, true, 1);
  const auto b = conv_backward(go, x, y, c, true, 4);
  EXPECT_EQ(a.weight, b.weight);
  EXPECT_EQ(a.bias, b.bias);
  EXPECT_EQ(a.input, b.input);
  EXPECT_TRUE(conv_backward(go, x, y, c, false).input.empty());
}

TEST(MaxPool, TwoByTwo) {
  const Tensor x({1, 2, 2, 1}, std::vector<float>{1, 2, 3, 4});
  const auto r = maxpool_forward(x);
  ASSERT_EQ(r.output.shape(), (std::vector<int>{1, 1, 1, 1}));
  EXPECT_EQ(r.output[0], 4.0f);
  EXPECT_EQ(r.argmax[0], 3);  // row 1, column 1
}

TEST(MaxPool, FloorShapes) {
  EXPECT_EQ(maxpool_forward(Tensor({1, 71, 96, 2})).output.shape(), (std::vector<int>{1, 35, 48, 2}));
  EXPECT_EQ(maxpool_forward(Tensor({2, 148, 198, 1})).output.shape(), (std::vector<int>{2, 74, 99, 1}));
  EXPECT_THROW(maxpool_forward(Tensor({1, 1, 4, 1})), ShapeError);
}

TEST(MaxPool, BackwardRoutesToArgmaxAndMatchesFiniteDifferences) {
  std::mt19937 gen(6);
  // Well separated values so a finite-difference step never changes the winner.
  std::vector<float> vals(2 * 5 * 7 * 2);
  for (std::size_t i = 0; i < vals.size(); ++i) vals[i] = 0.1f * static_cast<float>(i);
  std::shuffle(vals.begin(), vals.end(), gen);
  Tensor x({2, 5, 7, 2}, vals);
  const auto r = maxpool_forward(x);
  const auto coef = random_tensor(r.output.shape(), gen);
  const auto gx = maxpool_backward(coef, r.argmax, x.shape());
  auto f = [&] { return dot(maxpool_forward(x).output, coef); };
  for (std::size_t i = 0; i < x.size(); ++i)
    EXPECT_LT(relative_error(gx[i], central_difference(&x[i], kStep, f)), kTol) << i;
  // Dropped trailing row gets nothing.
  for (int xx = 0; xx < 7; ++xx)
    for (int ch = 0; ch < 2; ++ch) EXPECT_EQ(gx[((0 * 5 + 4) * 7 + xx) * 2 + ch], 0.0f);
}

TEST(Flatten, RoundTrip) {
  std::mt19937 gen(7);
  const auto x = random_tensor({2, 16, 23, 4}, gen);
  const auto y = flatten_forward(x);
  EXPECT_EQ(y.shape(), (std::vector<int>{2, 1472}));
  EXPECT_EQ(flatten_backward(y, x.shape()), x);
}

TEST(Dense, IdentityWeights) {
  Dense d(4, 4, Activation::Linear);
  d.weight.fill(0.0f);
  for (int i = 0; i < 4; ++i) d.weight[static_cast<std::size_t>(i) * 4 + i] = 1.0f;
  const Tensor x({2, 4}, std::vector<float>{1, -2, 3, -4, 0.5f, 6, -7, 8});
  EXPECT_EQ(dense_forward(x, d), x);
}

TEST(Dense, ParameterCount) {
  EXPECT_EQ(Dense(1472, 100, Activation::Relu).parameter_count(), 147300u);
  EXPECT_EQ(Dense(100, 50, Activation::Relu).parameter_count(), 5050u);
  EXPECT_EQ(Dense(50, 6, Activation::Linear).parameter_count(), 306u);
  EXPECT_THROW(dense_forward(Tensor({1, 5}), Dense(4, 2, Activation::Linear)), ShapeError);
}

TEST(DenseBackward, FiniteDifferences) {
  std::mt19937 gen(8);
  for (Activation act : {Activation::Linear, Activation::Relu}) {
    Dense d(7, 5, act);
    Tensor x;
    do {
      d.weight = random_tensor({7, 5}, gen);
      d.bias = random_tensor({5}, gen, 0.0f, 0.5f);
      x = random_tensor({3, 7}, gen);
    } while (min_abs_preactivation(d, x, [](const Tensor& t, const Dense& l) { return dense_forward(t, l); }) < 0.05);
    const auto coef = random_tensor({3, 5}, gen);
    const auto y = dense_forward(x, d);
    const auto g = dense_backward(coef, x, y, d);
    auto f = [&] { return dot(dense_forward(x, d), coef); };
    for (std::size_t i : pick(d.weight.size(), 25, gen))
      EXPECT_LT(relative_error(g.weight[i], central_difference(&d.weight[i], kStep, f)), kTol) << "w" << i;
    for (std::size_t i = 0; i < d.bias.size(); ++i)
      EXPECT_LT(relative_error(g.bias[i], central_difference(&d.bias[i], kStep, f)), kTol) << "b" << i;
    for (std::size_t i = 0; i < x.size(); ++i)
      EXPECT_LT(relative_error(g.input[i], central_difference(&x[i], kStep, f)), kTol) << "x" << i;
  }
}

TEST(Dropout, RateZeroAndInferenceAreIdentity) {
  std::mt19937 gen(9);
  const auto x = random_tensor({4, 10}, gen);
  Rng rng(1);
  EXPECT_EQ(dropout_forward(x, 0.0f, Mode::Training, rng).output, x);
  const auto r = dropout_forward(x, 0.7f, Mode::Inference, rng);
  EXPECT_EQ(r.output, x);
  EXPECT_TRUE(r.mask.empty());
}

TEST(Dropout, InvertedScalingIsUnbiased) {
  Rng rng(10);
  const Tensor x({100, 1000}, 1.0f);
  const auto r = dropout_forward(x, 0.5f, Mode::Training, rng);
  const double mean = std::accumulate(r.output.values().begin(), r.output.values().end(), 0.0) / x.size();
  EXPECT_NEAR(mean, 1.0, 0.03);
  for (float v : r.output.values()) ASSERT_TRUE(v == 0.0f || v == 2.0f);
}

TEST(Dropout, BackwardAppliesMask) {
  std::mt19937 gen(11);
  auto x = random_tensor({3, 8}, gen);
  Rng rng(12);
  const auto r = dropout_forward(x, 0.4f, Mode::Training, rng);
  const auto coef = random_tensor({3, 8}, gen);
  const auto g = dropout_backward(coef, r.mask);
  for (std::size_t i = 0; i < x.size(); ++i) {
    EXPECT_FLOAT_EQ(g[i], coef[i] * r.mask[i]);
    // Fixed mask makes the layer linear: d(out)/d(x) = mask.
    auto f = [&] {
      double s = 0;
      for (std::size_t j = 0; j < x.size(); ++j) s += static_cast<double>(x[j]) * r.mask[j] * coef[j];
      return s;
    };
    EXPECT_LT(relative_error(g[i], central_difference(&x[i], kStep, f)), kTol);
  }
}

TEST(Glorot, BoundsAndZeroBias) {
  Rng rng(13);
  Conv2D c(4, 4, 32, 64);
  glorot_init(c, rng);
  const double limit = std::sqrt(6.0 / (4 * 4 * 32 + 4 * 4 * 64));
  double sq = 0;
  for (float v : c.weight.values()) {
    ASSERT_LE(std::abs(v), limit);
    sq += static_cast<double>(v) * v;
  }
  // Uniform on [-l, l] has variance l^2 / 3.
  EXPECT_NEAR(sq / c.weight.size(), limit * limit / 3, 0.05 * limit * limit / 3);
  for (float v : c.bias.values()) EXPECT_EQ(v, 0.0f);

  Dense d(1472, 100, Activation::Relu);
  glorot_init(d, rng);
  const double dl = std::sqrt(6.0 / (1472 + 100));
  for (float v : d.weight.values()) ASSERT_LE(std::abs(v), dl);
}
