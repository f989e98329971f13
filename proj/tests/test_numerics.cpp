#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "glyphnet/conv.hpp"
#include "glyphnet/error.hpp"
#include "glyphnet/gradcheck.hpp"
#include "glyphnet/layers.hpp"
#include "glyphnet/optimizer.hpp"
#include "glyphnet/rng.hpp"
#include "glyphnet/tensor.hpp"

using namespace glyphnet;

namespace {

template <typename T>
BasicTensor<T> random_tensor(Shape s, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  BasicTensor<T> t(s);
  for (auto& v : t.data()) v = static_cast<T>(d(rng));
  return t;
}

template <typename T>
BasicConvParams<T> random_conv(std::size_t out_c, std::size_t in_c, std::size_t kh, std::size_t kw,
                               std::size_t stride, Padding pad, Rng& rng) {
  BasicConvParams<T> p;
  p.weights = random_tensor<T>(Shape{out_c, in_c, kh, kw}, rng);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  for (std::size_t i = 0; i < out_c; ++i) p.bias.push_back(static_cast<T>(d(rng)));
  p.stride = stride;
  p.padding = pad;
  return p;
}

// Output positions counted by sliding the window, independent of the closed form.
std::size_t count_windows(std::size_t in, std::size_t before, std::size_t after, std::size_t k, std::size_t s) {
  std::size_t n = 0;
  for (std::size_t start = 0; start + k <= in + before + after; start += s) ++n;
  return n;
}

}  // namespace

TEST(Tensor, RejectsMismatchedData) {
  EXPECT_THROW(Tensor(Shape{1, 1, 2, 2}, std::vector<float>(3)), ShapeError);
  EXPECT_THROW(Tensor(Shape{1, 1, 2, 2}).reshaped(Shape{1, 1, 3, 1}), ShapeError);
}

TEST(Tensor, FlattenRoundTrip) {
  Rng rng(3);
  const auto t = random_tensor<float>(Shape{3, 2, 4, 5}, rng);
  const auto m = flatten(t);
  EXPECT_EQ(m.rows(), 3u);
  EXPECT_EQ(m.cols(), 40u);
  EXPECT_EQ(unflatten(m, t.shape()), t);
}

TEST(Tensor, RequireFiniteNamesTheTensor) {
  Tensor t(Shape{1, 1, 1, 2});
  t[1] = std::nanf("");
  try {
    require_finite(t, "probe");
    FAIL();
  } catch (const NonFiniteError& e) {
    EXPECT_NE(std::string(e.what()).find("probe"), std::string::npos);
  }
}

// Every output value is the number of input ones under the window.
TEST(Conv, AllOnesInputCountsCoveredPixels) {
  Tensor input(Shape{1, 1, 3, 3}, 1.0f);
  ConvParams wide;
  wide.weights = Tensor(Shape{1, 1, 5, 5}, 1.0f);
  wide.bias = {0.0f};
  wide.stride = 1;
  wide.padding = {2, 2, 2, 2};
  for (const auto& out : {conv2d_forward(input, wide), conv2d_forward_im2col(input, wide)}) {
    ASSERT_EQ(out.shape(), (Shape{1, 1, 3, 3}));
    // A 5x5 window centred anywhere on a 3x3 input covers all of it.
    for (auto v : out.data()) EXPECT_FLOAT_EQ(v, 9.0f);
  }
  ConvParams narrow = wide;
  narrow.weights = Tensor(Shape{1, 1, 3, 3}, 1.0f);
  narrow.padding = {1, 1, 1, 1};
  for (const auto& out : {conv2d_forward(input, narrow), conv2d_forward_im2col(input, narrow)}) {
    EXPECT_FLOAT_EQ(out.at(0, 0, 1, 1), 9.0f);
    EXPECT_FLOAT_EQ(out.at(0, 0, 0, 0), 4.0f);
    EXPECT_FLOAT_EQ(out.at(0, 0, 2, 2), 4.0f);
    EXPECT_FLOAT_EQ(out.at(0, 0, 0, 1), 6.0f);
  }
}

TEST(Conv, ZeroKernelGivesBias) {
  Rng rng(5);
  const auto input = random_tensor<float>(Shape{2, 3, 7, 6}, rng);
  ConvParams p;
  p.weights = Tensor(Shape{2, 3, 5, 5});
  p.bias = {0.5f, -1.25f};
  p.stride = 2;
  p.padding = Padding::same(7, 6, 5, 5, 2);
  const auto out = conv2d_forward_im2col(input, p);
  EXPECT_EQ(out.shape(), (Shape{2, 2, 4, 3}));
  for (std::size_t n = 0; n < 2; ++n)
    for (std::size_t c = 0; c < 2; ++c)
      for (std::size_t y = 0; y < 4; ++y)
        for (std::size_t x = 0; x < 3; ++x) EXPECT_EQ(out.at(n, c, y, x), p.bias[c]);
}

TEST(Conv, SamePaddingTraceFrom300) {
  std::size_t h = 300;
  const std::vector<std::size_t> expected{150, 75, 38, 19, 10, 5, 3};
  for (const auto e : expected) {
    const auto pad = Padding::same(h, h, 5, 5, 2);
    const auto out = conv_output_extent(h, pad.top, pad.bottom, 5, 2);
    EXPECT_EQ(out, e);
    EXPECT_EQ(out, same_output_extent(h, 2));
    EXPECT_LE(pad.top, pad.bottom);
    h = out;
  }
}

TEST(Conv, OutputShapeMatchesWindowCount) {
  for (std::size_t in = 1; in <= 24; ++in)
    for (std::size_t k = 1; k <= 6; ++k)
      for (std::size_t s = 1; s <= 4; ++s)
        for (std::size_t b = 0; b <= 3; ++b)
          for (std::size_t a = 0; a <= 3; ++a) {
            EXPECT_EQ(conv_output_extent(in, b, a, k, s), count_windows(in, b, a, k, s))
                << in << " " << k << " " << s << " " << b << " " << a;
          }
}

TEST(Conv, RejectsChannelMismatch) {
  Rng rng(1);
  const auto input = random_tensor<float>(Shape{1, 2, 5, 5}, rng);
  const auto p = random_conv<float>(1, 3, 3, 3, 1, {}, rng);
  EXPECT_THROW(conv2d_forward(input, p), ShapeError);
  EXPECT_THROW(conv2d_forward_im2col(input, p), ShapeError);
}

TEST(Conv, EmptyBatch) {
  Rng rng(2);
  const auto p = random_conv<float>(4, 1, 5, 5, 2, Padding::same(9, 9, 5, 5, 2), rng);
  const auto out = conv2d_forward_im2col(Tensor(Shape{0, 1, 9, 9}), p);
  EXPECT_EQ(out.shape(), (Shape{0, 4, 5, 5}));
}

TEST(Conv, Im2colMatchesDirectLoopOnRandomInstances) {
  Rng rng(2024);
  std::uniform_int_distribution<std::size_t> small(1, 3), extent(1, 12), kernel(1, 5), stride(1, 3), pad(0, 2);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = small(rng), c = small(rng), o = small(rng);
    const std::size_t kh = kernel(rng), kw = kernel(rng), s = stride(rng);
    const Padding pd{pad(rng), pad(rng), pad(rng), pad(rng)};
    const std::size_t h = std::max(extent(rng), kh), w = std::max(extent(rng), kw);
    const auto input = random_tensor<float>(Shape{n, c, h, w}, rng);
    const auto p = random_conv<float>(o, c, kh, kw, s, pd, rng);
    const auto a = conv2d_forward(input, p);
    const auto b = conv2d_forward_im2col(input, p);
    ASSERT_EQ(a.shape(), b.shape());
    for (std::size_t i = 0; i < a.size(); ++i) ASSERT_NEAR(a[i], b[i], 1e-5) << "trial " << trial;

    const auto up = random_tensor<float>(a.shape(), rng);
    const auto ga = conv2d_backward(input, p, up);
    const auto gb = conv2d_backward_im2col(input, p, up);
    for (std::size_t i = 0; i < ga.weights.size(); ++i) ASSERT_NEAR(ga.weights[i], gb.weights[i], 1e-4);
    for (std::size_t i = 0; i < ga.input.size(); ++i) ASSERT_NEAR(ga.input[i], gb.input[i], 1e-4);
    for (std::size_t i = 0; i < ga.bias.size(); ++i) ASSERT_NEAR(ga.bias[i], gb.bias[i], 1e-4);
  }
}

TEST(Conv, ZeroUpstreamGivesZeroGradients) {
  Rng rng(8);
  const auto input = random_tensor<float>(Shape{2, 2, 6, 6}, rng);
  const auto p = random_conv<float>(3, 2, 5, 5, 2, Padding::same(6, 6, 5, 5, 2), rng);
  const auto g = conv2d_backward_im2col(input, p, Tensor(conv2d_output_shape(input.shape(), p)));
  for (auto v : g.weights.data()) EXPECT_EQ(v, 0.0f);
  for (auto v : g.input.data()) EXPECT_EQ(v, 0.0f);
  for (auto v : g.bias) EXPECT_EQ(v, 0.0f);
}

TEST(Conv, SingleUpstreamElementSelectsInputWindow) {
  Rng rng(9);
  const auto input = random_tensor<double>(Shape{1, 2, 7, 7}, rng);
  const auto p = random_conv<double>(1, 2, 3, 3, 2, Padding{1, 1, 1, 1}, rng);
  const Shape out = conv2d_output_shape(input.shape(), p);
  BasicTensor<double> up(out);
  const std::size_t oy = 2, ox = 1;
  up.at(0, 0, oy, ox) = 1.0;
  for (const auto& g : {conv2d_backward(input, p, up), conv2d_backward_im2col(input, p, up)}) {
    for (std::size_t c = 0; c < 2; ++c)
      for (std::size_t ky = 0; ky < 3; ++ky)
        for (std::size_t kx = 0; kx < 3; ++kx) {
          const long y = static_cast<long>(oy * 2 + ky) - 1, x = static_cast<long>(ox * 2 + kx) - 1;
          const double expected = (y < 0 || x < 0 || y >= 7 || x >= 7) ? 0.0 : input.at(0, c, y, x);
          EXPECT_DOUBLE_EQ(g.weights.at(0, c, ky, kx), expected);
        }
    EXPECT_DOUBLE_EQ(g.bias[0], 1.0);
  }
}

TEST(Conv, BackwardMatchesFiniteDifferences) {
  Rng rng(11);
  auto input = random_tensor<double>(Shape{2, 3, 4, 4}, rng);
  auto p = random_conv<double>(2, 3, 3, 3, 1, Padding{1, 1, 1, 1}, rng);
  const auto coeff = random_tensor<double>(conv2d_output_shape(input.shape(), p), rng);
  auto loss = [&] {
    const auto out = conv2d_forward(input, p);
    return std::inner_product(out.data().begin(), out.data().end(), coeff.data().begin(), 0.0);
  };
  const auto g = conv2d_backward_im2col(input, p, coeff);
  GradientCheckTarget target;
  target.parameters = {{"weights", p.weights.data(), g.weights.data()},
                       {"bias", p.bias, g.bias},
                       {"input", input.data(), g.input.data()}};
  target.loss = loss;
  const auto report = gradient_check(target);
  EXPECT_TRUE(report.passed()) << report.summary();
}

TEST(Relu, Definition) {
  const std::vector<float> in{-1.0f, 0.0f, 2.0f};
  std::vector<float> out(3), grad(3);
  relu_forward<float>(in, out);
  EXPECT_EQ(out, (std::vector<float>{0.0f, 0.0f, 2.0f}));
  const std::vector<float> up{5.0f, 5.0f, 5.0f};
  relu_backward<float>(in, up, grad);
  EXPECT_EQ(grad, (std::vector<float>{0.0f, 0.0f, 5.0f}));
}

TEST(Relu, AllNegative) {
  Tensor t(Shape{1, 1, 2, 2}, -3.0f);
  const auto f = relu_forward(t);
  const auto b = relu_backward(t, Tensor(t.shape(), 1.0f));
  for (auto v : f.data()) EXPECT_EQ(v, 0.0f);
  for (auto v : b.data()) EXPECT_EQ(v, 0.0f);
}

TEST(Relu, BackwardMatchesFiniteDifferencesAwayFromKink) {
  Rng rng(12);
  const auto x0 = random_tensor<double>(Shape{1, 1, 8, 8}, rng);
  const auto coeff = random_tensor<double>(x0.shape(), rng);
  const auto g = relu_backward(x0, coeff);
  const double h = 1e-3;
  for (std::size_t i = 0; i < x0.size(); ++i) {
    if (std::abs(x0[i]) < 1e-4 || std::abs(x0[i]) < h) continue;
    auto plus = x0, minus = x0;
    plus[i] += h;
    minus[i] -= h;
    auto f = [&](const BasicTensor<double>& x) {
      const auto y = relu_forward(x);
      return std::inner_product(y.data().begin(), y.data().end(), coeff.data().begin(), 0.0);
    };
    const double numeric = (f(plus) - f(minus)) / (2 * h);
    EXPECT_LE(relative_error(g[i], numeric, 1e-9), 1e-3);
  }
}

TEST(Dense, IdentityAndBias) {
  DenseParams id(3, 3);
  for (std::size_t i = 0; i < 3; ++i) id.weight(i, i) = 1.0f;
  const Matrix x(2, 3, {1, 2, 3, 4, 5, 6});
  EXPECT_EQ(dense_forward(x, id), x);

  DenseParams zero(3, 2);
  zero.bias = {1.0f, 2.0f};
  const auto y = dense_forward(x, zero);
  for (std::size_t r = 0; r < 2; ++r) {
    EXPECT_EQ(y(r, 0), 1.0f);
    EXPECT_EQ(y(r, 1), 2.0f);
  }
  EXPECT_THROW(dense_forward(Matrix(1, 4), zero), ShapeError);
}

TEST(Dense, BackwardMatchesFiniteDifferences) {
  Rng rng(13);
  BasicDenseParams<double> p(5, 3);
  std::uniform_real_distribution<double> d(-1, 1);
  for (auto& w : p.weights) w = d(rng);
  for (auto& b : p.bias) b = d(rng);
  BasicMatrix<double> x(4, 5);
  for (auto& v : x.data()) v = d(rng);
  BasicMatrix<double> coeff(4, 3);
  for (auto& v : coeff.data()) v = d(rng);
  const auto g = dense_backward(x, p, coeff);
  GradientCheckTarget target;
  target.parameters = {{"weights", p.weights, g.weights}, {"bias", p.bias, g.bias}, {"input", x.data(), g.input.data()}};
  target.loss = [&] {
    const auto y = dense_forward(x, p);
    return std::inner_product(y.data().begin(), y.data().end(), coeff.data().begin(), 0.0);
  };
  const auto report = gradient_check(target);
  EXPECT_TRUE(report.passed()) << report.summary();
}

TEST(Softmax, UniformLogits) {
  const Matrix logits(3, 4, 0.7f);
  const std::vector<std::size_t> labels{0, 1, 3};
  const auto r = softmax_cross_entropy(logits, labels);
  EXPECT_NEAR(r.loss, std::log(4.0), 1e-6);
  const auto probs = softmax(logits);
  for (auto p : probs.data()) EXPECT_NEAR(p, 0.25, 1e-7);
}

TEST(Softmax, LargeLogitsStayFinite) {
  const Matrix logits(1, 2, {1000.0f, 0.0f});
  const std::vector<std::size_t> labels{0};
  const auto r = softmax_cross_entropy(logits, labels);
  EXPECT_TRUE(std::isfinite(r.loss));
  EXPECT_NEAR(r.loss, 0.0, 1e-6);
  for (auto g : r.grad.data()) EXPECT_TRUE(std::isfinite(g));
}

TEST(Softmax, RowsAreProbabilitySimplex) {
  Rng rng(14);
  std::uniform_real_distribution<double> d(-30, 30);
  for (int t = 0; t < 50; ++t) {
    BasicMatrix<double> m(3, 6);
    for (auto& v : m.data()) v = d(rng);
    const auto p = softmax(m);
    for (std::size_t r = 0; r < 3; ++r) {
      double s = 0;
      for (auto v : p.row(r)) {
        EXPECT_GE(v, 0.0);
        s += v;
      }
      EXPECT_NEAR(s, 1.0, 1e-6);
    }
  }
}

TEST(Softmax, RejectsBadLabels) {
  const std::vector<std::size_t> labels{4};
  EXPECT_THROW(softmax_cross_entropy(Matrix(1, 4), labels), ConfigError);
  const std::vector<std::size_t> none{0};
  EXPECT_THROW(softmax_cross_entropy(Matrix(1, 0), none), ConfigError);
}

TEST(Softmax, GradientMatchesFiniteDifferences) {
  Rng rng(15);
  std::uniform_real_distribution<double> d(-2, 2);
  BasicMatrix<double> logits(3, 5);
  for (auto& v : logits.data()) v = d(rng);
  const std::vector<std::size_t> labels{4, 0, 2};
  const auto r = softmax_cross_entropy(logits, labels);
  GradientCheckTarget target;
  target.parameters = {{"logits", logits.data(), r.grad.data()}};
  target.loss = [&] { return softmax_cross_entropy(logits, labels).loss; };
  const auto report = gradient_check(target);
  EXPECT_TRUE(report.passed()) << report.summary();
}

TEST(Softmax, LogisticLossIsBinaryCrossEntropy) {
  const BasicMatrix<double> s(2, 1, {0.3, -1.2});
  const std::vector<std::size_t> labels{1, 0};
  const auto r = logistic_loss(s, labels);
  const double expected = 0.5 * (-std::log(sigmoid(0.3)) - std::log(1.0 - sigmoid(-1.2)));
  EXPECT_NEAR(r.loss, expected, 1e-12);
  EXPECT_NEAR(r.grad(0, 0), 0.5 * (sigmoid(0.3) - 1.0), 1e-12);
  EXPECT_NEAR(r.grad(1, 0), 0.5 * sigmoid(-1.2), 1e-12);
}

TEST(Optimizer, SgdStep) {
  std::vector<float> p{1.0f};
  const std::vector<float> g{0.5f};
  OptimizerState st{{OptimizerKind::sgd, 0.1, 0.0}, {}};
  const std::vector<std::span<float>> ps{p};
  const std::vector<std::span<const float>> gs{g};
  optimizer_step<float>(ps, gs, st);
  EXPECT_FLOAT_EQ(p[0], 0.95f);
}

TEST(Optimizer, MomentumUnrolled) {
  std::vector<double> p{2.0};
  const std::vector<double> g{1.0};
  BasicOptimizerState<double> st{{OptimizerKind::momentum, 0.1, 0.9}, {}};
  const std::vector<std::span<double>> ps{p};
  const std::vector<std::span<const double>> gs{g};
  optimizer_step<double>(ps, gs, st);
  optimizer_step<double>(ps, gs, st);
  EXPECT_NEAR(p[0], 2.0 - 0.1 - 0.19, 1e-12);
}

TEST(Optimizer, ZeroLearningRateIsIdentity) {
  Rng rng(16);
  auto t = random_tensor<float>(Shape{1, 1, 4, 4}, rng);
  const auto before = t;
  const auto g = random_tensor<float>(t.shape(), rng);
  OptimizerState st{{OptimizerKind::momentum, 0.0, 0.9}, {}};
  const std::vector<std::span<float>> ps{t.data()};
  const std::vector<std::span<const float>> gs{g.data()};
  for (int i = 0; i < 3; ++i) optimizer_step<float>(ps, gs, st);
  EXPECT_EQ(t, before);
}

TEST(Optimizer, Validation) {
  EXPECT_THROW(validate(OptimizerConfig{OptimizerKind::sgd, -0.1, 0.0}), ConfigError);
  EXPECT_THROW(validate(OptimizerConfig{OptimizerKind::momentum, 0.1, 1.0}), ConfigError);
  std::vector<float> p(2);
  const std::vector<float> g(3);
  OptimizerState st{};
  const std::vector<std::span<float>> ps{p};
  const std::vector<std::span<const float>> gs{g};
  EXPECT_THROW(optimizer_step<float>(ps, gs, st), ShapeError);
  EXPECT_EQ(parse_optimizer_kind("sgd"), OptimizerKind::sgd);
  EXPECT_THROW(parse_optimizer_kind("adam"), ConfigError);
}

TEST(GradCheck, LinearQuadraticIsExact) {
  std::vector<double> w{0.7, -1.3, 2.0};
  const std::vector<double> x{1.5, 0.25, -0.5};
  auto y = [&] { return std::inner_product(w.begin(), w.end(), x.begin(), 0.0); };
  std::vector<double> analytic(3);
  for (std::size_t i = 0; i < 3; ++i) analytic[i] = 2.0 * y() * x[i];
  GradientCheckTarget target;
  target.parameters = {{"w", w, analytic}};
  target.loss = [&] { return y() * y(); };
  GradientCheckOptions opt;
  opt.tolerance = 1e-6;
  const auto report = gradient_check(target, opt);
  EXPECT_LE(report.max_relative_error, 1e-6);
  EXPECT_TRUE(report.passed());
  EXPECT_EQ(w, (std::vector<double>{0.7, -1.3, 2.0}));
}

TEST(GradCheck, DoubledGradientScoresOneThird) {
  std::vector<double> w{0.7, -1.3};
  const std::vector<double> doubled{2 * 2 * 0.7, 2 * 2 * -1.3};
  GradientCheckTarget target;
  target.parameters = {{"w", w, doubled}};
  target.loss = [&] { return w[0] * w[0] + w[1] * w[1]; };
  const auto report = gradient_check(target);
  EXPECT_NEAR(report.max_relative_error, 1.0 / 3.0, 1e-6);
  EXPECT_FALSE(report.passed());
  EXPECT_DOUBLE_EQ(relative_error(2.0, 1.0), 1.0 / 3.0);
}

TEST(GradCheck, SkipsKinkCrossings) {
  std::vector<double> w{5e-4};
  const std::vector<double> analytic{1.0};
  GradientCheckTarget target;
  target.parameters = {{"w", w, analytic}};
  target.loss = [&] { return std::max(0.0, w[0]); };
  target.activation_signature = [&] {
    const double pre[1] = {w[0]};
    return mask_fingerprint(pre);
  };
  const auto report = gradient_check(target);
  EXPECT_EQ(report.groups.at(0).skipped, 1u);
  EXPECT_EQ(report.groups.at(0).checked, 0u);
}
