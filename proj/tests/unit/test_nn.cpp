#include <gtest/gtest.h>

#include <cmath>

#include "sliceran/nn.hpp"

using namespace sliceran;
using namespace sliceran::nn;

namespace {

double dot_output(const Mlp& net, const std::vector<double>& x, const std::vector<double>& u) {
  const auto y = net.forward(x);
  double s = 0;
  for (std::size_t i = 0; i < y.size(); ++i) s += u[i] * y[i];
  return s;
}

std::vector<double> random_vector(RandomSource& rng, std::size_t n) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

}  // namespace

TEST(Mlp, ParameterCountAndLayout) {
  const Mlp net({12, 128, 128, 3003});
  EXPECT_EQ(net.parameter_count(), 13u * 128 + 129u * 128 + 129u * 3003);
  EXPECT_EQ(Mlp::count_parameters({12, 128, 128, 3003}), net.parameter_count());
  EXPECT_THROW(Mlp({5}), ShapeError);
  EXPECT_THROW(Mlp({5, 0, 2}), ShapeError);
}

TEST(Mlp, ZeroParametersGiveZeroOutput) {
  const Mlp net({4, 8, 3});
  for (double y : net.forward(std::vector<double>{1, -2, 3, 0.5})) EXPECT_EQ(y, 0.0);
}

TEST(Mlp, IdentityWeightsReproduceInput) {
  Mlp net({3, 3}, Activation::Identity);
  auto p = net.parameters();
  p[0] = p[4] = p[8] = 1.0;
  const std::vector<double> x{0.3, -1.5, 2.0};
  EXPECT_EQ(net.forward(x), x);
}

TEST(Mlp, WrongInputLengthIsShapeError) {
  const Mlp net({4, 2});
  EXPECT_THROW(net.forward(std::vector<double>{1, 2, 3}), ShapeError);
}

TEST(Mlp, LinearLayerGradientIsOuterProduct) {
  Mlp net({3, 2}, Activation::Identity);
  RandomSource rng(1);
  net.initialize(rng);
  const std::vector<double> x{0.5, -1.0, 2.0};
  const std::vector<double> u{1.0, -3.0};
  const auto g = net.gradient(x, u);
  ASSERT_EQ(g.size(), 8u);
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t j = 0; j < 3; ++j) EXPECT_DOUBLE_EQ(g[i * 3 + j], u[i] * x[j]);
    EXPECT_DOUBLE_EQ(g[6 + i], u[i]);
  }
}

class FiniteDifference : public ::testing::TestWithParam<Activation> {};

TEST_P(FiniteDifference, BackpropMatchesCentralDifferences) {
  RandomSource rng(7);
  for (int pair = 0; pair < 20; ++pair) {
    Mlp net({5, 7, 6, 4}, GetParam());
    net.initialize(rng);
    // Nonzero biases so ReLU kinks are not at the origin.
    auto p = net.parameters();
    for (auto& v : p) v += rng.uniform(-0.1, 0.1);
    const auto x = random_vector(rng, 5);
    const auto u = random_vector(rng, 4);
    const auto g = net.gradient(x, u);
    const double h = 1e-6;
    for (std::size_t k = 0; k < p.size(); ++k) {
      const double saved = p[k];
      p[k] = saved + h;
      const double plus = dot_output(net, x, u);
      p[k] = saved - h;
      const double minus = dot_output(net, x, u);
      p[k] = saved;
      const double fd = (plus - minus) / (2 * h);
      ASSERT_NEAR(g[k], fd, 1e-6 * std::max(1.0, std::abs(fd))) << "param " << k << " pair " << pair;
    }
  }
}

INSTANTIATE_TEST_SUITE_P(Activations, FiniteDifference, ::testing::Values(Activation::Tanh, Activation::Relu, Activation::Identity));

TEST(Mlp, BatchForwardMatchesSingleSamples) {
  RandomSource rng(3);
  Mlp net({4, 16, 5});
  net.initialize(rng);
  Matrix x(4, 6);
  for (Eigen::Index j = 0; j < 6; ++j) {
    for (Eigen::Index i = 0; i < 4; ++i) x(i, j) = rng.uniform(-1, 1);
  }
  const Matrix y = net.forward_batch(x);
  for (Eigen::Index j = 0; j < 6; ++j) {
    const std::vector<double> col(x.col(j).data(), x.col(j).data() + 4);
    const auto single = net.forward(col);
    for (Eigen::Index i = 0; i < 5; ++i) EXPECT_NEAR(y(i, j), single[static_cast<std::size_t>(i)], 1e-12);
  }
}

TEST(Mlp, InitializationIsSeededAndScaled) {
  RandomSource a(5), b(5);
  Mlp n1({8, 32, 10}), n2({8, 32, 10});
  n1.initialize(a, 0.01);
  n2.initialize(b, 0.01);
  EXPECT_EQ(n1, n2);
  // The output layer starts near zero.
  for (double y : n1.forward(std::vector<double>(8, 1.0))) EXPECT_LT(std::abs(y), 0.2);
}

TEST(Softmax, SumsToOneAndIsShiftInvariant) {
  Vector z(4);
  z << 1.0, 2.0, -3.0, 1000.0;
  const Vector p = softmax(z);
  EXPECT_NEAR(p.sum(), 1.0, 1e-12);
  EXPECT_TRUE(p.allFinite());
  const Vector q = softmax((z.array() - 500.0).matrix());
  EXPECT_NEAR((p - q).cwiseAbs().maxCoeff(), 0.0, 1e-12);
  Vector flat = Vector::Constant(5, 3.0);
  for (double v : softmax(flat)) EXPECT_NEAR(v, 0.2, 1e-15);
  const Vector lp = log_softmax(z);
  EXPECT_NEAR(std::exp(lp(1)), p(1), 1e-15);
}

TEST(Argmax, TiesResolveToLowestIndex) {
  EXPECT_EQ(argmax(std::vector<double>{1, 3, 3, 2}), 1u);
  EXPECT_EQ(argmax(std::vector<double>{5, 5}), 0u);
  EXPECT_EQ(argmax(std::vector<double>{-1, -0.5, -2}), 1u);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  Adam opt(2, 0.1);
  std::vector<double> p{1.0, -1.0};
  opt.step(p, std::vector<double>{3.0, -0.001});
  EXPECT_NEAR(p[0], 0.9, 1e-6);
  EXPECT_NEAR(p[1], -0.9, 1e-4);
  EXPECT_EQ(opt.steps(), 1u);
}

TEST(Adam, MinimizesQuadratic) {
  Adam opt(3, 0.05);
  std::vector<double> p{4.0, -2.0, 1.0};
  for (int i = 0; i < 2000; ++i) {
    std::vector<double> g{2 * (p[0] - 1), 2 * (p[1] + 1), 2 * p[2]};
    opt.step(p, g);
  }
  EXPECT_NEAR(p[0], 1.0, 1e-3);
  EXPECT_NEAR(p[1], -1.0, 1e-3);
  EXPECT_NEAR(p[2], 0.0, 1e-3);
}

TEST(ClipGradNorm, RescalesOnlyAboveThreshold) {
  std::vector<double> g{3.0, 4.0};
  EXPECT_DOUBLE_EQ(clip_grad_norm(g, 1.0), 5.0);
  EXPECT_NEAR(g[0], 0.6, 1e-15);
  EXPECT_NEAR(g[1], 0.8, 1e-15);
  std::vector<double> small{0.1, 0.1};
  clip_grad_norm(small, 1.0);
  EXPECT_EQ(small, (std::vector<double>{0.1, 0.1}));
  std::vector<double> off{30.0, 40.0};
  clip_grad_norm(off, 0.0);
  EXPECT_EQ(off[0], 30.0);
}

TEST(Mlp, SelectedOutputsMatchDensePath) {
  RandomSource rng(12);
  for (auto act : {Activation::Tanh, Activation::Relu}) {
    Mlp net({6, 10, 9, 7}, act);
    net.initialize(rng);
    Matrix x(6, 5);
    for (Eigen::Index j = 0; j < 5; ++j) {
      for (Eigen::Index i = 0; i < 6; ++i) x(i, j) = rng.uniform(-1, 1);
    }
    const std::vector<std::size_t> rows{3, 0, 6, 3, 1};
    const std::vector<double> up{0.5, -1.0, 2.0, 0.25, -0.75};

    ForwardCache dense_cache, sel_cache;
    const Matrix y = net.forward_batch(x, &dense_cache);
    const auto sel = net.forward_selected(x, rows, sel_cache);
    Matrix upstream = Matrix::Zero(7, 5);
    for (std::size_t j = 0; j < 5; ++j) {
      const auto c = static_cast<Eigen::Index>(j);
      EXPECT_NEAR(sel[j], y(static_cast<Eigen::Index>(rows[j]), c), 1e-12);
      upstream(static_cast<Eigen::Index>(rows[j]), c) = up[j];
    }
    std::vector<double> g_dense(net.parameter_count(), 0.0), g_sel(net.parameter_count(), 0.0);
    net.backward_batch(dense_cache, upstream, g_dense);
    net.backward_selected(sel_cache, rows, up, g_sel);
    for (std::size_t k = 0; k < g_dense.size(); ++k) ASSERT_NEAR(g_sel[k], g_dense[k], 1e-12) << k;
  }
  Mlp single({3, 4}, Activation::Identity);
  ForwardCache cache;
  const std::vector<std::size_t> bad{4};
  EXPECT_THROW(single.forward_selected(Matrix::Zero(3, 1), bad, cache), ShapeError);
}
