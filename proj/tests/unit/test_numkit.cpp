#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "catchnas/numkit.hpp"

using namespace catchnas;

namespace {

/// Scalar probe  sum_k c_k * out_k  so every output contributes to the check.
double probe(const Mlp& net, std::span<const double> x, std::span<const double> c) {
  const auto y = net.forward(x);
  double s = 0.0;
  for (std::size_t k = 0; k < y.size(); ++k) s += c[k] * y[k];
  return s;
}

void check_gradients(Activation act, std::uint64_t seed) {
  Mlp net({4, 7, 5, 3}, act, seed);
  Rng rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> x(4), c(3);
  for (auto& v : x) v = n(rng);
  for (auto& v : c) v = n(rng);

  MlpCache cache;
  net.forward(x, cache);
  std::vector<double> grad(net.param_count(), 0.0);
  const auto dx = net.backward(cache, c, grad);

  const double h = 1e-6;
  auto params = net.params();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double keep = params[i];
    params[i] = keep + h;
    const double up = probe(net, x, c);
    params[i] = keep - h;
    const double down = probe(net, x, c);
    params[i] = keep;
    const double fd = (up - down) / (2 * h);
    EXPECT_NEAR(grad[i], fd, 1e-4 * std::max(1.0, std::abs(fd))) << "param " << i;
  }
  for (std::size_t i = 0; i < x.size(); ++i) {
    auto xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    const double fd = (probe(net, xp, c) - probe(net, xm, c)) / (2 * h);
    EXPECT_NEAR(dx[i], fd, 1e-4 * std::max(1.0, std::abs(fd)));
  }
}

}  // namespace

TEST(Mlp, ParameterCountMatchesLayout) {
  Mlp net({3, 5, 2}, Activation::tanh, 1);
  EXPECT_EQ(net.param_count(), 3u * 5 + 5 + 5 * 2 + 2);
  const std::vector<std::size_t> dims{3, 5, 2};
  EXPECT_EQ(mlp_param_count(dims), net.param_count());
}

TEST(Mlp, InitWithinFanInBound) {
  Mlp net({16, 8, 1}, Activation::relu, 9);
  for (double w : net.weights(0)) EXPECT_LE(std::abs(w), 1.0 / 4.0);
  for (double w : net.weights(1)) EXPECT_LE(std::abs(w), 1.0 / std::sqrt(8.0));
}

TEST(Mlp, ZeroNetworkOutputsZero) {
  const auto net = Mlp::zeros({3, 4, 2}, Activation::tanh);
  for (double y : net.forward(std::vector<double>{1.0, -2.0, 3.0})) EXPECT_EQ(y, 0.0);
}

TEST(Mlp, SameSeedSameWeights) {
  EXPECT_EQ(Mlp({5, 6, 2}, Activation::tanh, 42), Mlp({5, 6, 2}, Activation::tanh, 42));
  EXPECT_NE(Mlp({5, 6, 2}, Activation::tanh, 42), Mlp({5, 6, 2}, Activation::tanh, 43));
}

TEST(Mlp, RejectsWrongInputWidth) {
  Mlp net({3, 2}, Activation::tanh, 1);
  EXPECT_THROW(net.forward(std::vector<double>{1.0, 2.0}), ShapeError);
}

TEST(Mlp, TanhGradientsMatchFiniteDifferences) {
  for (std::uint64_t s = 0; s < 5; ++s) check_gradients(Activation::tanh, s);
}

TEST(Mlp, ReluGradientsMatchFiniteDifferences) {
  for (std::uint64_t s = 0; s < 5; ++s) check_gradients(Activation::relu, 100 + s);
}

TEST(Mlp, IdentityGradientsMatchFiniteDifferences) { check_gradients(Activation::identity, 7); }

TEST(Mlp, BackwardAccumulates) {
  Mlp net({2, 3, 1}, Activation::tanh, 3);
  MlpCache cache;
  const std::vector<double> x{0.3, -0.4}, up{1.0};
  net.forward(x, cache);
  std::vector<double> once(net.param_count(), 0.0), twice(net.param_count(), 0.0);
  net.backward(cache, up, once);
  net.backward(cache, up, twice);
  net.backward(cache, up, twice);
  for (std::size_t i = 0; i < once.size(); ++i) EXPECT_DOUBLE_EQ(twice[i], 2 * once[i]);
}

TEST(Mlp, SerializationRoundTripsExactly) {
  Mlp net({4, 6, 3}, Activation::relu, 11);
  std::stringstream ss;
  write_mlp(ss, net);
  EXPECT_EQ(read_mlp(ss), net);
}

TEST(Mlp, CorruptMagicIsRejected) {
  std::stringstream ss("garbage-bytes-here");
  EXPECT_THROW(read_mlp(ss), FormatError);
}

TEST(Adam, FirstStepMatchesClosedForm) {
  // With bias correction, step one moves each parameter by lr * g / (|g| + eps).
  AdamConfig cfg;
  cfg.lr = 0.01;
  Adam adam(cfg, 3);
  std::vector<double> p{1.0, -2.0, 0.5}, g{0.3, -4.0, 0.0};
  const auto p0 = p;
  adam.step(p, g);
  for (std::size_t i = 0; i < p.size(); ++i)
    EXPECT_NEAR(p[i], p0[i] - cfg.lr * g[i] / (std::abs(g[i]) + cfg.epsilon), 1e-15);
}

TEST(Adam, StepDecayEveryTwentyUpdates) {
  AdamConfig cfg;
  cfg.lr = 1e-3;
  Adam adam(cfg, 1);
  std::vector<double> p{0.0}, g{1.0};
  for (int i = 0; i < 19; ++i) adam.step(p, g);
  EXPECT_DOUBLE_EQ(adam.current_lr(), 1e-3);
  adam.step(p, g);
  EXPECT_DOUBLE_EQ(adam.current_lr(), 1e-3 * 0.99);
  for (int i = 0; i < 20; ++i) adam.step(p, g);
  EXPECT_DOUBLE_EQ(adam.current_lr(), 1e-3 * 0.99 * 0.99);
}

TEST(Adam, NonFiniteGradientLeavesStateUntouched) {
  Adam adam(AdamConfig{}, 2);
  std::vector<double> p{1.0, 2.0};
  std::vector<double> g{0.5, std::nan("")};
  EXPECT_THROW(adam.step(p, g), NumericError);
  EXPECT_EQ(p[0], 1.0);
  EXPECT_EQ(p[1], 2.0);
  EXPECT_EQ(adam.steps(), 0u);
}

TEST(Activations, SoftplusIsStableAtExtremes) {
  EXPECT_NEAR(softplus(0.0), std::log(2.0), 1e-15);
  EXPECT_DOUBLE_EQ(softplus(800.0), 800.0);
  EXPECT_GT(softplus(-800.0), -1e-300);
  EXPECT_TRUE(std::isfinite(softplus(-800.0)));
  EXPECT_NEAR(sigmoid(0.0), 0.5, 1e-15);
}

TEST(Activations, MaskedSoftmaxZeroesMaskedEntries) {
  const std::vector<double> logits{1.0, 5.0, 2.0};
  const std::vector<std::uint8_t> mask{1, 0, 1};
  const auto p = masked_softmax(logits, mask);
  EXPECT_EQ(p[1], 0.0);
  EXPECT_NEAR(p[0] + p[2], 1.0, 1e-15);
  EXPECT_NEAR(p[2] / p[0], std::exp(1.0), 1e-12);
}

TEST(Activations, MaskedSoftmaxRejectsEmptyMask) {
  const std::vector<double> logits{1.0, 2.0};
  const std::vector<std::uint8_t> mask{0, 0};
  EXPECT_THROW(masked_softmax(logits, mask), std::invalid_argument);
}
