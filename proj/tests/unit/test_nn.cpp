#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "pinnmcts/nn.hpp"

using namespace pinnmcts;
using nn::Activation;
using nn::LayerSpec;
using nn::Network;

namespace {

std::vector<double> run(const Network& net, const std::vector<double>& x) {
  nn::ForwardCache c;
  net.forward(x, c);
  const auto o = c.output();
  return {o.begin(), o.end()};
}

// Scalar objective sum_i w_i * out_i, so every output carries gradient.
double objective(const Network& net, const std::vector<double>& x, const std::vector<double>& w) {
  const auto o = run(net, x);
  double s = 0.0;
  for (std::size_t i = 0; i < o.size(); ++i) s += w[i] * o[i];
  return s;
}

void check_gradients(Network net, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> N(0.0, 1.0);
  for (auto& p : net.params()) p = 0.5 * N(rng);
  std::vector<double> x(net.input_dim()), w(net.output_dim());
  for (auto& v : x) v = N(rng);
  for (auto& v : w) v = N(rng);

  nn::ForwardCache c;
  net.forward(x, c);
  std::vector<double> gp(net.num_params(), 0.0), gx(net.input_dim(), 0.0);
  net.backward(c, w, gp, gx);

  const double h = 1e-5;
  auto rel = [](double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6}); };
  for (std::size_t i = 0; i < net.num_params(); ++i) {
    const double keep = net.params()[i];
    net.params()[i] = keep + h;
    const double fp = objective(net, x, w);
    net.params()[i] = keep - h;
    const double fm = objective(net, x, w);
    net.params()[i] = keep;
    EXPECT_LT(rel(gp[i], (fp - fm) / (2 * h)), 1e-4) << "param " << i;
  }
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + h;
    const double fp = objective(net, x, w);
    x[i] = keep - h;
    const double fm = objective(net, x, w);
    x[i] = keep;
    EXPECT_LT(rel(gx[i], (fp - fm) / (2 * h)), 1e-4) << "input " << i;
  }
}

}  // namespace

TEST(Network, IdentityLayer) {
  Network net({LayerSpec{2, 2, Activation::identity}}, std::vector<double>{1, 0, 0, 1, 0, 0});
  EXPECT_EQ(run(net, {3.0, -4.0}), (std::vector<double>{3.0, -4.0}));
}

TEST(Network, SoftmaxOfEqualLogits) {
  Network net({LayerSpec{1, 3, Activation::softmax}}, std::vector<double>(6, 0.0));
  for (double p : run(net, {2.5})) EXPECT_NEAR(p, 1.0 / 3.0, 1e-15);
}

TEST(Network, HandComputedReluNet) {
  // W1 = [[1, -1], [2, 1]], b1 = [0, -1]; W2 = [[1, 1]], b2 = [0.5]
  Network net({LayerSpec{2, 2, Activation::relu}, LayerSpec{2, 1, Activation::identity}},
              std::vector<double>{1, -1, 2, 1, 0, -1, 1, 1, 0.5});
  // x = (1, 2): h = relu(-1, 3) = (0, 3); y = 3.5
  EXPECT_DOUBLE_EQ(run(net, {1.0, 2.0})[0], 3.5);
  // x = (2, -3): h = relu(5, 0) = (5, 0); y = 5.5
  EXPECT_DOUBLE_EQ(run(net, {2.0, -3.0})[0], 5.5);
}

TEST(Network, MixedHead) {
  LayerSpec head{1, 2, Activation::mixed, {Activation::tanh, Activation::relu}};
  Network net({head}, std::vector<double>{1, 1, 0, 0});
  const auto y = run(net, {-0.5});
  EXPECT_DOUBLE_EQ(y[0], std::tanh(-0.5));
  EXPECT_DOUBLE_EQ(y[1], 0.0);
}

TEST(Network, RejectsBadShapes) {
  EXPECT_THROW(Network({LayerSpec{2, 3}, LayerSpec{4, 1}}, 1), std::invalid_argument);
  EXPECT_THROW(Network({LayerSpec{2, 1}}, std::vector<double>(5, 0.0)), std::invalid_argument);
}

TEST(Gradients, EncoderTopology) {
  for (std::uint64_t s = 0; s < 3; ++s)
    check_gradients(Network({LayerSpec{48, 32, Activation::relu}, LayerSpec{32, 1, Activation::tanh}}, s), s);
}

TEST(Gradients, PredictorTopology) {
  for (std::uint64_t s = 0; s < 3; ++s)
    check_gradients(Network({LayerSpec{7, 64, Activation::relu},
                             LayerSpec{64, 2, Activation::mixed, {Activation::tanh, Activation::relu}}},
                            s),
                    10 + s);
}

TEST(Gradients, PriorTopology) {
  for (std::uint64_t s = 0; s < 3; ++s)
    check_gradients(Network({LayerSpec{7, 64, Activation::relu}, LayerSpec{64, 32, Activation::relu},
                             LayerSpec{32, 5, Activation::softmax}},
                            s),
                    20 + s);
}

TEST(Gradients, ReluBlocksNegativePreActivation) {
  Network net({LayerSpec{1, 1, Activation::relu}}, std::vector<double>{1.0, 0.0});
  nn::ForwardCache c;
  net.forward(std::vector<double>{-2.0}, c);
  std::vector<double> gp(2, 0.0), gx(1, 0.0);
  net.backward(c, std::vector<double>{1.0}, gp, gx);
  EXPECT_EQ(gp[0], 0.0);
  EXPECT_EQ(gp[1], 0.0);
  EXPECT_EQ(gx[0], 0.0);
}

TEST(Network, InferMatchesForward) {
  Network net({LayerSpec{7, 64, Activation::relu}, LayerSpec{64, 5, Activation::softmax}}, 4);
  std::vector<double> x{0.1, -0.2, 0.3, 0.4, -0.5, 0.6, 0.7}, y(5);
  nn::Workspace ws;
  net.infer(x, y, ws);
  const auto ref = run(net, x);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_DOUBLE_EQ(y[i], ref[i]);
}

TEST(Adam, ZeroGradientLeavesParams) {
  std::vector<double> p{1.0, -2.0}, g{0.0, 0.0};
  nn::AdamState st(2, 1e-2);
  for (int i = 0; i < 5; ++i) nn::adam_step(p, g, st);
  EXPECT_EQ(p, (std::vector<double>{1.0, -2.0}));
}

TEST(Adam, FirstStepIsLearningRate) {
  std::vector<double> p{1.0, 1.0}, g{3.0, -0.01};
  nn::AdamState st(2, 1e-3);
  nn::adam_step(p, g, st);
  EXPECT_NEAR(p[0], 1.0 - 1e-3, 1e-9);
  EXPECT_NEAR(p[1], 1.0 + 1e-3, 1e-6);
  EXPECT_EQ(st.step, 1u);
}

TEST(Adam, ConstantGradientStepsApproachLrTimesSign) {
  std::vector<double> p{0.0}, g{-5.0};
  nn::AdamState st(1, 1e-3);
  double prev = 0.0;
  for (int i = 0; i < 2000; ++i) {
    prev = p[0];
    nn::adam_step(p, g, st);
  }
  EXPECT_NEAR(p[0] - prev, 1e-3, 1e-8);
}

TEST(CrossEntropy, UniformOverFive) {
  const std::vector<double> q(5, 0.2);
  EXPECT_NEAR(nn::cross_entropy_loss(q, q).loss, std::log(5.0), 1e-10);
}

TEST(CrossEntropy, OneHotTarget) {
  const std::vector<double> p{0.1, 0.7, 0.2}, t{0.0, 1.0, 0.0};
  const auto r = nn::cross_entropy_loss(p, t);
  EXPECT_NEAR(r.loss, -std::log(0.7), 1e-10);
  EXPECT_EQ(r.grad[0], 0.0);
  EXPECT_NEAR(r.grad[1], -1.0 / 0.7, 1e-9);
}

TEST(CrossEntropy, GradientThroughSoftmaxHead) {
  Network net({LayerSpec{3, 4, Activation::relu}, LayerSpec{4, 5, Activation::softmax}}, 8);
  const std::vector<double> x{0.3, -0.7, 1.1}, t{0.1, 0.2, 0.3, 0.4, 0.0};
  nn::ForwardCache c;
  net.forward(x, c);
  const auto ce = nn::cross_entropy_loss(c.output(), t);
  std::vector<double> gp(net.num_params(), 0.0);
  net.backward(c, ce.grad, gp, {});
  const double h = 1e-5;
  for (std::size_t i = 0; i < net.num_params(); ++i) {
    const double keep = net.params()[i];
    net.params()[i] = keep + h;
    const double fp = nn::cross_entropy_loss(run(net, x), t).loss;
    net.params()[i] = keep - h;
    const double fm = nn::cross_entropy_loss(run(net, x), t).loss;
    net.params()[i] = keep;
    EXPECT_NEAR(gp[i], (fp - fm) / (2 * h), 1e-6 * std::max(1.0, std::abs(gp[i])));
  }
}

TEST(Training, FitsXor) {
  Network net({LayerSpec{2, 16, Activation::tanh}, LayerSpec{16, 1, Activation::identity}}, 3);
  const double X[4][2] = {{0, 0}, {0, 1}, {1, 0}, {1, 1}};
  const double Y[4] = {0, 1, 1, 0};
  nn::AdamState st(net.num_params(), 1e-2);
  std::vector<double> g(net.num_params());
  nn::ForwardCache c;
  for (int it = 0; it < 3000; ++it) {
    std::fill(g.begin(), g.end(), 0.0);
    for (int k = 0; k < 4; ++k) {
      net.forward(std::vector<double>{X[k][0], X[k][1]}, c);
      const double e = c.output()[0] - Y[k];
      net.backward(c, std::vector<double>{e / 2.0}, g, {});
    }
    nn::adam_step(net.params(), g, st);
  }
  for (int k = 0; k < 4; ++k) EXPECT_NEAR(run(net, {X[k][0], X[k][1]})[0], Y[k], 0.05);
}

TEST(Network, SeedDeterminism) {
  const std::vector<LayerSpec> spec{LayerSpec{5, 8, Activation::relu}, LayerSpec{8, 2, Activation::identity}};
  Network a(spec, 42), b(spec, 42), c(spec, 43);
  EXPECT_TRUE(std::equal(a.params().begin(), a.params().end(), b.params().begin()));
  EXPECT_FALSE(std::equal(a.params().begin(), a.params().end(), c.params().begin()));
}

TEST(Network, JsonRoundTripIsExact) {
  Network a({LayerSpec{7, 64, Activation::relu},
             LayerSpec{64, 2, Activation::mixed, {Activation::tanh, Activation::relu}}},
            11);
  const Network b = Network::from_json(nlohmann::json::parse(a.to_json().dump()));
  ASSERT_EQ(a.num_params(), b.num_params());
  for (std::size_t i = 0; i < a.num_params(); ++i) EXPECT_EQ(a.params()[i], b.params()[i]);
  EXPECT_EQ(b.layers()[1].per_output.size(), 2u);
}
