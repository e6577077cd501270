#include <cmath>
#include <cstdlib>
#include <limits>
#include <random>

#include <gtest/gtest.h>

#include "navguard/error.hpp"
#include "navguard/netcore.hpp"
#include "../support/fixtures.hpp"

using namespace navguard;
using navguard::testing::fig1Network;
using navguard::testing::randomNetwork;

namespace {

Vector randomInput(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Vector x(n);
  for (double& v : x) v = u(rng);
  return x;
}

// Smallest |pre-activation| over hidden units; near zero means x sits on a
// region boundary.
double boundaryDistance(const Network& net, const Vector& x) {
  const EvalTrace t = evaluate(net, x);
  double m = std::numeric_limits<double>::infinity();
  for (std::size_t l = 0; l + 1 < t.pre.size(); ++l) {
    for (double v : t.pre[l]) m = std::min(m, std::abs(v));
  }
  return m;
}

double dot(const Vector& a, const Vector& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

TEST(Evaluate, ToyNetworkTrace) {
  const Network net = fig1Network();
  const EvalTrace t = evaluate(net, Vector{2, 3});
  EXPECT_EQ(t.pre[0], (Vector{20, -7}));
  EXPECT_EQ(t.post[0], (Vector{20, 0}));
  EXPECT_EQ(t.output, (Vector{40}));
  EXPECT_EQ(forward(net, Vector{0, 2}), (Vector{22}));
  const EvalTrace z = evaluate(net, Vector{0, 0});
  EXPECT_EQ(z.pre[0], (Vector{1, -2}));
  EXPECT_EQ(z.post[0], (Vector{1, 0}));
  EXPECT_EQ(z.output, (Vector{2}));
}

TEST(Evaluate, DimensionMismatchNamesWidths) {
  const Network net = fig1Network();
  try {
    evaluate(net, Vector{1, 2, 3});
    FAIL();
  } catch (const DimensionError& e) {
    EXPECT_EQ(e.expected(), 2u);
    EXPECT_EQ(e.actual(), 3u);
  }
  EXPECT_THROW(gradient(net, Vector{1, 2}, Vector{1, 1}), DimensionError);
  EXPECT_THROW(evaluate(net, Vector{1, std::nan("")}), ValueError);
}

TEST(Evaluate, PiecewiseLinearInsideRegion) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const Network net = randomNetwork(rng, {4, 6, 5, 3});
    const Vector a = randomInput(rng, 4);
    if (boundaryDistance(net, a) < 1e-2) continue;
    Vector b = a;
    for (double& v : b) v += 1e-4;
    const EvalTrace ta = evaluate(net, a), tb = evaluate(net, b);
    bool same = true;
    for (std::size_t l = 0; l < ta.post.size(); ++l) {
      for (std::size_t i = 0; i < ta.pre[l].size(); ++i) same &= (ta.pre[l][i] > 0) == (tb.pre[l][i] > 0);
    }
    if (!same) continue;
    Vector mid(4);
    for (std::size_t i = 0; i < 4; ++i) mid[i] = 0.5 * (a[i] + b[i]);
    const Vector ym = forward(net, mid);
    for (std::size_t k = 0; k < 3; ++k) {
      EXPECT_NEAR(ym[k], 0.5 * (ta.output[k] + tb.output[k]), 1e-12);
    }
  }
}

TEST(Gradient, ToyNetwork) {
  const Network net = fig1Network();
  EXPECT_EQ(gradient(net, Vector{2, 3}, Vector{1}), (Vector{4, 10}));
  EXPECT_EQ(gradient(net, Vector{2, 3}, Vector{0}), (Vector{0, 0}));
}

TEST(Gradient, SingleAffineLayerIsWeightRow) {
  std::mt19937_64 rng(3);
  const Network net = randomNetwork(rng, {5, 3});
  for (std::size_t j = 0; j < 3; ++j) {
    Vector e(3, 0.0);
    e[j] = 1.0;
    const Vector g = gradient(net, randomInput(rng, 5), e);
    const auto row = net.layer(0).weights.row(j);
    EXPECT_EQ(g, Vector(row.begin(), row.end()));
  }
}

TEST(Gradient, ZeroAtReluKink) {
  // Hidden pre-activation exactly 0 at x = 0.5 contributes nothing.
  Matrix w1(1, 1, 2.0), w2(1, 1, 3.0);
  const Network net({{w1, {-1.0}}, {w2, {0.0}}});
  EXPECT_EQ(gradient(net, Vector{0.5}, Vector{1}), (Vector{0}));
  EXPECT_EQ(gradient(net, Vector{0.6}, Vector{1}), (Vector{6}));
}

TEST(Gradient, MatchesCentralDifferences) {
  std::mt19937_64 rng(5);
  int checked = 0;
  for (int n = 0; n < 5; ++n) {
    const Network net = randomNetwork(rng, {9, 16, 16, 3});
    for (int p = 0; p < 100; ++p) {
      const Vector x = randomInput(rng, 9);
      if (boundaryDistance(net, x) < 1e-3) continue;
      const Vector cot = randomInput(rng, 3);
      const Vector g = gradient(net, x, cot);
      for (std::size_t i = 0; i < 9; ++i) {
        const double h = 1e-6;
        Vector xp = x, xm = x;
        xp[i] += h;
        xm[i] -= h;
        const double fd = (dot(forward(net, xp), cot) - dot(forward(net, xm), cot)) / (2 * h);
        EXPECT_NEAR(g[i], fd, 1e-4 * std::max(1.0, std::abs(fd)));
      }
      ++checked;
    }
  }
  EXPECT_GT(checked, 400);
}

TEST(ParamGradient, ToyNetwork) {
  const Network net = fig1Network();
  const NetworkGradient g = paramGradient(net, Vector{2, 3}, Vector{1});
  EXPECT_EQ(g.layers[1].biases, (Vector{1}));
  EXPECT_EQ(g.layers[1].weights(0, 0), 20.0);
  EXPECT_EQ(g.layers[1].weights(0, 1), 0.0);
  // Only the active first unit passes gradient back: d/dW1[0] = w2[0] * x.
  EXPECT_EQ(g.layers[0].weights(0, 0), 4.0);
  EXPECT_EQ(g.layers[0].weights(0, 1), 6.0);
  EXPECT_EQ(g.layers[0].weights(1, 0), 0.0);
  EXPECT_EQ(g.layers[0].biases, (Vector{2, 0}));
}

TEST(ParamGradient, LastBiasIsCotangentAndZeroCotangentIsZero) {
  std::mt19937_64 rng(8);
  const Network net = randomNetwork(rng, {4, 5, 3});
  const Vector x = randomInput(rng, 4), cot{0.5, -2, 1.25};
  EXPECT_EQ(paramGradient(net, x, cot).layers.back().biases, cot);
  EXPECT_EQ(paramGradient(net, x, Vector{0, 0, 0}).squaredNorm(), 0.0);
}

TEST(ParamGradient, MatchesFiniteDifferences) {
  std::mt19937_64 rng(21);
  const Network net = randomNetwork(rng, {3, 4, 4, 2});
  Vector x = randomInput(rng, 3);
  while (boundaryDistance(net, x) < 1e-2) x = randomInput(rng, 3);
  const Vector cot{1.0, -0.5};
  const NetworkGradient g = paramGradient(net, x, cot);
  for (std::size_t l = 0; l < net.numLayers(); ++l) {
    const std::size_t nw = net.layer(l).weights.data().size();
    for (std::size_t k = 0; k < nw + net.layer(l).biases.size(); ++k) {
      NetworkGradient dir = NetworkGradient::zerosLike(net);
      double analytic;
      if (k < nw) {
        dir.layers[l].weights.data()[k] = 1.0;
        analytic = g.layers[l].weights.data()[k];
      } else {
        dir.layers[l].biases[k - nw] = 1.0;
        analytic = g.layers[l].biases[k - nw];
      }
      const double h = 1e-6;
      const double fd = (dot(forward(applyGradient(net, dir, h), x), cot) -
                         dot(forward(applyGradient(net, dir, -h), x), cot)) /
                        (2 * h);
      EXPECT_NEAR(analytic, fd, 1e-6);
    }
  }
}

TEST(ParamGradient, AccumulateScales) {
  std::mt19937_64 rng(2);
  const Network net = randomNetwork(rng, {3, 4, 2});
  const Vector x = randomInput(rng, 3), cot{1, 2};
  NetworkGradient acc = NetworkGradient::zerosLike(net);
  accumulateParamGradient(net, x, cot, acc, 0.5);
  accumulateParamGradient(net, x, cot, acc, 0.5);
  const NetworkGradient g = paramGradient(net, x, cot);
  EXPECT_NEAR(acc.squaredNorm(), g.squaredNorm(), 1e-12);
}

TEST(Network, ConstructorValidates) {
  EXPECT_THROW(Network(std::vector<AffineLayer>{}), ShapeError);
  EXPECT_THROW(Network({{Matrix(2, 2), Vector(3)}}), ShapeError);
  EXPECT_THROW(Network({{Matrix(2, 2), Vector(2)}, {Matrix(1, 3), Vector(1)}}), ShapeError);
  Matrix w(1, 1, std::numeric_limits<double>::infinity());
  EXPECT_THROW(Network({{w, Vector(1)}}), ValueError);
  EXPECT_EQ(fig1Network().numRelus(), 2u);
}

TEST(Serialization, ToyRoundTrip) {
  const Network net = fig1Network();
  const std::string text = saveNetwork(net);
  EXPECT_EQ(text.rfind("nnet-v1 2 1 2\n", 0), 0u);
  EXPECT_EQ(loadNetwork(text), net);
}

TEST(Serialization, RandomRoundTripIsBitExact) {
  std::mt19937_64 rng(17);
  for (int n = 0; n < 10; ++n) {
    const Network net = randomNetwork(rng, {9, 16, 16, 3}, 3.0);
    const Network back = loadNetwork(saveNetwork(net));
    ASSERT_EQ(back, net);
    for (int p = 0; p < 10; ++p) {
      const Vector x = randomInput(rng, 9);
      EXPECT_EQ(forward(back, x), forward(net, x));
    }
  }
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 5e-324}) {
    EXPECT_EQ(std::strtod(formatDouble(v).c_str(), nullptr), v);
  }
}

TEST(Serialization, CommentsIgnored) {
  const std::string text = "# toy\nnnet-v1 1 1 1\nlayer 1 1\n# weights\n2\n-1\n";
  EXPECT_EQ(forward(loadNetwork(text), Vector{3}), (Vector{5}));
}

TEST(Serialization, DistinctErrors) {
  EXPECT_THROW(loadNetwork(""), FormatError);
  EXPECT_THROW(loadNetwork("nnet-v2 1 1 1\nlayer 1 1\n1\n0\n"), FormatError);
  EXPECT_THROW(loadNetwork("nnet-v1 1 1 1\nlayer 1 1\nabc\n0\n"), FormatError);
  EXPECT_THROW(loadNetwork("nnet-v1 1 1 1\nlayer 1 1\n1\n"), FormatError);
  EXPECT_THROW(loadNetwork("nnet-v1 1 1 1\nlayer 1 1\n1 2\n0\n"), ShapeError);
  EXPECT_THROW(loadNetwork("nnet-v1 2 1 2\nlayer 2 2\n1 0\n0 1\n0 0\nlayer 1 3\n1 1 1\n0\n"), ShapeError);
  EXPECT_THROW(loadNetwork("nnet-v1 3 1 1\nlayer 1 1\n1\n0\n"), ShapeError);
  EXPECT_THROW(loadNetwork("nnet-v1 1 1 1\nlayer 1 1\nnan\n0\n"), ValueError);
  EXPECT_THROW(loadNetwork("nnet-v1 1 1 1\nlayer 1 1\ninf\n0\n"), ValueError);
  EXPECT_THROW(loadNetwork("nnet-v1 1 1 1\nlayer 1 1\n1e999\n0\n"), ValueError);
}
