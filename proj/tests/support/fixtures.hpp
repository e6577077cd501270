#pragma once

#include <memory>
#include <random>
#include <vector>

#include "navguard/netcore.hpp"

namespace navguard::testing {

// The two-input toy network: hidden weights [[2,5],[-4,1]], biases [1,-2],
// output weights [2,-1].
inline Network fig1Network() {
  Matrix w1(2, 2);
  w1(0, 0) = 2;
  w1(0, 1) = 5;
  w1(1, 0) = -4;
  w1(1, 1) = 1;
  Matrix w2(1, 2);
  w2(0, 0) = 2;
  w2(0, 1) = -1;
  return Network({{w1, {1, -2}}, {w2, {0}}});
}

// 9 -> 3 single affine layer with constant outputs.
inline Network constantPolicy(double forward, double left, double right) {
  return Network({{Matrix(3, 9, 0.0), {forward, left, right}}});
}

inline Network alwaysForward() { return constantPolicy(10, 0, 0); }
inline Network alwaysLeft() { return constantPolicy(0, 10, 0); }
inline Network alwaysRight() { return constantPolicy(0, 0, 10); }

// y_FORWARD = scale * (x3 - tau), other outputs 0. With a hidden layer the
// same function is written as relu(x3 - tau) - relu(tau - x3).
inline Network thresholdPolicy(double tau, bool hidden = false, double scale = 1.0) {
  if (!hidden) {
    Matrix w(3, 9, 0.0);
    w(0, 3) = scale;
    return Network({{w, {-scale * tau, 0, 0}}});
  }
  Matrix w1(2, 9, 0.0);
  w1(0, 3) = 1;
  w1(1, 3) = -1;
  Matrix w2(3, 2, 0.0);
  w2(0, 0) = scale;
  w2(0, 1) = -scale;
  return Network({{w1, {-tau, tau}}, {w2, {0, 0, 0}}});
}

inline Network randomNetwork(std::mt19937_64& rng, const std::vector<std::size_t>& widths,
                             double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  std::vector<AffineLayer> layers;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    AffineLayer layer{Matrix(widths[l + 1], widths[l]), Vector(widths[l + 1])};
    for (double& w : layer.weights.data()) w = u(rng);
    for (double& b : layer.biases) b = u(rng);
    layers.push_back(std::move(layer));
  }
  return Network(std::move(layers));
}

inline std::shared_ptr<const Network> share(Network n) {
  return std::make_shared<const Network>(std::move(n));
}

}  // namespace navguard::testing
