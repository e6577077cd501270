#include "navguard/netcore.hpp"

#include <algorithm>
#include <cmath>

#include "navguard/error.hpp"

namespace navguard {

namespace {

bool allFinite(std::span<const double> values) {
  return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

void checkInput(const Network& net, std::span<const double> input) {
  if (input.size() != net.inputDim()) {
    throw DimensionError("network input", net.inputDim(), input.size());
  }
}

void checkCotangent(const Network& net, std::span<const double> cot) {
  if (cot.size() != net.outputDim()) {
    throw DimensionError("output cotangent", net.outputDim(), cot.size());
  }
}

void affine(const AffineLayer& layer, std::span<const double> in, Vector& out) {
  out.resize(layer.outWidth());
  for (std::size_t r = 0; r < layer.outWidth(); ++r) {
    double acc = layer.biases[r];
    auto w = layer.weights.row(r);
    for (std::size_t c = 0; c < w.size(); ++c) acc += w[c] * in[c];
    out[r] = acc;
  }
}

// Backpropagates an output cotangent, calling visit(layer_index, layer_input,
// delta) for every layer where delta is d(objective)/d(pre-activation).
// Returns d(objective)/d(input).
template <typename Visit>
Vector backprop(const Network& net, const EvalTrace& trace, std::span<const double> input,
                std::span<const double> cot, Visit&& visit) {
  Vector delta(cot.begin(), cot.end());
  Vector prev;
  for (std::size_t li = net.numLayers(); li-- > 0;) {
    const AffineLayer& layer = net.layer(li);
    std::span<const double> layer_in =
        li == 0 ? input : std::span<const double>(trace.post[li - 1]);
    visit(li, layer_in, delta);
    prev.assign(layer.inWidth(), 0.0);
    for (std::size_t r = 0; r < layer.outWidth(); ++r) {
      const double d = delta[r];
      if (d == 0.0) continue;
      auto w = layer.weights.row(r);
      for (std::size_t c = 0; c < w.size(); ++c) prev[c] += w[c] * d;
    }
    if (li > 0) {
      const Vector& pre = trace.pre[li - 1];
      for (std::size_t c = 0; c < prev.size(); ++c) {
        if (!(pre[c] > 0.0)) prev[c] = 0.0;
      }
    }
    delta.swap(prev);
  }
  return delta;
}

}  // namespace

Network::Network(std::vector<AffineLayer> layers) : layers_(std::move(layers)) {
  if (layers_.empty()) throw ShapeError("network has no layers");
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const AffineLayer& l = layers_[i];
    if (l.weights.rows() == 0 || l.weights.cols() == 0) {
      throw ShapeError("layer " + std::to_string(i) + " has zero width");
    }
    if (l.biases.size() != l.weights.rows()) {
      throw ShapeError("layer " + std::to_string(i) + ": " + std::to_string(l.biases.size()) +
                       " biases for " + std::to_string(l.weights.rows()) + " units");
    }
    if (i > 0 && layers_[i - 1].outWidth() != l.inWidth()) {
      throw ShapeError("layer " + std::to_string(i) + " expects input width " +
                       std::to_string(l.inWidth()) + " but layer " + std::to_string(i - 1) +
                       " has output width " + std::to_string(layers_[i - 1].outWidth()));
    }
    if (!allFinite(l.weights.data()) || !allFinite(l.biases)) {
      throw ValueError("layer " + std::to_string(i) + " contains a non-finite parameter");
    }
  }
}

std::size_t Network::numRelus() const {
  std::size_t n = 0;
  for (std::size_t i = 0; i + 1 < layers_.size(); ++i) n += layers_[i].outWidth();
  return n;
}

NetworkGradient NetworkGradient::zerosLike(const Network& net) {
  NetworkGradient g;
  g.layers.reserve(net.numLayers());
  for (const auto& l : net.layers()) {
    g.layers.push_back({Matrix(l.outWidth(), l.inWidth()), Vector(l.outWidth(), 0.0)});
  }
  return g;
}

void NetworkGradient::setZero() {
  for (auto& l : layers) {
    std::fill(l.weights.data().begin(), l.weights.data().end(), 0.0);
    std::fill(l.biases.begin(), l.biases.end(), 0.0);
  }
}

void NetworkGradient::addScaled(const NetworkGradient& other, double scale) {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    auto dst = layers[i].weights.data();
    auto src = other.layers[i].weights.data();
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += scale * src[k];
    for (std::size_t k = 0; k < layers[i].biases.size(); ++k) {
      layers[i].biases[k] += scale * other.layers[i].biases[k];
    }
  }
}

double NetworkGradient::squaredNorm() const {
  double s = 0.0;
  for (const auto& l : layers) {
    for (double v : l.weights.data()) s += v * v;
    for (double v : l.biases) s += v * v;
  }
  return s;
}

EvalTrace evaluate(const Network& net, std::span<const double> input) {
  checkInput(net, input);
  if (!allFinite(input)) throw ValueError("network input contains a non-finite value");
  EvalTrace trace;
  trace.pre.resize(net.numLayers());
  trace.post.resize(net.numHidden());
  std::span<const double> cur = input;
  for (std::size_t li = 0; li < net.numLayers(); ++li) {
    affine(net.layer(li), cur, trace.pre[li]);
    if (li + 1 < net.numLayers()) {
      Vector& post = trace.post[li];
      post.resize(trace.pre[li].size());
      for (std::size_t k = 0; k < post.size(); ++k) post[k] = std::max(0.0, trace.pre[li][k]);
      cur = post;
    }
  }
  trace.output = trace.pre.back();
  return trace;
}

Vector forward(const Network& net, std::span<const double> input) {
  checkInput(net, input);
  Vector a(input.begin(), input.end());
  Vector b;
  for (std::size_t li = 0; li < net.numLayers(); ++li) {
    affine(net.layer(li), a, b);
    if (li + 1 < net.numLayers()) {
      for (double& v : b) v = std::max(0.0, v);
    }
    a.swap(b);
  }
  return a;
}

Vector gradient(const Network& net, std::span<const double> input,
                std::span<const double> output_cotangent) {
  checkCotangent(net, output_cotangent);
  EvalTrace trace = evaluate(net, input);
  return backprop(net, trace, input, output_cotangent,
                  [](std::size_t, std::span<const double>, const Vector&) {});
}

void accumulateParamGradient(const Network& net, std::span<const double> input,
                             std::span<const double> output_cotangent, NetworkGradient& acc,
                             double scale) {
  checkCotangent(net, output_cotangent);
  EvalTrace trace = evaluate(net, input);
  backprop(net, trace, input, output_cotangent,
           [&](std::size_t li, std::span<const double> layer_in, const Vector& delta) {
             AffineLayer& g = acc.layers[li];
             for (std::size_t r = 0; r < delta.size(); ++r) {
               const double d = scale * delta[r];
               if (d == 0.0) continue;
               g.biases[r] += d;
               auto row = g.weights.row(r);
               for (std::size_t c = 0; c < row.size(); ++c) row[c] += d * layer_in[c];
             }
           });
}

NetworkGradient paramGradient(const Network& net, std::span<const double> input,
                              std::span<const double> output_cotangent) {
  NetworkGradient g = NetworkGradient::zerosLike(net);
  accumulateParamGradient(net, input, output_cotangent, g, 1.0);
  return g;
}

Network applyGradient(const Network& net, const NetworkGradient& g, double scale) {
  std::vector<AffineLayer> layers = net.layers();
  for (std::size_t i = 0; i < layers.size(); ++i) {
    auto w = layers[i].weights.data();
    auto gw = g.layers[i].weights.data();
    for (std::size_t k = 0; k < w.size(); ++k) w[k] += scale * gw[k];
    for (std::size_t k = 0; k < layers[i].biases.size(); ++k) {
      layers[i].biases[k] += scale * g.layers[i].biases[k];
    }
  }
  return Network(std::move(layers));
}

}  // namespace navguard
