#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace navguard {

using Vector = std::vector<double>;

// Dense row-major matrix. Row r holds the incoming weights of output unit r.
class Matrix {
public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }
  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }

  std::span<const double> data() const { return data_; }
  std::span<double> data() { return data_; }

  friend bool operator==(const Matrix&, const Matrix&) = default;

private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

struct AffineLayer {
  Matrix weights;  // out_width x in_width
  Vector biases;   // out_width

  std::size_t inWidth() const { return weights.cols(); }
  std::size_t outWidth() const { return weights.rows(); }

  friend bool operator==(const AffineLayer&, const AffineLayer&) = default;
};

// Fully-connected network: affine layers with ReLU after every layer except
// the last. Immutable once constructed; the constructor validates shapes and
// finiteness.
class Network {
public:
  explicit Network(std::vector<AffineLayer> layers);

  std::size_t inputDim() const { return layers_.front().inWidth(); }
  std::size_t outputDim() const { return layers_.back().outWidth(); }
  std::size_t numLayers() const { return layers_.size(); }
  std::size_t numHidden() const { return layers_.size() - 1; }
  const AffineLayer& layer(std::size_t i) const { return layers_[i]; }
  const std::vector<AffineLayer>& layers() const { return layers_; }

  // Total number of ReLU units.
  std::size_t numRelus() const;

  friend bool operator==(const Network&, const Network&) = default;

private:
  std::vector<AffineLayer> layers_;
};

struct EvalTrace {
  std::vector<Vector> pre;   // one per layer, including the output layer
  std::vector<Vector> post;  // one per hidden layer
  Vector output;
};

// Same shapes as the network's layers.
struct NetworkGradient {
  std::vector<AffineLayer> layers;

  static NetworkGradient zerosLike(const Network& net);
  void setZero();
  void addScaled(const NetworkGradient& other, double scale);
  double squaredNorm() const;
};

EvalTrace evaluate(const Network& net, std::span<const double> input);

// Output only; avoids building the trace.
Vector forward(const Network& net, std::span<const double> input);

// d(cotangent . output)/d(input) for the linear region containing input.
// The ReLU derivative at exactly zero is taken to be 0.
Vector gradient(const Network& net, std::span<const double> input,
                std::span<const double> output_cotangent);

NetworkGradient paramGradient(const Network& net, std::span<const double> input,
                              std::span<const double> output_cotangent);

// Adds scale * paramGradient(net, input, cotangent) into acc.
void accumulateParamGradient(const Network& net, std::span<const double> input,
                             std::span<const double> output_cotangent,
                             NetworkGradient& acc, double scale = 1.0);

// Returns net with every parameter p replaced by p + scale * g.
Network applyGradient(const Network& net, const NetworkGradient& g, double scale);

// Text document format ("nnet-v1"):
//
//   nnet-v1 <input_dim> <output_dim> <num_layers>
//   layer <out_width> <in_width>
//   <out_width lines of in_width weights>
//   <one line of out_width biases>
//   ... repeated per layer
//
// Numbers are written in shortest round-trip decimal form (std::to_chars), so
// load(save(n)) reproduces every weight bit for bit. Lines starting with '#'
// are ignored.
Network loadNetwork(std::string_view text);
std::string saveNetwork(const Network& net);

Network loadNetworkFile(const std::string& path);
void saveNetworkFile(const Network& net, const std::string& path);

// Shortest decimal that parses back to exactly the same double.
std::string formatDouble(double value);

}  // namespace navguard
