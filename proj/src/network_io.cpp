#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "navguard/error.hpp"
#include "navguard/netcore.hpp"

namespace navguard {

namespace {

// Splits the document into non-empty, non-comment lines of tokens, keeping
// 1-based line numbers for diagnostics.
struct Line {
  std::size_t number;
  std::vector<std::string_view> tokens;
};

std::vector<Line> tokenize(std::string_view text) {
  std::vector<Line> lines;
  std::size_t number = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view raw = text.substr(pos, end - pos);
    ++number;
    pos = end + 1;
    Line line{number, {}};
    std::size_t i = 0;
    while (i < raw.size()) {
      while (i < raw.size() && std::isspace(static_cast<unsigned char>(raw[i]))) ++i;
      std::size_t j = i;
      while (j < raw.size() && !std::isspace(static_cast<unsigned char>(raw[j]))) ++j;
      if (j > i) line.tokens.push_back(raw.substr(i, j - i));
      i = j;
    }
    if (!line.tokens.empty() && line.tokens.front().front() != '#') lines.push_back(line);
    if (end == text.size()) break;
  }
  return lines;
}

std::string where(const Line& line) { return "line " + std::to_string(line.number); }

double parseNumber(std::string_view tok, const Line& line) {
  double v = 0.0;
  const char* first = tok.data();
  if (!tok.empty() && tok.front() == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, tok.data() + tok.size(), v);
  if (ec == std::errc::result_out_of_range) {
    throw ValueError(where(line) + ": value '" + std::string(tok) + "' is out of range");
  }
  if (ec != std::errc() || ptr != tok.data() + tok.size()) {
    throw FormatError(where(line) + ": cannot parse number '" + std::string(tok) + "'");
  }
  if (!std::isfinite(v)) {
    throw ValueError(where(line) + ": non-finite value '" + std::string(tok) + "'");
  }
  return v;
}

std::size_t parseCount(std::string_view tok, const Line& line) {
  std::size_t v = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size() || v == 0) {
    throw FormatError(where(line) + ": expected a positive count, got '" + std::string(tok) + "'");
  }
  return v;
}

}  // namespace

std::string formatDouble(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

std::string saveNetwork(const Network& net) {
  std::string out = "nnet-v1 " + std::to_string(net.inputDim()) + " " +
                    std::to_string(net.outputDim()) + " " + std::to_string(net.numLayers()) + "\n";
  for (const AffineLayer& layer : net.layers()) {
    out += "layer " + std::to_string(layer.outWidth()) + " " + std::to_string(layer.inWidth()) +
           "\n";
    for (std::size_t r = 0; r < layer.outWidth(); ++r) {
      auto row = layer.weights.row(r);
      for (std::size_t c = 0; c < row.size(); ++c) {
        if (c) out += ' ';
        out += formatDouble(row[c]);
      }
      out += '\n';
    }
    for (std::size_t r = 0; r < layer.outWidth(); ++r) {
      if (r) out += ' ';
      out += formatDouble(layer.biases[r]);
    }
    out += '\n';
  }
  return out;
}

Network loadNetwork(std::string_view text) {
  const std::vector<Line> lines = tokenize(text);
  if (lines.empty()) throw FormatError("empty network document");
  const Line& header = lines.front();
  if (header.tokens.size() != 4 || header.tokens[0] != "nnet-v1") {
    throw FormatError(where(header) + ": expected header 'nnet-v1 <in> <out> <layers>'");
  }
  const std::size_t input_dim = parseCount(header.tokens[1], header);
  const std::size_t output_dim = parseCount(header.tokens[2], header);
  const std::size_t num_layers = parseCount(header.tokens[3], header);

  std::vector<AffineLayer> layers;
  std::size_t li = 1;
  auto next = [&]() -> const Line& {
    if (li >= lines.size()) throw FormatError("unexpected end of network document");
    return lines[li++];
  };
  for (std::size_t k = 0; k < num_layers; ++k) {
    const Line& lh = next();
    if (lh.tokens.size() != 3 || lh.tokens[0] != "layer") {
      throw FormatError(where(lh) + ": expected 'layer <out_width> <in_width>'");
    }
    const std::size_t out_w = parseCount(lh.tokens[1], lh);
    const std::size_t in_w = parseCount(lh.tokens[2], lh);
    AffineLayer layer{Matrix(out_w, in_w), Vector(out_w, 0.0)};
    for (std::size_t r = 0; r < out_w; ++r) {
      const Line& wl = next();
      if (wl.tokens.size() != in_w) {
        throw ShapeError(where(wl) + ": weight row has " + std::to_string(wl.tokens.size()) +
                         " entries, layer declares in_width " + std::to_string(in_w));
      }
      for (std::size_t c = 0; c < in_w; ++c) layer.weights(r, c) = parseNumber(wl.tokens[c], wl);
    }
    const Line& bl = next();
    if (bl.tokens.size() != out_w) {
      throw ShapeError(where(bl) + ": bias row has " + std::to_string(bl.tokens.size()) +
                       " entries, layer declares out_width " + std::to_string(out_w));
    }
    for (std::size_t r = 0; r < out_w; ++r) layer.biases[r] = parseNumber(bl.tokens[r], bl);
    layers.push_back(std::move(layer));
  }
  if (li != lines.size()) throw FormatError(where(lines[li]) + ": trailing content");

  Network net(std::move(layers));
  if (net.inputDim() != input_dim || net.outputDim() != output_dim) {
    throw ShapeError("header declares " + std::to_string(input_dim) + "->" +
                     std::to_string(output_dim) + " but layers give " +
                     std::to_string(net.inputDim()) + "->" + std::to_string(net.outputDim()));
  }
  return net;
}

Network loadNetworkFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open network file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return loadNetwork(ss.str());
}

void saveNetworkFile(const Network& net, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write network file '" + path + "'");
  out << saveNetwork(net);
  if (!out) throw Error("failed writing network file '" + path + "'");
}

}  // namespace navguard
