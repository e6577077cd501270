#pragma once

// Brute-force reference for two-input networks: enumerate every ReLU phase
// pattern, write the region as a 2D polygon and look for a feasible vertex
// in exact arithmetic. Shares no code with the verifier.

#include <array>
#include <cstdint>
#include <vector>

#include <gmpxx.h>
#include <random>

#include "navguard/netcore.hpp"
#include "navguard/verifier.hpp"
#include "fixtures.hpp"

namespace navguard::testing {

struct OutputRow {
  std::vector<double> coef;  // over outputs
  bool ge = true;            // coef . y >= rhs, else <=
  double rhs = 0.0;
};

namespace oracle_detail {

// a0*x0 + a1*x1 <= b
struct HalfPlane {
  mpq_class a0, a1, b;
};

struct Lin {
  mpq_class a0, a1, c;
};

inline bool polygonNonEmpty(const std::vector<HalfPlane>& hs) {
  auto satisfies = [&](const mpq_class& x0, const mpq_class& x1) {
    for (const HalfPlane& h : hs) {
      if (h.a0 * x0 + h.a1 * x1 > h.b) return false;
    }
    return true;
  };
  for (std::size_t i = 0; i < hs.size(); ++i) {
    for (std::size_t j = i + 1; j < hs.size(); ++j) {
      const mpq_class det = hs[i].a0 * hs[j].a1 - hs[i].a1 * hs[j].a0;
      if (sgn(det) == 0) continue;
      const mpq_class x0 = (hs[i].b * hs[j].a1 - hs[i].a1 * hs[j].b) / det;
      const mpq_class x1 = (hs[i].a0 * hs[j].b - hs[i].b * hs[j].a0) / det;
      if (satisfies(x0, x1)) return true;
    }
  }
  return false;
}

}  // namespace oracle_detail

// True iff some x in the box satisfies every row.
inline bool bruteForceSat(const Network& net, const std::array<double, 4>& box,
                          const std::vector<OutputRow>& rows) {
  using namespace oracle_detail;
  std::size_t relus = 0;
  for (std::size_t l = 0; l + 1 < net.numLayers(); ++l) relus += net.layer(l).outWidth();
  for (std::uint64_t pattern = 0; pattern < (std::uint64_t{1} << relus); ++pattern) {
    std::vector<HalfPlane> hs;
    hs.push_back({-1, 0, -mpq_class(box[0])});
    hs.push_back({1, 0, mpq_class(box[1])});
    hs.push_back({0, -1, -mpq_class(box[2])});
    hs.push_back({0, 1, mpq_class(box[3])});
    std::vector<Lin> cur{{1, 0, 0}, {0, 1, 0}};
    std::size_t bit = 0;
    for (std::size_t l = 0; l < net.numLayers(); ++l) {
      const AffineLayer& layer = net.layer(l);
      std::vector<Lin> next(layer.outWidth());
      for (std::size_t u = 0; u < layer.outWidth(); ++u) {
        Lin e{0, 0, mpq_class(layer.biases[u])};
        for (std::size_t i = 0; i < layer.inWidth(); ++i) {
          const mpq_class w(layer.weights(u, i));
          e.a0 += w * cur[i].a0;
          e.a1 += w * cur[i].a1;
          e.c += w * cur[i].c;
        }
        next[u] = e;
      }
      if (l + 1 < net.numLayers()) {
        for (Lin& e : next) {
          const bool on = (pattern >> bit++) & 1;
          if (on) {
            hs.push_back({-e.a0, -e.a1, e.c});  // e >= 0
          } else {
            hs.push_back({e.a0, e.a1, -e.c});  // e <= 0
            e = {0, 0, 0};
          }
        }
      }
      cur = std::move(next);
    }
    for (const OutputRow& r : rows) {
      Lin e{0, 0, 0};
      for (std::size_t j = 0; j < r.coef.size(); ++j) {
        const mpq_class c(r.coef[j]);
        e.a0 += c * cur[j].a0;
        e.a1 += c * cur[j].a1;
        e.c += c * cur[j].c;
      }
      const mpq_class rhs(r.rhs);
      if (r.ge) {
        hs.push_back({-e.a0, -e.a1, e.c - rhs});
      } else {
        hs.push_back({e.a0, e.a1, rhs - e.c});
      }
    }
    if (polygonNonEmpty(hs)) return true;
  }
  return false;
}

inline bool rowsHold(const Network& net, const Vector& x, const std::vector<OutputRow>& rows) {
  const Vector y = forward(net, x);
  for (const OutputRow& r : rows) {
    double v = 0.0;
    for (std::size_t j = 0; j < r.coef.size(); ++j) v += r.coef[j] * y[j];
    if (r.ge ? v < r.rhs : v > r.rhs) return false;
  }
  return true;
}

// Number of points of an n x n grid over the box satisfying every row.
inline int gridHits(const Network& net, const std::array<double, 4>& box, const std::vector<OutputRow>& rows,
                    int n = 100) {
  int hits = 0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const Vector x{box[0] + (box[1] - box[0]) * i / (n - 1), box[2] + (box[3] - box[2]) * j / (n - 1)};
      hits += rowsHold(net, x, rows);
    }
  }
  return hits;
}

// Random 2-3-3-2 network, box inside [-1,1]^2 and one or two output rows.
struct RandomCase {
  verify::Query query;
  std::array<double, 4> box;
  std::vector<OutputRow> rows;
};

inline RandomCase randomCase(std::mt19937_64& rng) {
  using namespace verify;
  RandomCase rc;
  auto net = share(randomNetwork(rng, {2, 3, 3, 2}));
  std::uniform_real_distribution<double> u(-1, 1);
  const double a = u(rng), b = u(rng), c = u(rng), d = u(rng);
  rc.box = {std::min(a, b), std::max(a, b), std::min(c, d), std::max(c, d)};
  rc.query = Query::make(net, 1, {0, 0});
  rc.query.input_boxes[0] = {{rc.box[0], rc.box[1]}, {rc.box[2], rc.box[3]}};
  const std::size_t nrows = 1 + rng() % 2;
  for (std::size_t r = 0; r < nrows; ++r) {
    OutputRow row{{u(rng), u(rng)}, (rng() & 1) != 0, 0.0};
    // Threshold near the value at a random point keeps both outcomes common.
    const Vector y = forward(*net, Vector{rc.box[0] + (rc.box[1] - rc.box[0]) * (u(rng) + 1) / 2,
                                          rc.box[2] + (rc.box[3] - rc.box[2]) * (u(rng) + 1) / 2});
    row.rhs = row.coef[0] * y[0] + row.coef[1] * y[1] + 0.3 * u(rng);
    rc.rows.push_back(row);
    rc.query.constraints.push_back({{{out(0, 0), row.coef[0]}, {out(0, 1), row.coef[1]}},
                                    row.ge ? Relation::GE : Relation::LE, row.rhs,
                                    ConstraintTag::Post, ""});
  }
  return rc;
}

}  // namespace navguard::testing
