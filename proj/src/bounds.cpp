#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "navguard/error.hpp"
#include "verifier_internal.hpp"

namespace navguard::verify {

namespace detail {

namespace {

// Widening applied to every computed bound so that rounding in the double
// pipeline can never make a bound unsound.
double pad(double magnitude) { return 1e-9 * (1.0 + magnitude); }

double roundDown(const mpq_class& q) {
  double d = q.get_d();
  if (mpq_class(d) > q) d = std::nextafter(d, -kInf);
  return d;
}

double roundUp(const mpq_class& q) {
  double d = q.get_d();
  if (mpq_class(d) < q) d = std::nextafter(d, kInf);
  return d;
}

// Union-find over input variables; value(x) = value(parent) + offset.
struct OffsetUnion {
  std::vector<std::size_t> parent;
  std::vector<mpq_class> offset;

  explicit OffsetUnion(std::size_t n) : parent(n), offset(n, 0) {
    std::iota(parent.begin(), parent.end(), 0);
  }

  std::pair<std::size_t, mpq_class> find(std::size_t x) {
    if (parent[x] == x) return {x, 0};
    auto [root, off] = find(parent[x]);
    offset[x] += off;
    parent[x] = root;
    return {root, offset[x]};
  }

  // Records x_a = x_b + d. Returns false on contradiction.
  bool unite(std::size_t a, std::size_t b, const mpq_class& d) {
    auto [ra, oa] = find(a);
    auto [rb, ob] = find(b);
    if (ra == rb) return oa == ob + d;
    // Keep the smaller index as the root so numbering is stable.
    if (ra < rb) {
      parent[rb] = ra;
      offset[rb] = oa - d - ob;
    } else {
      parent[ra] = rb;
      offset[ra] = ob + d - oa;
    }
    return true;
  }
};

}  // namespace

Problem buildProblem(const LinearSystem& sys) {
  Problem pb;
  pb.sys = &sys;
  pb.net = sys.network.get();
  pb.k = sys.numCopies();
  const Network& net = *pb.net;

  // Variable index -> (copy, is_output, index).
  struct Info {
    bool known = false;
    std::size_t copy = 0;
    bool output = false;
    std::size_t index = 0;
  };
  std::vector<Info> info(sys.variables.size());
  std::vector<std::size_t> input_slot(sys.variables.size(), static_cast<std::size_t>(-1));
  std::vector<std::size_t> input_vars;
  for (std::size_t c = 0; c < pb.k; ++c) {
    const CopyLayout& lay = sys.copies[c];
    for (std::size_t i = 0; i < lay.inputs.size(); ++i) {
      info[lay.inputs[i]] = {true, c, false, i};
      input_slot[lay.inputs[i]] = input_vars.size();
      input_vars.push_back(lay.inputs[i]);
    }
    for (std::size_t i = 0; i < lay.outputs.size(); ++i) info[lay.outputs[i]] = {true, c, true, i};
  }

  OffsetUnion uf(input_vars.size());
  for (const LinearConstraint& lc : sys.constraints) {
    if (lc.tag == ConstraintTag::Affine) continue;
    for (const LinearTerm& t : lc.terms) {
      if (!info[t.var].known) {
        throw ConfigError("constraint '" + lc.label +
                          "' references a hidden neuron; only inputs and outputs are supported");
      }
    }
    // a*x_u - a*x_v == rhs on two inputs becomes an alias.
    if (lc.rel == Relation::EQ && lc.terms.size() == 2 && !info[lc.terms[0].var].output &&
        !info[lc.terms[1].var].output && lc.terms[0].coef == -lc.terms[1].coef &&
        lc.terms[0].coef != 0.0 && lc.terms[0].var != lc.terms[1].var) {
      const mpq_class d = mpq_class(lc.rhs) / mpq_class(lc.terms[0].coef);
      if (!uf.unite(input_slot[lc.terms[0].var], input_slot[lc.terms[1].var], d)) {
        pb.infeasible = true;
        pb.why = "contradictory input equalities";
      }
      continue;
    }
    Row row;
    row.rel = lc.rel;
    row.rhs = lc.rhs;
    row.rhs_q = mpq_class(lc.rhs);
    row.post = lc.tag == ConstraintTag::Post;
    for (const LinearTerm& t : lc.terms) {
      const Info& in = info[t.var];
      row.terms.push_back({in.copy, in.output, in.index, t.coef, mpq_class(t.coef)});
    }
    pb.rows.push_back(std::move(row));
  }

  std::map<std::size_t, std::size_t> root_to_z;
  pb.rep.assign(pb.k, {});
  pb.off_q.assign(pb.k, {});
  pb.off.assign(pb.k, {});
  for (std::size_t s = 0; s < input_vars.size(); ++s) {
    auto [root, off] = uf.find(s);
    auto it = root_to_z.find(root);
    if (it == root_to_z.end()) {
      it = root_to_z.emplace(root, pb.p++).first;
      pb.zlo_q.emplace_back();
      pb.zhi_q.emplace_back();
      pb.zbox.push_back({-kInf, kInf});
    }
    const std::size_t z = it->second;
    const Info& in = info[input_vars[s]];
    pb.rep[in.copy].push_back(z);
    pb.off_q[in.copy].push_back(off);
    pb.off[in.copy].push_back(off.get_d());

    const Interval& box = sys.variables[input_vars[s]].box;
    const mpq_class lo = mpq_class(box.lo) - off;
    const mpq_class hi = mpq_class(box.hi) - off;
    const bool first = !std::isfinite(pb.zbox[z].lo);
    if (first || lo > pb.zlo_q[z]) pb.zlo_q[z] = lo;
    if (first || hi < pb.zhi_q[z]) pb.zhi_q[z] = hi;
    pb.zbox[z] = {roundDown(pb.zlo_q[z]), roundUp(pb.zhi_q[z])};
  }
  for (std::size_t z = 0; z < pb.p; ++z) {
    if (pb.zlo_q[z] > pb.zhi_q[z]) {
      pb.infeasible = true;
      pb.why = "input box empty after applying equalities";
    }
  }

  pb.relu_id.assign(pb.k, {});
  std::map<std::size_t, std::size_t> pre_to_relu;
  for (std::size_t r = 0; r < sys.relus.size(); ++r) pre_to_relu[sys.relus[r].pre] = r;
  pb.relu_pos.resize(sys.relus.size());
  for (std::size_t c = 0; c < pb.k; ++c) {
    const CopyLayout& lay = sys.copies[c];
    pb.relu_id[c].resize(lay.pre.size());
    for (std::size_t l = 0; l < lay.pre.size(); ++l) {
      for (std::size_t u = 0; u < lay.pre[l].size(); ++u) {
        const std::size_t id = pre_to_relu.at(lay.pre[l][u]);
        pb.relu_id[c][l].push_back(id);
        pb.relu_pos[id] = {c, l, u};
      }
    }
  }

  for (const AffineLayer& layer : net.layers()) {
    std::vector<std::vector<mpq_class>> w(layer.outWidth());
    std::vector<mpq_class> b(layer.outWidth());
    for (std::size_t u = 0; u < layer.outWidth(); ++u) {
      auto row = layer.weights.row(u);
      w[u].reserve(row.size());
      for (double v : row) w[u].emplace_back(v);
      b[u] = layer.biases[u];
    }
    pb.wq.push_back(std::move(w));
    pb.bq.push_back(std::move(b));
  }
  return pb;
}

std::vector<std::vector<mpq_class>> inputsFromZ(const Problem& pb, const std::vector<mpq_class>& z) {
  std::vector<std::vector<mpq_class>> x(pb.k);
  for (std::size_t c = 0; c < pb.k; ++c) {
    for (std::size_t i = 0; i < pb.rep[c].size(); ++i) x[c].push_back(z[pb.rep[c][i]] + pb.off_q[c][i]);
  }
  return x;
}

std::vector<Vector> inputsFromZ(const Problem& pb, const std::vector<double>& z) {
  std::vector<Vector> x(pb.k);
  for (std::size_t c = 0; c < pb.k; ++c) {
    for (std::size_t i = 0; i < pb.rep[c].size(); ++i) x[c].push_back(z[pb.rep[c][i]] + pb.off[c][i]);
  }
  return x;
}

namespace {

// Linear form over z plus a constant.
struct Form {
  Vector a;
  double c = 0.0;
};

double concretize(const Form& f, const std::vector<Interval>& zbox, bool upper) {
  double v = f.c;
  double mag = std::abs(f.c);
  for (std::size_t j = 0; j < f.a.size(); ++j) {
    const double a = f.a[j];
    if (a == 0.0) continue;
    const double pick = (a > 0.0) == upper ? zbox[j].hi : zbox[j].lo;
    v += a * pick;
    mag += std::abs(a * pick);
  }
  return upper ? v + pad(mag) : v - pad(mag);
}

struct Walker {
  const Problem& pb;
  NodeBounds& nb;

  // Back-substitutes coef . pre[layer] of copy c down to z, choosing the
  // relaxation side that bounds the expression from above (or below).
  Form backward(std::size_t c, std::size_t layer, Vector coef, double cst, bool upper) const {
    const Network& net = *pb.net;
    Form f{Vector(pb.p, 0.0), cst};
    for (std::size_t m = layer + 1; m-- > 0;) {
      const AffineLayer& L = net.layer(m);
      Vector g(L.inWidth(), 0.0);
      for (std::size_t r = 0; r < L.outWidth(); ++r) {
        const double a = coef[r];
        if (a == 0.0) continue;
        f.c += a * L.biases[r];
        auto w = L.weights.row(r);
        for (std::size_t i = 0; i < w.size(); ++i) g[i] += a * w[i];
      }
      if (m == 0) {
        for (std::size_t i = 0; i < g.size(); ++i) {
          if (g[i] == 0.0) continue;
          f.a[pb.rep[c][i]] += g[i];
          f.c += g[i] * pb.off[c][i];
        }
        break;
      }
      // g is over post[m-1]; relax each unit in terms of pre[m-1].
      const std::size_t h = m - 1;
      coef.assign(g.size(), 0.0);
      for (std::size_t i = 0; i < g.size(); ++i) {
        const double a = g[i];
        if (a == 0.0) continue;
        if ((a > 0.0) == upper) {
          coef[i] = a * nb.us[c][h][i];
          f.c += a * nb.ui[c][h][i];
        } else {
          coef[i] = a * nb.ls[c][h][i];
        }
      }
    }
    return f;
  }
};

}  // namespace

NodeBounds computeBounds(const Problem& pb, const PhaseVector& phases, bool symbolic,
                         const std::vector<Interval>* zbox) {
  const std::vector<Interval>& box = zbox ? *zbox : pb.zbox;
  const Network& net = *pb.net;
  const std::size_t L = net.numLayers();
  NodeBounds nb;
  nb.effective = phases;
  nb.lo.assign(pb.k, std::vector<Vector>(L));
  nb.hi.assign(pb.k, std::vector<Vector>(L));
  nb.us.assign(pb.k, std::vector<Vector>(L - 1));
  nb.ui.assign(pb.k, std::vector<Vector>(L - 1));
  nb.ls.assign(pb.k, std::vector<Vector>(L - 1));
  if (pb.infeasible) {
    nb.infeasible = true;
    return nb;
  }
  Walker walker{pb, nb};

  for (std::size_t c = 0; c < pb.k; ++c) {
    std::vector<Interval> prev(net.inputDim());
    for (std::size_t i = 0; i < prev.size(); ++i) {
      const Interval& zb = box[pb.rep[c][i]];
      const double o = pb.off[c][i];
      prev[i] = {zb.lo + o - pad(std::abs(zb.lo + o)), zb.hi + o + pad(std::abs(zb.hi + o))};
    }
    for (std::size_t l = 0; l < L; ++l) {
      const AffineLayer& layer = net.layer(l);
      const std::size_t w = layer.outWidth();
      Vector& lo = nb.lo[c][l];
      Vector& hi = nb.hi[c][l];
      lo.assign(w, 0.0);
      hi.assign(w, 0.0);
      for (std::size_t u = 0; u < w; ++u) {
        // Interval arithmetic always; symbolic back-substitution tightens it.
        double ilo = layer.biases[u], ihi = layer.biases[u], mag = std::abs(layer.biases[u]);
        auto row = layer.weights.row(u);
        for (std::size_t i = 0; i < row.size(); ++i) {
          const double a = row[i];
          if (a >= 0.0) {
            ilo += a * prev[i].lo;
            ihi += a * prev[i].hi;
          } else {
            ilo += a * prev[i].hi;
            ihi += a * prev[i].lo;
          }
          mag += std::abs(a) * std::max(std::abs(prev[i].lo), std::abs(prev[i].hi));
        }
        ilo -= pad(mag);
        ihi += pad(mag);
        if (symbolic) {
          Vector e(w, 0.0);
          e[u] = 1.0;
          const Form up = walker.backward(c, l, e, 0.0, true);
          const Form dn = walker.backward(c, l, e, 0.0, false);
          ihi = std::min(ihi, concretize(up, box, true));
          ilo = std::max(ilo, concretize(dn, box, false));
        }
        lo[u] = ilo;
        hi[u] = ihi;
      }
      if (l + 1 == L) break;

      // Phase restrictions and relaxations of this hidden layer.
      std::vector<Interval> post(w);
      nb.us[c][l].assign(w, 0.0);
      nb.ui[c][l].assign(w, 0.0);
      nb.ls[c][l].assign(w, 0.0);
      for (std::size_t u = 0; u < w; ++u) {
        const std::size_t id = pb.relu_id[c][l][u];
        std::int8_t ph = phases[id];
        if (ph > 0) lo[u] = std::max(lo[u], 0.0);
        if (ph < 0) hi[u] = std::min(hi[u], 0.0);
        if (lo[u] > hi[u]) {
          nb.infeasible = true;
          return nb;
        }
        if (ph == 0) {
          if (lo[u] >= 0.0) ph = 1;
          if (hi[u] <= 0.0) ph = -1;
        }
        nb.effective[id] = ph;
        if (ph > 0) {
          nb.us[c][l][u] = 1.0;
          nb.ls[c][l][u] = 1.0;
          post[u] = {lo[u], hi[u]};
        } else if (ph < 0) {
          post[u] = {0.0, 0.0};
        } else {
          const double s = hi[u] / (hi[u] - lo[u]);
          nb.us[c][l][u] = s;
          nb.ui[c][l][u] = -s * lo[u];
          nb.ls[c][l][u] = hi[u] > -lo[u] ? 1.0 : 0.0;
          post[u] = {0.0, hi[u]};
        }
      }
      prev = std::move(post);
    }
  }

  // Query rows: bound each row as a whole so shared inputs couple the copies.
  for (const Row& row : pb.rows) {
    double row_lo = 0.0, row_hi = 0.0;
    if (symbolic) {
      Form up{Vector(pb.p, 0.0), 0.0}, dn{Vector(pb.p, 0.0), 0.0};
      std::vector<Vector> out_coef(pb.k, Vector(net.outputDim(), 0.0));
      std::vector<bool> used(pb.k, false);
      for (const RowTerm& t : row.terms) {
        if (t.output) {
          out_coef[t.copy][t.index] += t.coef;
          used[t.copy] = true;
        } else {
          const std::size_t z = pb.rep[t.copy][t.index];
          up.a[z] += t.coef;
          dn.a[z] += t.coef;
          up.c += t.coef * pb.off[t.copy][t.index];
          dn.c += t.coef * pb.off[t.copy][t.index];
        }
      }
      for (std::size_t c = 0; c < pb.k; ++c) {
        if (!used[c]) continue;
        const Form fu = walker.backward(c, L - 1, out_coef[c], 0.0, true);
        const Form fd = walker.backward(c, L - 1, out_coef[c], 0.0, false);
        for (std::size_t j = 0; j < pb.p; ++j) {
          up.a[j] += fu.a[j];
          dn.a[j] += fd.a[j];
        }
        up.c += fu.c;
        dn.c += fd.c;
      }
      row_hi = concretize(up, box, true);
      row_lo = concretize(dn, box, false);
    } else {
      double mag = 0.0;
      for (const RowTerm& t : row.terms) {
        Interval iv;
        if (t.output) {
          iv = {nb.lo[t.copy][L - 1][t.index], nb.hi[t.copy][L - 1][t.index]};
        } else {
          const Interval& zb = box[pb.rep[t.copy][t.index]];
          iv = {zb.lo + pb.off[t.copy][t.index], zb.hi + pb.off[t.copy][t.index]};
        }
        row_lo += t.coef >= 0.0 ? t.coef * iv.lo : t.coef * iv.hi;
        row_hi += t.coef >= 0.0 ? t.coef * iv.hi : t.coef * iv.lo;
        mag += std::abs(t.coef) * std::max(std::abs(iv.lo), std::abs(iv.hi));
      }
      row_lo -= pad(mag);
      row_hi += pad(mag);
    }
    const double slack = pad(std::abs(row.rhs));
    const bool ge_fails = (row.rel != Relation::LE) && row_hi < row.rhs - slack;
    const bool le_fails = (row.rel != Relation::GE) && row_lo > row.rhs + slack;
    if (ge_fails || le_fails) {
      nb.infeasible = true;
      return nb;
    }
  }
  return nb;
}

}  // namespace detail

BoundsResult propagateBounds(const LinearSystem& sys, const PhaseVector& phases,
                             const PropagationOptions& opts) {
  if (phases.size() != sys.relus.size()) {
    throw DimensionError("phase vector", sys.relus.size(), phases.size());
  }
  const detail::Problem pb = detail::buildProblem(sys);
  const detail::NodeBounds nb = detail::computeBounds(pb, phases, opts.symbolic);
  BoundsResult res;
  res.infeasible = nb.infeasible;
  if (nb.infeasible) return res;
  res.bounds.assign(sys.variables.size(), Interval{});
  const std::size_t L = pb.net->numLayers();
  for (std::size_t c = 0; c < pb.k; ++c) {
    const CopyLayout& lay = sys.copies[c];
    for (std::size_t i = 0; i < lay.inputs.size(); ++i) {
      const std::size_t z = pb.rep[c][i];
      const double o = pb.off[c][i];
      const Interval& own = sys.variables[lay.inputs[i]].box;
      res.bounds[lay.inputs[i]] = {std::max(own.lo, pb.zbox[z].lo + o),
                                   std::min(own.hi, pb.zbox[z].hi + o)};
    }
    for (std::size_t l = 0; l + 1 < L; ++l) {
      for (std::size_t u = 0; u < lay.pre[l].size(); ++u) {
        const double lo = nb.lo[c][l][u], hi = nb.hi[c][l][u];
        res.bounds[lay.pre[l][u]] = {lo, hi};
        const std::int8_t ph = nb.effective[pb.relu_id[c][l][u]];
        res.bounds[lay.post[l][u]] = ph < 0 ? Interval{0.0, 0.0}
                                            : Interval{std::max(lo, 0.0), std::max(hi, 0.0)};
      }
    }
    for (std::size_t u = 0; u < lay.outputs.size(); ++u) {
      res.bounds[lay.outputs[u]] = {nb.lo[c][L - 1][u], nb.hi[c][L - 1][u]};
    }
  }
  return res;
}

}  // namespace navguard::verify
