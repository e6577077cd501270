#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <mutex>
#include <thread>

#include "navguard/error.hpp"
#include "navguard/simplex.hpp"
#include "verifier_internal.hpp"

namespace navguard::verify {

namespace {

using detail::NodeBounds;
using detail::Problem;

// ---------------------------------------------------------------------------
// Leaf systems: every ReLU phase fixed, so each neuron is affine in z.

template <typename Num>
struct Affine {
  std::vector<Num> a;  // over z
  Num c = 0;
};

template <typename Num>
struct LeafRow {
  std::vector<Num> a;
  Num lo = 0, hi = 0;
  bool has_lo = false, has_hi = false;
  bool post = false;
};

template <typename Num>
Num weightOf(const Problem& pb, std::size_t l, std::size_t u, std::size_t i) {
  if constexpr (std::is_same_v<Num, double>) {
    return pb.net->layer(l).weights(u, i);
  } else {
    return pb.wq[l][u][i];
  }
}

template <typename Num>
Num biasOf(const Problem& pb, std::size_t l, std::size_t u) {
  if constexpr (std::is_same_v<Num, double>) {
    return pb.net->layer(l).biases[u];
  } else {
    return pb.bq[l][u];
  }
}

template <typename Num>
Num offsetOf(const Problem& pb, std::size_t c, std::size_t i) {
  if constexpr (std::is_same_v<Num, double>) {
    return pb.off[c][i];
  } else {
    return pb.off_q[c][i];
  }
}

template <typename Num>
Num termCoef(const detail::RowTerm& t) {
  if constexpr (std::is_same_v<Num, double>) {
    return t.coef;
  } else {
    return t.coef_q;
  }
}

template <typename Num>
Num rowRhs(const detail::Row& r) {
  if constexpr (std::is_same_v<Num, double>) {
    return r.rhs;
  } else {
    return r.rhs_q;
  }
}

template <typename Num>
bool isZeroNum(const Num& v) {
  if constexpr (std::is_same_v<Num, double>) {
    return v == 0.0;
  } else {
    return sgn(v) == 0;
  }
}

// Returns false when a constant row is already violated.
template <typename Num>
bool leafRows(const Problem& pb, const PhaseVector& pattern, std::vector<LeafRow<Num>>& rows) {
  const Network& net = *pb.net;
  const std::size_t L = net.numLayers();
  std::vector<std::vector<Affine<Num>>> outputs(pb.k);
  auto push = [&](Affine<Num>&& e, Relation rel, const Num& rhs, bool post) {
    bool all_zero = true;
    for (const Num& v : e.a) {
      if (!isZeroNum(v)) {
        all_zero = false;
        break;
      }
    }
    const Num bound = rhs - e.c;
    if (all_zero) {
      // 0 rel bound
      if (rel != Relation::LE && bound > 0) return false;
      if (rel != Relation::GE && bound < 0) return false;
      if (!post) return true;
    }
    LeafRow<Num> r;
    r.a = std::move(e.a);
    r.post = post;
    if (rel != Relation::LE) {
      r.has_lo = true;
      r.lo = bound;
    }
    if (rel != Relation::GE) {
      r.has_hi = true;
      r.hi = bound;
    }
    rows.push_back(std::move(r));
    return true;
  };

  for (std::size_t c = 0; c < pb.k; ++c) {
    std::vector<Affine<Num>> prev(net.inputDim());
    for (std::size_t i = 0; i < prev.size(); ++i) {
      prev[i].a.assign(pb.p, Num(0));
      prev[i].a[pb.rep[c][i]] = 1;
      prev[i].c = offsetOf<Num>(pb, c, i);
    }
    for (std::size_t l = 0; l < L; ++l) {
      const AffineLayer& layer = net.layer(l);
      std::vector<Affine<Num>> cur(layer.outWidth());
      for (std::size_t u = 0; u < layer.outWidth(); ++u) {
        Affine<Num>& e = cur[u];
        e.a.assign(pb.p, Num(0));
        e.c = biasOf<Num>(pb, l, u);
        for (std::size_t i = 0; i < layer.inWidth(); ++i) {
          if (layer.weights(u, i) == 0.0) continue;
          const Num w = weightOf<Num>(pb, l, u, i);
          const Affine<Num>& src = prev[i];
          for (std::size_t j = 0; j < pb.p; ++j) {
            if (!isZeroNum(src.a[j])) e.a[j] += w * src.a[j];
          }
          e.c += w * src.c;
        }
      }
      if (l + 1 < L) {
        for (std::size_t u = 0; u < cur.size(); ++u) {
          const std::int8_t ph = pattern[pb.relu_id[c][l][u]];
          Affine<Num> copy = cur[u];
          if (ph > 0) {
            if (!push(std::move(copy), Relation::GE, Num(0), false)) return false;
          } else {
            if (!push(std::move(copy), Relation::LE, Num(0), false)) return false;
            cur[u].a.assign(pb.p, Num(0));
            cur[u].c = 0;
          }
        }
      } else {
        outputs[c] = cur;
      }
      prev = std::move(cur);
    }
  }
  for (const detail::Row& row : pb.rows) {
    Affine<Num> e;
    e.a.assign(pb.p, Num(0));
    for (const detail::RowTerm& t : row.terms) {
      const Num coef = termCoef<Num>(t);
      if (t.output) {
        const Affine<Num>& src = outputs[t.copy][t.index];
        for (std::size_t j = 0; j < pb.p; ++j) e.a[j] += coef * src.a[j];
        e.c += coef * src.c;
      } else {
        e.a[pb.rep[t.copy][t.index]] += coef;
        e.c += coef * offsetOf<Num>(pb, t.copy, t.index);
      }
    }
    if (!push(std::move(e), row.rel, rowRhs<Num>(row), row.post)) return false;
  }
  return true;
}

// Solves the leaf with postcondition rows tightened by `margin` and the
// input box shrunk by min(margin, width/4).
template <typename Num>
std::optional<std::vector<Num>> solveLeaf(const Problem& pb, const std::vector<Interval>& box,
                                          const std::vector<LeafRow<Num>>& rows, const Num& margin) {
  GeneralSimplex<Num> sx(pb.p);
  for (std::size_t j = 0; j < pb.p; ++j) {
    Num lo, hi;
    if constexpr (std::is_same_v<Num, double>) {
      lo = box[j].lo;
      hi = box[j].hi;
    } else {
      lo = pb.zlo_q[j];
      hi = pb.zhi_q[j];
      if (box[j].lo > pb.zbox[j].lo) lo = Num(box[j].lo);
      if (box[j].hi < pb.zbox[j].hi) hi = Num(box[j].hi);
    }
    Num shrink = (hi - lo) / 4;
    if (margin < shrink) shrink = margin;
    sx.setBounds(j, Num(lo + shrink), Num(hi - shrink));
  }
  for (const LeafRow<Num>& r : rows) {
    std::optional<Num> lo, hi;
    if (r.has_lo) lo = r.post ? Num(r.lo + margin) : r.lo;
    if (r.has_hi) hi = r.post ? Num(r.hi - margin) : r.hi;
    sx.addRow(r.a, lo, hi);
  }
  if (sx.check(100000) != FeasStatus::Feasible) return std::nullopt;
  return sx.structuralValues();
}

// Largest uniform margin (capped at 1) the leaf admits, by bisection in
// double arithmetic.
double bestMargin(const Problem& pb, const std::vector<Interval>& box, const PhaseVector& pattern) {
  std::vector<LeafRow<double>> rows;
  if (!leafRows<double>(pb, pattern, rows)) return 0.0;
  if (solveLeaf<double>(pb, box, rows, 1.0)) return 1.0;
  double lo = 0.0, hi = 1.0;
  for (int it = 0; it < 24; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (solveLeaf<double>(pb, box, rows, mid)) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return lo;
}

// ---------------------------------------------------------------------------
// LP relaxation of a search node (triangle relaxation of unstable ReLUs).

struct LpResult {
  FeasStatus status = FeasStatus::IterationLimit;
  std::vector<double> z;
};

LpResult solveRelaxation(const Problem& pb, const std::vector<Interval>& box, const PhaseVector& split,
                         const NodeBounds& nb) {
  const Network& net = *pb.net;
  const std::size_t L = net.numLayers();
  std::vector<std::size_t> hvar(nb.effective.size(), 0);
  std::size_t nv = pb.p;
  for (std::size_t id = 0; id < nb.effective.size(); ++id) {
    if (nb.effective[id] == 0) hvar[id] = nv++;
  }
  struct Expr {
    Vector a;
    double c = 0.0;
  };
  GeneralSimplex<double> sx(nv);
  for (std::size_t j = 0; j < pb.p; ++j) sx.setBounds(j, box[j].lo, box[j].hi);
  auto addRow = [&](const Expr& e, std::optional<double> lo, std::optional<double> hi) {
    if (lo) *lo -= e.c;
    if (hi) *hi -= e.c;
    sx.addRow(e.a, lo, hi);
  };

  std::vector<std::vector<Expr>> outputs(pb.k);
  for (std::size_t c = 0; c < pb.k; ++c) {
    std::vector<Expr> prev(net.inputDim());
    for (std::size_t i = 0; i < prev.size(); ++i) {
      prev[i].a.assign(nv, 0.0);
      prev[i].a[pb.rep[c][i]] = 1.0;
      prev[i].c = pb.off[c][i];
    }
    for (std::size_t l = 0; l < L; ++l) {
      const AffineLayer& layer = net.layer(l);
      std::vector<Expr> cur(layer.outWidth());
      for (std::size_t u = 0; u < layer.outWidth(); ++u) {
        Expr& e = cur[u];
        e.a.assign(nv, 0.0);
        e.c = layer.biases[u];
        for (std::size_t i = 0; i < layer.inWidth(); ++i) {
          const double w = layer.weights(u, i);
          if (w == 0.0) continue;
          for (std::size_t j = 0; j < nv; ++j) e.a[j] += w * prev[i].a[j];
          e.c += w * prev[i].c;
        }
      }
      if (l + 1 < L) {
        for (std::size_t u = 0; u < cur.size(); ++u) {
          const std::size_t id = pb.relu_id[c][l][u];
          const double lo = nb.lo[c][l][u], hi = nb.hi[c][l][u];
          const std::int8_t eff = nb.effective[id];
          if (eff > 0) {
            if (split[id] > 0) addRow(cur[u], 0.0, hi);
          } else if (eff < 0) {
            if (split[id] < 0) addRow(cur[u], lo, 0.0);
            cur[u].a.assign(nv, 0.0);
            cur[u].c = 0.0;
          } else {
            const std::size_t h = hvar[id];
            sx.setBounds(h, 0.0, hi);
            addRow(cur[u], lo, hi);
            Expr d;
            d.a.assign(nv, 0.0);
            for (std::size_t j = 0; j < nv; ++j) d.a[j] = -cur[u].a[j];
            d.a[h] += 1.0;
            d.c = -cur[u].c;
            addRow(d, 0.0, std::nullopt);  // h - pre >= 0
            const double s = nb.us[c][l][u];
            for (std::size_t j = 0; j < nv; ++j) d.a[j] = -s * cur[u].a[j];
            d.a[h] += 1.0;
            d.c = -s * cur[u].c;
            addRow(d, std::nullopt, nb.ui[c][l][u]);  // h - s*pre <= ui
            cur[u].a.assign(nv, 0.0);
            cur[u].a[h] = 1.0;
            cur[u].c = 0.0;
          }
        }
      } else {
        outputs[c] = cur;
      }
      prev = std::move(cur);
    }
  }
  for (const detail::Row& row : pb.rows) {
    Expr e;
    e.a.assign(nv, 0.0);
    for (const detail::RowTerm& t : row.terms) {
      if (t.output) {
        const Expr& src = outputs[t.copy][t.index];
        for (std::size_t j = 0; j < nv; ++j) e.a[j] += t.coef * src.a[j];
        e.c += t.coef * src.c;
      } else {
        e.a[pb.rep[t.copy][t.index]] += t.coef;
        e.c += t.coef * pb.off[t.copy][t.index];
      }
    }
    std::optional<double> lo, hi;
    if (row.rel != Relation::LE) lo = row.rhs;
    if (row.rel != Relation::GE) hi = row.rhs;
    addRow(e, lo, hi);
  }
  LpResult res;
  res.status = sx.check(20 * (nv + 50));
  if (res.status == FeasStatus::Feasible) {
    res.z.assign(pb.p, 0.0);
    for (std::size_t j = 0; j < pb.p; ++j) res.z[j] = sx.value(j);
  }
  return res;
}

// ---------------------------------------------------------------------------
// Search

struct Node {
  PhaseVector phases;
  std::vector<Interval> zbox;
  std::size_t depth = 0;
  std::size_t input_splits = 0;
};

class Search {
public:
  Search(const LinearSystem& sys, const BnbConfig& cfg)
      : sys_(sys), cfg_(cfg), pb_(detail::buildProblem(sys)),
        start_(std::chrono::steady_clock::now()) {
    // First-layer weight mass reaching each free variable.
    sensitivity_.assign(pb_.p, 0.0);
    if (pb_.infeasible) return;
    const AffineLayer& first = pb_.net->layer(0);
    for (std::size_t c = 0; c < pb_.k; ++c) {
      for (std::size_t i = 0; i < first.inWidth(); ++i) {
        for (std::size_t u = 0; u < first.outWidth(); ++u) {
          sensitivity_[pb_.rep[c][i]] += std::abs(first.weights(u, i));
        }
      }
    }
  }

  Verdict run() {
    Verdict v;
    if (pb_.infeasible) {
      v.status = Status::UNSAT;
      v.diagnostic = pb_.why;
      return finish(v);
    }
    stack_.push_back({PhaseVector(sys_.relus.size(), 0), pb_.zbox, 0, 0});
    const std::size_t workers = std::max<std::size_t>(1, cfg_.workers);
    if (workers == 1) {
      worker();
    } else {
      std::vector<std::thread> pool;
      for (std::size_t w = 0; w < workers; ++w) pool.emplace_back([this] { worker(); });
      for (auto& t : pool) t.join();
    }
    if (!error_.empty()) {
      v.status = Status::ERROR;
      v.diagnostic = error_;
    } else if (witness_) {
      v.status = Status::SAT;
      v.witness = witness_;
    } else if (timed_out_) {
      v.status = Status::TIMEOUT;
      v.diagnostic = timeout_reason_;
    } else {
      v.status = Status::UNSAT;
    }
    return finish(v);
  }

private:
  Verdict finish(Verdict& v) {
    v.stats = stats_;
    v.stats.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    return v;
  }

  void worker() {
    while (true) {
      Node node;
      {
        std::unique_lock lock(mu_);
        cv_.wait(lock, [&] { return stop_ || !stack_.empty() || busy_ == 0; });
        if (stop_ || stack_.empty()) {
          cv_.notify_all();
          return;
        }
        node = std::move(stack_.back());
        stack_.pop_back();
        ++busy_;
        if (budgetExhausted()) {
          stop_ = true;
          --busy_;
          cv_.notify_all();
          return;
        }
        ++stats_.nodes;
        stats_.max_depth = std::max(stats_.max_depth, node.depth);
      }
      std::vector<Node> children;
      std::optional<Witness> found;
      try {
        found = process(node, children);
      } catch (const std::exception& e) {
        std::lock_guard lock(mu_);
        error_ = e.what();
        stop_ = true;
      }
      {
        std::lock_guard lock(mu_);
        --busy_;
        if (found && !witness_) {
          witness_ = std::move(found);
          stop_ = true;
        }
        for (auto it = children.rbegin(); it != children.rend(); ++it) stack_.push_back(std::move(*it));
      }
      cv_.notify_all();
    }
  }

  // Caller holds mu_.
  bool budgetExhausted() {
    if (cfg_.max_nodes > 0 && stats_.nodes >= cfg_.max_nodes) {
      timed_out_ = true;
      timeout_reason_ = "node budget of " + std::to_string(cfg_.max_nodes) + " exhausted";
      return true;
    }
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    if (elapsed > cfg_.timeout_s) {
      timed_out_ = true;
      timeout_reason_ = "wall-clock budget of " + formatDouble(cfg_.timeout_s) + " s exhausted";
      return true;
    }
    return false;
  }

  void count(std::uint64_t SolveStats::*field) {
    std::lock_guard lock(mu_);
    ++(stats_.*field);
  }

  // Children are returned in the order they should be explored.
  std::optional<Witness> process(const Node& node, std::vector<Node>& children) {
    PhaseVector effective = node.phases;
    std::optional<NodeBounds> nb;
    if (cfg_.prune) {
      nb = detail::computeBounds(pb_, node.phases, true, &node.zbox);
      if (nb->infeasible) {
        count(&SolveStats::pruned);
        return std::nullopt;
      }
      effective = nb->effective;
      if (cfg_.lp) {
        count(&SolveStats::lp_calls);
        const LpResult lp = solveRelaxation(pb_, node.zbox, node.phases, *nb);
        if (lp.status == FeasStatus::Infeasible) {
          count(&SolveStats::pruned);
          return std::nullopt;
        }
        if (lp.status == FeasStatus::Feasible) {
          if (auto w = tryCandidate(lp.z)) return w;
        }
      }
    }

    // Pick the split.
    std::size_t pick = effective.size();
    double widest = -1.0;
    for (std::size_t id = 0; id < effective.size(); ++id) {
      if (effective[id] != 0) continue;
      if (!nb) {
        pick = id;
        break;
      }
      const auto& pos = pb_.relu_pos[id];
      const double w = nb->hi[pos.copy][pos.layer][pos.unit] - nb->lo[pos.copy][pos.layer][pos.unit];
      if (w > widest) {
        widest = w;
        pick = id;
      }
    }
    if (pick == effective.size()) {
      count(&SolveStats::leaves);
      return solveLeafPattern(effective, node.zbox);
    }
    if (nb && node.input_splits < cfg_.max_input_splits) {
      std::size_t dim = pb_.p;
      double best = 0.0;
      for (std::size_t j = 0; j < pb_.p; ++j) {
        const double s = (node.zbox[j].hi - node.zbox[j].lo) * sensitivity_[j];
        if (s > best) {
          best = s;
          dim = j;
        }
      }
      const double mid = node.zbox[dim].lo + 0.5 * (node.zbox[dim].hi - node.zbox[dim].lo);
      if (dim < pb_.p && mid > node.zbox[dim].lo && mid < node.zbox[dim].hi) {
        Node lower{effective, node.zbox, node.depth + 1, node.input_splits + 1};
        lower.zbox[dim].hi = mid;
        Node upper{std::move(effective), node.zbox, node.depth + 1, node.input_splits + 1};
        upper.zbox[dim].lo = mid;
        children.push_back(std::move(lower));
        children.push_back(std::move(upper));
        return std::nullopt;
      }
    }
    Node on{effective, node.zbox, node.depth + 1, node.input_splits};
    on.phases[pick] = 1;
    Node off{std::move(effective), node.zbox, node.depth + 1, node.input_splits};
    off.phases[pick] = -1;
    children.push_back(std::move(on));
    children.push_back(std::move(off));
    return std::nullopt;
  }

  // An LP point that satisfies every query row under concrete evaluation is
  // confirmed by solving its activation pattern exactly.
  std::optional<Witness> tryCandidate(const std::vector<double>& z) {
    const std::vector<Vector> x = detail::inputsFromZ(pb_, z);
    PhaseVector pattern(sys_.relus.size(), -1);
    std::vector<Vector> outs(pb_.k);
    for (std::size_t c = 0; c < pb_.k; ++c) {
      const EvalTrace tr = evaluate(*pb_.net, x[c]);
      for (std::size_t l = 0; l + 1 < pb_.net->numLayers(); ++l) {
        for (std::size_t u = 0; u < tr.pre[l].size(); ++u) {
          pattern[pb_.relu_id[c][l][u]] = tr.pre[l][u] > 0.0 ? 1 : -1;
        }
      }
      outs[c] = tr.output;
    }
    for (const detail::Row& row : pb_.rows) {
      double lhs = 0.0;
      for (const detail::RowTerm& t : row.terms) {
        lhs += t.coef * (t.output ? outs[t.copy][t.index] : x[t.copy][t.index]);
      }
      if (row.rel != Relation::LE && lhs < row.rhs) return std::nullopt;
      if (row.rel != Relation::GE && lhs > row.rhs) return std::nullopt;
    }
    for (std::size_t c = 0; c < pb_.k; ++c) {
      for (std::size_t i = 0; i < x[c].size(); ++i) {
        const Interval& b = sys_.variables[sys_.copies[c].inputs[i]].box;
        if (x[c][i] < b.lo || x[c][i] > b.hi) return std::nullopt;
      }
    }
    return solveLeafPattern(pattern, pb_.zbox);
  }

  std::optional<Witness> solveLeafPattern(const PhaseVector& pattern, const std::vector<Interval>& box) {
    Witness w;
    if (cfg_.leaf == LeafArithmetic::FloatWithTolerance) {
      std::vector<LeafRow<double>> rows;
      if (!leafRows<double>(pb_, pattern, rows)) return std::nullopt;
      double margin = cfg_.polish ? bestMargin(pb_, box, pattern) : 0.0;
      auto z = solveLeaf<double>(pb_, box, rows, margin);
      if (!z) z = solveLeaf<double>(pb_, box, rows, 0.0);
      if (!z) return std::nullopt;
      w.inputs = detail::inputsFromZ(pb_, *z);
    } else {
      std::vector<LeafRow<mpq_class>> rows;
      if (!leafRows<mpq_class>(pb_, pattern, rows)) return std::nullopt;
      std::optional<std::vector<mpq_class>> z;
      if (cfg_.polish) {
        const double t = bestMargin(pb_, box, pattern);
        for (double tt : {t, t / 8.0}) {
          if (tt <= 0.0) break;
          z = solveLeaf<mpq_class>(pb_, box, rows, mpq_class(tt));
          if (z) break;
        }
      }
      if (!z) z = solveLeaf<mpq_class>(pb_, box, rows, mpq_class(0));
      if (!z) return std::nullopt;
      w.exact_inputs = detail::inputsFromZ(pb_, *z);
      for (const auto& copy : w.exact_inputs) {
        Vector xs;
        for (const mpq_class& q : copy) xs.push_back(q.get_d());
        w.inputs.push_back(std::move(xs));
      }
    }
    for (const Vector& x : w.inputs) w.outputs.push_back(forward(*pb_.net, x));
    if (!w.exact_inputs.empty()) {
      const WitnessCheck ex = checkWitnessExact(sys_, w.exact_inputs, 0);
      if (!ex.ok) throw Error("exact witness re-check failed (residual " + formatDouble(ex.max_residual) + ")");
    }
    const WitnessCheck chk = checkWitness(sys_, w.inputs, cfg_.witness_tolerance);
    if (!chk.ok) {
      throw Error("witness re-check failed: residual " + formatDouble(chk.max_residual) +
                  " exceeds tolerance " + formatDouble(cfg_.witness_tolerance));
    }
    return w;
  }

  const LinearSystem& sys_;
  BnbConfig cfg_;
  Problem pb_;
  std::chrono::steady_clock::time_point start_;

  std::mutex mu_;
  std::condition_variable cv_;
  std::vector<Node> stack_;
  std::size_t busy_ = 0;
  bool stop_ = false;
  bool timed_out_ = false;
  std::string timeout_reason_;
  std::string error_;
  std::optional<Witness> witness_;
  SolveStats stats_;
  std::vector<double> sensitivity_;
};

}  // namespace

Verdict solve(const LinearSystem& sys, const BnbConfig& config) {
  if (!(config.timeout_s > 0.0)) throw ConfigError("timeout must be positive");
  if (!(config.witness_tolerance > 0.0)) throw ConfigError("witness tolerance must be positive");
  Search search(sys, config);
  return search.run();
}

Verdict solve(const Query& query, const BnbConfig& config) {
  const LinearSystem sys = compile(query);
  Verdict v = solve(sys, config);
  v.query_hash = queryHash(query);
  return v;
}

}  // namespace navguard::verify
