#include "navguard/attack.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "navguard/error.hpp"

namespace navguard::attack {

void AttackConfig::validate(std::size_t input_dim) const {
  if (iterations <= 0) throw ConfigError("attack iterations must be positive");
  if (!(step_size > 0.0)) throw ConfigError("attack step size must be positive");
  if (restarts <= 0) throw ConfigError("attack restarts must be positive");
  if (box.size() != input_dim) throw DimensionError("attack box", input_dim, box.size());
  for (const Interval& iv : box) {
    if (!std::isfinite(iv.lo) || !std::isfinite(iv.hi) || iv.lo > iv.hi) {
      throw ConfigError("attack box needs finite, non-empty intervals");
    }
  }
}

std::string attackStatusName(AttackStatus s) { return s == AttackStatus::SAT ? "SAT" : "TIMEOUT"; }

namespace {

std::size_t runnerUp(const Vector& y, std::size_t target) {
  std::size_t best = y.size();
  for (std::size_t j = 0; j < y.size(); ++j) {
    if (j == target) continue;
    if (best == y.size() || y[j] > y[best]) best = j;
  }
  return best;
}

}  // namespace

double targetMargin(const Network& net, std::span<const double> x, sim::Action target) {
  const Vector y = forward(net, x);
  const auto t = static_cast<std::size_t>(target);
  return y[t] - y[runnerUp(y, t)];
}

AttackResult bimAttack(const Network& net, const AttackConfig& cfg) {
  cfg.validate(net.inputDim());
  const auto t = static_cast<std::size_t>(cfg.target);
  if (t >= net.outputDim()) throw DimensionError("attack target", net.outputDim(), t);
  AttackResult result;
  std::mt19937_64 rng(cfg.seed);
  for (int r = 0; r < cfg.restarts; ++r) {
    Vector x(cfg.box.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      const Interval& iv = cfg.box[i];
      if (r == 0) {
        x[i] = iv.lo + 0.5 * (iv.hi - iv.lo);
      } else {
        x[i] = std::uniform_real_distribution<double>(iv.lo, iv.hi)(rng);
      }
    }
    for (int it = 0;; ++it) {
      const Vector y = forward(net, x);
      const std::size_t other = runnerUp(y, t);
      const double margin = y[t] - y[other];
      result.margins.push_back(margin);
      if (margin > cfg.slack) {
        result.status = AttackStatus::SAT;
        result.witness = x;
        result.restart = r;
        result.iteration = it;
        return result;
      }
      if (it == cfg.iterations) break;
      Vector cot(y.size(), 0.0);
      cot[t] = 1.0;
      cot[other] = -1.0;
      const Vector g = gradient(net, x, cot);
      for (std::size_t i = 0; i < x.size(); ++i) {
        const double s = g[i] > 0.0 ? 1.0 : (g[i] < 0.0 ? -1.0 : 0.0);
        x[i] = std::clamp(x[i] + cfg.step_size * s, cfg.box[i].lo, cfg.box[i].hi);
      }
    }
  }
  return result;
}

AttackConfig configFromQuery(const verify::Query& q) {
  if (q.copies != 1 || q.input_boxes.size() != 1) {
    throw ShapeError("gradient attack handles single-step properties only");
  }
  AttackConfig cfg;
  cfg.box = q.input_boxes[0];
  std::optional<std::size_t> target;
  std::optional<double> slack;
  for (const verify::QueryConstraint& c : q.constraints) {
    if (c.tag != verify::ConstraintTag::Post) continue;
    const bool shape = c.rel == verify::Relation::GE && c.terms.size() == 2 &&
                       c.terms[0].ref.role == verify::VarRef::Role::Output &&
                       c.terms[1].ref.role == verify::VarRef::Role::Output &&
                       c.terms[0].coef == 1.0 && c.terms[1].coef == -1.0;
    if (!shape) throw ValueError("post row '" + c.label + "' is not a winner-margin row");
    if (target && *target != c.terms[0].ref.index) throw ValueError("post rows disagree on the target");
    if (slack && *slack != c.rhs) throw ValueError("post rows disagree on the slack");
    target = c.terms[0].ref.index;
    slack = c.rhs;
  }
  if (!target) throw ValueError("query has no post rows");
  cfg.target = static_cast<sim::Action>(*target);
  cfg.slack = *slack;
  return cfg;
}

std::vector<double> collectDecisionMargins(const Network& net, const sim::ArenaSuite& suite,
                                           std::size_t episodes, const sim::SimParams& params) {
  std::vector<double> margins;
  for (std::size_t e = 0; e < episodes; ++e) {
    const auto inst = suite.episode(e, params);
    const sim::Episode ep = sim::rolloutFrom(inst.arena, net, inst.start, params);
    for (const sim::TraceStep& s : ep.steps) {
      Vector y = forward(net, s.observation.toInput());
      std::sort(y.begin(), y.end(), std::greater<>());
      margins.push_back(y[0] - y[1]);
    }
  }
  return margins;
}

double percentileNearestRank(std::vector<double> sample, double p) {
  if (sample.empty()) throw ValueError("percentile of an empty sample");
  if (!(p > 0.0 && p <= 100.0)) throw ValueError("percentile must be in (0, 100]");
  std::sort(sample.begin(), sample.end());
  const auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * static_cast<double>(sample.size())));
  return sample[std::max<std::size_t>(rank, 1) - 1];
}

double computeSlack(const Network& net, const sim::ArenaSuite& suite, std::size_t episodes,
                    const sim::SimParams& params, double percentile) {
  return percentileNearestRank(collectDecisionMargins(net, suite, episodes, params), percentile);
}

double referenceSlack(const std::string& algorithm) {
  if (algorithm == "ddqn") return 0.042;
  if (algorithm == "reinforce") return 1.904;
  if (algorithm == "ppo") return 4.821;
  throw ConfigError("unknown algorithm '" + algorithm + "'");
}

}  // namespace navguard::attack
