#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "navguard/sim.hpp"
#include "navguard/verifier.hpp"

namespace navguard::attack {

using verify::Interval;

struct AttackConfig {
  int iterations = 40;
  double step_size = 0.01;
  double slack = 0.0;
  std::vector<Interval> box;  // precondition box of a single-step property
  sim::Action target = sim::Action::Forward;
  // Restart 0 starts at the box center, later ones at seeded uniform points.
  int restarts = 1;
  std::uint64_t seed = 0;

  void validate(std::size_t input_dim) const;
};

enum class AttackStatus { SAT, TIMEOUT };
std::string attackStatusName(AttackStatus s);

struct AttackResult {
  AttackStatus status = AttackStatus::TIMEOUT;
  std::optional<Vector> witness;
  std::vector<double> margins;  // every iterate of every restart, in order
  int restart = -1;             // which restart found the witness
  int iteration = -1;           // iterate index within that restart
};

// y_target - max over the other outputs (ties go to the lowest index).
double targetMargin(const Network& net, std::span<const double> x, sim::Action target);

// Basic iterative method: x <- clip(x + step * sign(grad margin)), SAT as
// soon as the margin exceeds the slack.
AttackResult bimAttack(const Network& net, const AttackConfig& config);

// Box, target action and slack read off a single-copy query whose post rows
// all have the form y_target - y_other >= slack.
AttackConfig configFromQuery(const verify::Query& q);

// Winner minus runner-up output over every step of `episodes` greedy
// rollouts of the suite.
std::vector<double> collectDecisionMargins(const Network& net, const sim::ArenaSuite& suite,
                                           std::size_t episodes, const sim::SimParams& params);

// Nearest-rank percentile, p in (0, 100]. Throws ValueError on an empty
// sample.
double percentileNearestRank(std::vector<double> sample, double p);

double computeSlack(const Network& net, const sim::ArenaSuite& suite, std::size_t episodes,
                    const sim::SimParams& params, double percentile = 75.0);

// Defaults measured on the reference models, per algorithm name.
double referenceSlack(const std::string& algorithm);

}  // namespace navguard::attack
