#pragma once

#include <optional>
#include <string>
#include <vector>

#include "navguard/sim.hpp"
#include "navguard/verifier.hpp"

namespace navguard::props {

using verify::Interval;
using verify::Query;

enum class PropertyKind {
  ForwardCollision,
  LeftCollision,
  RightCollision,
  AlternatingLoop,
  LeftCycle,
  RightCycle,
  BraveryProbe,
  Custom,
};

std::string kindName(PropertyKind k);  // "forward_collision", ...
PropertyKind parseKind(const std::string& name);
bool isCollision(PropertyKind k);
bool isLoop(PropertyKind k);

// Constants of the property catalog.
inline constexpr double kObstacleLo = 0.135;
inline constexpr double kObstacleHi = 0.185;
inline constexpr double kClearLo = 0.2;  // lidar "escape direction" floor
inline constexpr double kGoalDistanceLo = 0.2;
inline constexpr double kBraveryLo = 0.18;

// Lidar index that carries the obstacle for each collision kind.
std::size_t obstacleBeam(PropertyKind k);

// Number of unrolled steps: 1 for collisions and bravery, 2 for the
// alternating loop, 360/turn_angle for cycles.
std::size_t stepsFor(PropertyKind k, double turn_angle_deg);

// Consecutive-step link for a turning robot. A RIGHT turn shifts the window
// so that lidar_i at t+1 equals lidar_{i+1} at t; LEFT is the mirror image.
struct SlidingWindowLink {
  std::size_t from_step = 0;
  sim::Action direction = sim::Action::Right;
  double angle_increment = 1.0 / 12.0;  // added to x_7 on a RIGHT turn (signed)
  bool distance_equal = true;
};

// Sequence of turns (one per step, the last one included) describing a loop.
std::vector<sim::Action> loopActions(PropertyKind k, std::size_t steps);

struct LoopGeometry {
  double turn_angle_deg = 30.0;
  bool right_turn_increases_angle = true;
};

Query buildCollision(PropertyKind kind, std::shared_ptr<const Network> net, double slack);

// Cycle and alternating-loop queries. Besides the consecutive-step window,
// every pair of (step, beam) slots looking in the same world direction is
// tied together, including beams that wrap around a full turn.
Query buildLoop(PropertyKind kind, std::shared_ptr<const Network> net, double slack,
                const LoopGeometry& geometry = {});

// FORWARD wins by `slack` with the dead-ahead reading in [0.18, d]. SAT at d
// implies SAT at every d' >= d.
Query buildBraveryProbe(std::shared_ptr<const Network> net, double d, double slack);

struct CustomSpec {
  std::size_t steps = 1;
  // Per copy; missing copies default to [0,1] on every input.
  std::vector<std::vector<Interval>> boxes;
  std::vector<verify::QueryConstraint> constraints;  // post, extra or link
  std::vector<SlidingWindowLink> links;
};

Query buildCustom(const CustomSpec& spec, std::shared_ptr<const Network> net);

// Everything needed to rebuild one named property.
struct PropertySpec {
  PropertyKind kind = PropertyKind::ForwardCollision;
  std::optional<double> slack;  // unset: the caller's per-algorithm default
  double turn_angle_deg = 30.0;
  bool right_turn_increases_angle = true;
  double bravery_bound = 1.0;
  std::optional<CustomSpec> custom;
};

Query buildProperty(const PropertySpec& spec, std::shared_ptr<const Network> net,
                    double default_slack);

verify::Json specToJson(const PropertySpec& spec);
PropertySpec specFromJson(const verify::Json& j);
// A JSON array of property specs, or {"properties": [...]}.
std::vector<PropertySpec> loadPropertySpecs(const std::string& path);

// The six properties of the campaign; cycles use `cycle_turn_deg`.
std::vector<PropertySpec> standardSuite(double cycle_turn_deg);

// Reverses the lidar inputs, maps x_7 to 1 - x_7 and swaps the LEFT and
// RIGHT outputs, i.e. the policy of the mirror-image world.
Network mirrorNetwork(const Network& net);

// Actions the violating behaviour predicts, one per step.
std::vector<sim::Action> predictedActions(PropertyKind kind, std::size_t steps);

}  // namespace navguard::props
