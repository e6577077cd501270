#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "navguard/netcore.hpp"

namespace navguard::sim {

inline constexpr std::size_t kNumBeams = 7;
inline constexpr std::size_t kCenterBeam = 3;
inline constexpr std::size_t kObservationSize = kNumBeams + 2;
inline constexpr std::size_t kNumActions = 3;

// Output index order of every policy network.
enum class Action : int { Forward = 0, Left = 1, Right = 2 };

std::string_view actionName(Action a);
Action parseAction(std::string_view name);

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Vec2&, const Vec2&) = default;
};

// Axis-aligned rectangle, meters.
struct Rect {
  double xmin = 0.0, ymin = 0.0, xmax = 0.0, ymax = 0.0;
  bool contains(Vec2 p) const { return p.x >= xmin && p.x <= xmax && p.y >= ymin && p.y <= ymax; }
  friend bool operator==(const Rect&, const Rect&) = default;
};

struct Circle {
  Vec2 center;
  double radius = 0.0;
  friend bool operator==(const Circle&, const Circle&) = default;
};

using Obstacle = std::variant<Rect, Circle>;

struct SimParams {
  double lidar_range = 1.0;        // m
  double beam_spacing_deg = 30.0;  // between neighbouring beams
  double turn_angle_deg = 30.0;    // LEFT/RIGHT in-place rotation
  double forward_step = 0.05;      // m
  double robot_radius = 0.135;     // m
  double alpha = 3.0;              // progress reward scale
  double beta = 0.001;             // per-step penalty
  int step_limit = 500;
  // Sign convention of the angle input: with the default, a RIGHT turn
  // increases angle_to_goal by turn_angle/360.
  bool right_turn_increases_angle = true;

  // Number of distinct headings reachable by turning (360 / turn_angle).
  int headingDivisions() const;
  bool slidingWindowCompatible() const { return beam_spacing_deg == turn_angle_deg; }
  // Change of the angle input caused by one RIGHT turn.
  double angleIncrementPerRightTurn() const;
  // Throws ConfigError when an invariant is broken.
  void validate() const;
};

// Paper-geometry defaults (30 degree turns and beams).
SimParams defaultParams();
// Same robot with turn angle and beam spacing set to `degrees`.
SimParams paramsWithTurnAngle(double degrees);

// Pose sampler: uniform over `region`, rejecting poses closer than
// `clearance` to any obstacle or wall, or closer than `min_goal_distance` to
// the goal. Heading uniform over [0, 2pi).
struct StartSampler {
  Rect region;
  double clearance = 0.3;
  double min_goal_distance = 0.5;
  friend bool operator==(const StartSampler&, const StartSampler&) = default;
};

struct ArenaConfig {
  Rect bounds;
  std::vector<Obstacle> obstacles;
  Vec2 goal;
  double goal_radius = 0.2;
  // Normalizer for the distance input; the arena diagonal when unset.
  std::optional<double> distance_normalizer;
  StartSampler start;

  double distanceNormalizer() const;
  void validate(const SimParams& params) const;
  friend bool operator==(const ArenaConfig&, const ArenaConfig&) = default;
};

// Heading is base + turns * turn_angle; keeping the turn count as an integer
// makes LEFT followed by RIGHT restore the pose exactly.
struct RobotState {
  Vec2 position;
  double heading_base = 0.0;  // radians
  int turns = 0;              // reduced modulo headingDivisions()
  int step_count = 0;

  // Heading in [0, 2pi).
  double heading(const SimParams& params) const;
  bool samePose(const RobotState& other) const {
    return position == other.position && heading_base == other.heading_base &&
           turns == other.turns;
  }
};

struct Observation {
  std::array<double, kNumBeams> lidar{};  // beam 0 = 90 deg left ... beam 6 = 90 deg right
  double angle_to_goal = 0.5;
  double distance_to_goal = 0.0;

  Vector toInput() const;
  static Observation fromInput(std::span<const double> x);
  friend bool operator==(const Observation&, const Observation&) = default;
};

enum class Terminal { None, Goal, Collision, StepLimit };
std::string_view terminalName(Terminal t);

struct StepOutcome {
  RobotState next_state;
  Observation observation;
  double reward = 0.0;
  Terminal terminal = Terminal::None;
};

// Distance from `origin` along `angle` to the first obstacle or wall, capped
// at max_range.
double castRay(const ArenaConfig& arena, Vec2 origin, double angle, double max_range);

// Clearance between the robot disc boundary and the nearest obstacle or wall;
// negative when penetrating.
double clearance(const ArenaConfig& arena, Vec2 position, double radius);
bool inCollision(const ArenaConfig& arena, Vec2 position, const SimParams& params);
double distanceToGoal(const ArenaConfig& arena, Vec2 position);

Observation sense(const ArenaConfig& arena, const RobotState& state, const SimParams& params);
StepOutcome stepAction(const ArenaConfig& arena, const RobotState& state, Action action,
                       const SimParams& params);

// Greedy action: argmax of the network output, ties to the lowest index.
Action greedyAction(const Network& net, const Observation& obs);

RobotState sampleStart(const ArenaConfig& arena, std::uint64_t seed, const SimParams& params);

struct TraceStep {
  int step = 0;
  RobotState state;          // pose before the action
  Observation observation;   // what the policy saw
  Action action = Action::Forward;
  double reward = 0.0;
  Terminal terminal = Terminal::None;
};

struct Episode {
  std::vector<TraceStep> steps;
  Terminal outcome = Terminal::StepLimit;
  RobotState final_state;
  bool success() const { return outcome == Terminal::Goal; }
};

Episode rolloutFrom(const ArenaConfig& arena, const Network& net, const RobotState& start,
                    const SimParams& params);
// Samples the start pose from the arena's sampler with `seed`, then runs the
// greedy policy until a terminal event.
Episode rollout(const ArenaConfig& arena, const Network& net, std::uint64_t seed,
                const SimParams& params);

// One JSON object per line: step, pose, observation, action, reward, terminal.
std::string exportTrace(const Episode& episode, const SimParams& params);

// Random desk-scale arenas; episode i of a suite is a pure function of
// (seed, i).
struct ArenaGenParams {
  double width = 3.0;
  double height = 3.0;
  int min_obstacles = 1;
  int max_obstacles = 3;
  double min_obstacle_radius = 0.1;
  double max_obstacle_radius = 0.25;
  double goal_radius = 0.2;
  double goal_clearance = 0.35;
  double start_clearance = 0.3;
  double min_goal_distance = 1.0;
};

struct ArenaSuite {
  std::uint64_t seed = 0;
  ArenaGenParams gen;

  struct Instance {
    ArenaConfig arena;
    RobotState start;
  };
  Instance episode(std::uint64_t index, const SimParams& params) const;
};

// Deterministic 64-bit mixing of (seed, index) used for every derived stream.
std::uint64_t mixSeed(std::uint64_t seed, std::uint64_t index);

// Arena text format ("arena-v1"), one directive per line, meters throughout:
//
//   arena-v1
//   bounds_m <xmin> <ymin> <xmax> <ymax>
//   goal_m <x> <y>
//   goal_radius_m <r>
//   distance_normalizer_m <d>                    (optional)
//   start_region_m <xmin> <ymin> <xmax> <ymax>   (optional, default bounds)
//   start_clearance_m <c>                        (optional)
//   start_min_goal_distance_m <d>                (optional)
//   circle_m <cx> <cy> <r>                       (any number)
//   rect_m <xmin> <ymin> <xmax> <ymax>           (any number)
ArenaConfig parseArena(std::string_view text);
std::string formatArena(const ArenaConfig& arena);
ArenaConfig loadArenaFile(const std::string& path);

// ---------------------------------------------------------------------------
// Counterexample replay

enum class ViolationKind { Collision, Loop };

struct ReplayRequest {
  // Observation per time step of the witness.
  std::vector<Observation> observations;
  // Action the witness predicts at each step.
  std::vector<Action> actions;
  ViolationKind kind = ViolationKind::Collision;
  // Loops: number of steps after which the pose must repeat.
  int pose_period = 1;
};

enum class ReplayStatus { Realized, NotRealized, Unrealizable };
std::string_view replayStatusName(ReplayStatus s);

struct ReplayResult {
  ReplayStatus status = ReplayStatus::Unrealizable;
  std::string detail;
  ArenaConfig arena;
  RobotState start;
  Episode episode;
  // Largest deviation between the witness and what the simulator senses in
  // the synthesized arena.
  double observation_error = 0.0;
};

// Builds an arena reproducing the witness observations (small circular
// obstacles on each beam at the witness distance, goal placed from the angle
// and distance inputs), runs the greedy policy and checks whether the
// predicted violation happens.
ReplayResult replayCounterexample(const Network& net, const ReplayRequest& request,
                                  const SimParams& params);

}  // namespace navguard::sim
