#include "navguard/sim.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <numbers>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "navguard/error.hpp"

namespace navguard::sim {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

double deg2rad(double deg) { return deg * kPi / 180.0; }

int positiveMod(int a, int n) {
  int r = a % n;
  return r < 0 ? r + n : r;
}

double wrapToPi(double a) {
  while (a <= -kPi) a += kTwoPi;
  while (a > kPi) a -= kTwoPi;
  return a;
}

double wrapTo2Pi(double a) {
  a = std::fmod(a, kTwoPi);
  if (a < 0.0) a += kTwoPi;
  if (a >= kTwoPi) a = 0.0;
  return a;
}

double norm(Vec2 v) { return std::hypot(v.x, v.y); }

double rayCircle(Vec2 o, Vec2 d, const Circle& c) {
  const double fx = o.x - c.center.x;
  const double fy = o.y - c.center.y;
  const double cc = fx * fx + fy * fy - c.radius * c.radius;
  if (cc <= 0.0) return 0.0;
  const double b = fx * d.x + fy * d.y;
  const double disc = b * b - cc;
  if (disc < 0.0) return INFINITY;
  const double t = -b - std::sqrt(disc);
  return t >= 0.0 ? t : INFINITY;
}

double rayRect(Vec2 o, Vec2 d, const Rect& r) {
  double t0 = -INFINITY, t1 = INFINITY;
  const double lo[2] = {r.xmin, r.ymin};
  const double hi[2] = {r.xmax, r.ymax};
  const double oo[2] = {o.x, o.y};
  const double dd[2] = {d.x, d.y};
  for (int k = 0; k < 2; ++k) {
    if (dd[k] == 0.0) {
      if (oo[k] < lo[k] || oo[k] > hi[k]) return INFINITY;
      continue;
    }
    double a = (lo[k] - oo[k]) / dd[k];
    double b = (hi[k] - oo[k]) / dd[k];
    if (a > b) std::swap(a, b);
    t0 = std::max(t0, a);
    t1 = std::min(t1, b);
  }
  if (t0 > t1 || t1 < 0.0) return INFINITY;
  return std::max(t0, 0.0);
}

double rayWalls(Vec2 o, Vec2 d, const Rect& b) {
  double t = INFINITY;
  if (d.x > 0.0) t = std::min(t, (b.xmax - o.x) / d.x);
  if (d.x < 0.0) t = std::min(t, (b.xmin - o.x) / d.x);
  if (d.y > 0.0) t = std::min(t, (b.ymax - o.y) / d.y);
  if (d.y < 0.0) t = std::min(t, (b.ymin - o.y) / d.y);
  return std::max(t, 0.0);
}

double pointRectDistance(Vec2 p, const Rect& r) {
  const double dx = std::max({r.xmin - p.x, 0.0, p.x - r.xmax});
  const double dy = std::max({r.ymin - p.y, 0.0, p.y - r.ymax});
  if (dx == 0.0 && dy == 0.0) {
    return -std::min({p.x - r.xmin, r.xmax - p.x, p.y - r.ymin, r.ymax - p.y});
  }
  return std::hypot(dx, dy);
}

// World angle of beam i.
double beamAngle(const RobotState& s, std::size_t beam, const SimParams& params) {
  const int n = params.headingDivisions();
  const double turn = deg2rad(params.turn_angle_deg);
  const int offset = static_cast<int>(kCenterBeam) - static_cast<int>(beam);
  if (params.slidingWindowCompatible()) {
    return s.heading_base + positiveMod(s.turns + offset, n) * turn;
  }
  return s.heading_base + positiveMod(s.turns, n) * turn + offset * deg2rad(params.beam_spacing_deg);
}

}  // namespace

std::string_view actionName(Action a) {
  switch (a) {
    case Action::Forward: return "FORWARD";
    case Action::Left: return "LEFT";
    case Action::Right: return "RIGHT";
  }
  return "?";
}

Action parseAction(std::string_view name) {
  if (name == "FORWARD") return Action::Forward;
  if (name == "LEFT") return Action::Left;
  if (name == "RIGHT") return Action::Right;
  throw FormatError("unknown action '" + std::string(name) + "'");
}

std::string_view terminalName(Terminal t) {
  switch (t) {
    case Terminal::None: return "none";
    case Terminal::Goal: return "goal";
    case Terminal::Collision: return "collision";
    case Terminal::StepLimit: return "step_limit";
  }
  return "?";
}

int SimParams::headingDivisions() const {
  return static_cast<int>(std::lround(360.0 / turn_angle_deg));
}

double SimParams::angleIncrementPerRightTurn() const {
  const double inc = turn_angle_deg / 360.0;
  return right_turn_increases_angle ? inc : -inc;
}

void SimParams::validate() const {
  if (!(lidar_range > 0.0)) throw ConfigError("lidar_range must be positive");
  if (!(forward_step > 0.0)) throw ConfigError("forward_step must be positive");
  if (!(robot_radius > 0.0)) throw ConfigError("robot_radius must be positive");
  if (!(turn_angle_deg > 0.0) || !(beam_spacing_deg > 0.0)) {
    throw ConfigError("turn angle and beam spacing must be positive");
  }
  const double n = 360.0 / turn_angle_deg;
  if (std::abs(n - std::round(n)) > 1e-9) {
    throw ConfigError("turn angle " + formatDouble(turn_angle_deg) + " does not divide 360");
  }
  if (step_limit <= 0) throw ConfigError("step_limit must be positive");
}

SimParams defaultParams() { return SimParams{}; }

SimParams paramsWithTurnAngle(double degrees) {
  SimParams p;
  p.turn_angle_deg = degrees;
  p.beam_spacing_deg = degrees;
  return p;
}

double ArenaConfig::distanceNormalizer() const {
  if (distance_normalizer) return *distance_normalizer;
  return std::hypot(bounds.xmax - bounds.xmin, bounds.ymax - bounds.ymin);
}

void ArenaConfig::validate(const SimParams& params) const {
  if (!(bounds.xmax > bounds.xmin) || !(bounds.ymax > bounds.ymin)) {
    throw ConfigError("arena bounds are empty");
  }
  if (!(goal_radius > 0.0)) throw ConfigError("goal_radius must be positive");
  if (!bounds.contains(goal)) throw ConfigError("goal lies outside the arena bounds");
  for (const Obstacle& o : obstacles) {
    const bool inside = std::visit(
        [&](const auto& shape) {
          using T = std::decay_t<decltype(shape)>;
          if constexpr (std::is_same_v<T, Circle>) {
            if (!(shape.radius > 0.0)) throw ConfigError("circle obstacle with non-positive radius");
            return norm({goal.x - shape.center.x, goal.y - shape.center.y}) <= shape.radius;
          } else {
            if (!(shape.xmax > shape.xmin) || !(shape.ymax > shape.ymin)) {
              throw ConfigError("empty rectangle obstacle");
            }
            return shape.contains(goal);
          }
        },
        o);
    if (inside) throw ConfigError("goal lies inside an obstacle");
  }
  if (distance_normalizer && !(*distance_normalizer > 0.0)) {
    throw ConfigError("distance normalizer must be positive");
  }
  (void)params;
}

double RobotState::heading(const SimParams& params) const {
  const int n = params.headingDivisions();
  return wrapTo2Pi(heading_base + positiveMod(turns, n) * deg2rad(params.turn_angle_deg));
}

Vector Observation::toInput() const {
  Vector x(kObservationSize);
  std::copy(lidar.begin(), lidar.end(), x.begin());
  x[kNumBeams] = angle_to_goal;
  x[kNumBeams + 1] = distance_to_goal;
  return x;
}

Observation Observation::fromInput(std::span<const double> x) {
  if (x.size() != kObservationSize) throw DimensionError("observation", kObservationSize, x.size());
  Observation o;
  std::copy(x.begin(), x.begin() + kNumBeams, o.lidar.begin());
  o.angle_to_goal = x[kNumBeams];
  o.distance_to_goal = x[kNumBeams + 1];
  return o;
}

double castRay(const ArenaConfig& arena, Vec2 origin, double angle, double max_range) {
  const Vec2 d{std::cos(angle), std::sin(angle)};
  double t = rayWalls(origin, d, arena.bounds);
  for (const Obstacle& o : arena.obstacles) {
    const double hit = std::visit(
        [&](const auto& shape) {
          using T = std::decay_t<decltype(shape)>;
          if constexpr (std::is_same_v<T, Circle>) {
            return rayCircle(origin, d, shape);
          } else {
            return rayRect(origin, d, shape);
          }
        },
        o);
    t = std::min(t, hit);
  }
  return std::min(t, max_range);
}

double clearance(const ArenaConfig& arena, Vec2 p, double radius) {
  const Rect& b = arena.bounds;
  double c = std::min({p.x - b.xmin, b.xmax - p.x, p.y - b.ymin, b.ymax - p.y});
  for (const Obstacle& o : arena.obstacles) {
    const double d = std::visit(
        [&](const auto& shape) {
          using T = std::decay_t<decltype(shape)>;
          if constexpr (std::is_same_v<T, Circle>) {
            return norm({p.x - shape.center.x, p.y - shape.center.y}) - shape.radius;
          } else {
            return pointRectDistance(p, shape);
          }
        },
        o);
    c = std::min(c, d);
  }
  return c - radius;
}

bool inCollision(const ArenaConfig& arena, Vec2 position, const SimParams& params) {
  return clearance(arena, position, params.robot_radius) < 0.0;
}

double distanceToGoal(const ArenaConfig& arena, Vec2 p) {
  return norm({arena.goal.x - p.x, arena.goal.y - p.y});
}

Observation sense(const ArenaConfig& arena, const RobotState& state, const SimParams& params) {
  Observation obs;
  const double floor = params.robot_radius / params.lidar_range;
  for (std::size_t i = 0; i < kNumBeams; ++i) {
    const double dist = castRay(arena, state.position, beamAngle(state, i, params),
                                params.lidar_range);
    obs.lidar[i] = std::max(std::min(dist, params.lidar_range) / params.lidar_range, floor);
  }
  const Vec2 to_goal{arena.goal.x - state.position.x, arena.goal.y - state.position.y};
  const double bearing = wrapToPi(std::atan2(to_goal.y, to_goal.x) - state.heading(params));
  const double sign = params.right_turn_increases_angle ? 1.0 : -1.0;
  obs.angle_to_goal = std::clamp(0.5 + sign * bearing / kTwoPi, 0.0, 1.0);
  const double dmax = arena.distanceNormalizer();
  obs.distance_to_goal = std::min(norm(to_goal), dmax) / dmax;
  return obs;
}

StepOutcome stepAction(const ArenaConfig& arena, const RobotState& state, Action action,
                       const SimParams& params) {
  StepOutcome out;
  RobotState next = state;
  const int n = params.headingDivisions();
  switch (action) {
    case Action::Left: next.turns = positiveMod(state.turns + 1, n); break;
    case Action::Right: next.turns = positiveMod(state.turns - 1, n); break;
    case Action::Forward: {
      const double h = state.heading(params);
      next.position.x += params.forward_step * std::cos(h);
      next.position.y += params.forward_step * std::sin(h);
      break;
    }
  }
  next.step_count = state.step_count + 1;
  const double d_prev = distanceToGoal(arena, state.position);
  const double d_next = distanceToGoal(arena, next.position);
  out.reward = (d_prev - d_next) * params.alpha - params.beta;
  if (inCollision(arena, next.position, params)) {
    out.terminal = Terminal::Collision;
    out.reward = -1.0;
  } else if (d_next <= arena.goal_radius) {
    out.terminal = Terminal::Goal;
    out.reward = 1.0;
  } else if (next.step_count >= params.step_limit) {
    out.terminal = Terminal::StepLimit;
  }
  out.next_state = next;
  out.observation = sense(arena, next, params);
  return out;
}

Action greedyAction(const Network& net, const Observation& obs) {
  const Vector x = obs.toInput();
  const Vector y = forward(net, x);
  std::size_t best = 0;
  for (std::size_t k = 1; k < y.size(); ++k) {
    if (y[k] > y[best]) best = k;
  }
  return static_cast<Action>(best);
}

RobotState sampleStart(const ArenaConfig& arena, std::uint64_t seed, const SimParams& params) {
  std::mt19937_64 rng(seed);
  const Rect& region = arena.start.region;
  std::uniform_real_distribution<double> ux(region.xmin, region.xmax);
  std::uniform_real_distribution<double> uy(region.ymin, region.ymax);
  std::uniform_real_distribution<double> uh(0.0, kTwoPi);
  for (int attempt = 0; attempt < 100000; ++attempt) {
    RobotState s;
    s.position = {ux(rng), uy(rng)};
    s.heading_base = uh(rng);
    if (clearance(arena, s.position, params.robot_radius) < arena.start.clearance) continue;
    if (distanceToGoal(arena, s.position) < std::max(arena.start.min_goal_distance,
                                                     arena.goal_radius)) {
      continue;
    }
    return s;
  }
  throw ConfigError("could not sample a valid start pose for this arena");
}

Episode rolloutFrom(const ArenaConfig& arena, const Network& net, const RobotState& start,
                    const SimParams& params) {
  if (net.inputDim() != kObservationSize) {
    throw DimensionError("policy input", kObservationSize, net.inputDim());
  }
  if (net.outputDim() != kNumActions) {
    throw DimensionError("policy output", kNumActions, net.outputDim());
  }
  Episode ep;
  RobotState state = start;
  Observation obs = sense(arena, state, params);
  while (true) {
    const Action a = greedyAction(net, obs);
    StepOutcome out = stepAction(arena, state, a, params);
    ep.steps.push_back({state.step_count, state, obs, a, out.reward, out.terminal});
    state = out.next_state;
    obs = out.observation;
    if (out.terminal != Terminal::None) {
      ep.outcome = out.terminal;
      break;
    }
  }
  ep.final_state = state;
  return ep;
}

Episode rollout(const ArenaConfig& arena, const Network& net, std::uint64_t seed,
                const SimParams& params) {
  return rolloutFrom(arena, net, sampleStart(arena, seed, params), params);
}

std::string exportTrace(const Episode& episode, const SimParams& params) {
  std::string out;
  for (const TraceStep& s : episode.steps) {
    nlohmann::json j;
    j["step"] = s.step;
    j["x_m"] = s.state.position.x;
    j["y_m"] = s.state.position.y;
    j["heading_rad"] = s.state.heading(params);
    j["observation"] = s.observation.toInput();
    j["action"] = std::string(actionName(s.action));
    j["reward"] = s.reward;
    j["terminal"] = std::string(terminalName(s.terminal));
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::uint64_t mixSeed(std::uint64_t seed, std::uint64_t index) {
  // splitmix64 finalizer over the combined words.
  std::uint64_t z = seed * 0x9E3779B97F4A7C15ULL + index + 0xD1B54A32D192ED03ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

ArenaSuite::Instance ArenaSuite::episode(std::uint64_t index, const SimParams& params) const {
  std::mt19937_64 rng(mixSeed(seed, index));
  ArenaConfig arena;
  arena.bounds = {0.0, 0.0, gen.width, gen.height};
  arena.goal_radius = gen.goal_radius;
  std::uniform_real_distribution<double> gx(gen.goal_clearance, gen.width - gen.goal_clearance);
  std::uniform_real_distribution<double> gy(gen.goal_clearance, gen.height - gen.goal_clearance);
  arena.goal = {gx(rng), gy(rng)};
  std::uniform_int_distribution<int> count(gen.min_obstacles, gen.max_obstacles);
  std::uniform_real_distribution<double> rad(gen.min_obstacle_radius, gen.max_obstacle_radius);
  const int n = count(rng);
  for (int k = 0; k < n; ++k) {
    for (int attempt = 0; attempt < 200; ++attempt) {
      const double r = rad(rng);
      std::uniform_real_distribution<double> cx(r, gen.width - r);
      std::uniform_real_distribution<double> cy(r, gen.height - r);
      const Circle c{{cx(rng), cy(rng)}, r};
      if (norm({c.center.x - arena.goal.x, c.center.y - arena.goal.y}) < r + gen.goal_clearance) {
        continue;
      }
      arena.obstacles.emplace_back(c);
      break;
    }
  }
  arena.start = {arena.bounds, gen.start_clearance, gen.min_goal_distance};
  Instance inst{arena, sampleStart(arena, mixSeed(seed ^ 0x5DEECE66DULL, index), params)};
  return inst;
}

}  // namespace navguard::sim

// ---------------------------------------------------------------------------
// Arena text format

namespace navguard::sim {

namespace {

std::vector<std::string_view> splitWords(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

double arenaNumber(std::string_view tok, std::size_t line_no) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size() || !std::isfinite(v)) {
    throw FormatError("arena line " + std::to_string(line_no) + ": bad number '" +
                      std::string(tok) + "'");
  }
  return v;
}

}  // namespace

ArenaConfig parseArena(std::string_view text) {
  ArenaConfig arena;
  bool have_header = false, have_bounds = false, have_goal = false, have_region = false;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view raw = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    const auto words = splitWords(raw);
    if (words.empty() || words.front().front() == '#') {
      if (end == text.size()) break;
      continue;
    }
    const std::string_view key = words.front();
    auto args = [&](std::size_t n) {
      if (words.size() != n + 1) {
        throw FormatError("arena line " + std::to_string(line_no) + ": '" + std::string(key) +
                          "' takes " + std::to_string(n) + " values");
      }
      std::vector<double> v;
      for (std::size_t k = 1; k <= n; ++k) v.push_back(arenaNumber(words[k], line_no));
      return v;
    };
    if (!have_header) {
      if (key != "arena-v1" || words.size() != 1) {
        throw FormatError("arena line " + std::to_string(line_no) + ": expected 'arena-v1'");
      }
      have_header = true;
    } else if (key == "bounds_m") {
      auto v = args(4);
      arena.bounds = {v[0], v[1], v[2], v[3]};
      have_bounds = true;
    } else if (key == "goal_m") {
      auto v = args(2);
      arena.goal = {v[0], v[1]};
      have_goal = true;
    } else if (key == "goal_radius_m") {
      arena.goal_radius = args(1)[0];
    } else if (key == "distance_normalizer_m") {
      arena.distance_normalizer = args(1)[0];
    } else if (key == "start_region_m") {
      auto v = args(4);
      arena.start.region = {v[0], v[1], v[2], v[3]};
      have_region = true;
    } else if (key == "start_clearance_m") {
      arena.start.clearance = args(1)[0];
    } else if (key == "start_min_goal_distance_m") {
      arena.start.min_goal_distance = args(1)[0];
    } else if (key == "circle_m") {
      auto v = args(3);
      arena.obstacles.emplace_back(Circle{{v[0], v[1]}, v[2]});
    } else if (key == "rect_m") {
      auto v = args(4);
      arena.obstacles.emplace_back(Rect{v[0], v[1], v[2], v[3]});
    } else {
      throw FormatError("arena line " + std::to_string(line_no) + ": unknown key '" +
                        std::string(key) + "'");
    }
    if (end == text.size()) break;
  }
  if (!have_header) throw FormatError("empty arena document");
  if (!have_bounds) throw FormatError("arena document lacks bounds_m");
  if (!have_goal) throw FormatError("arena document lacks goal_m");
  if (!have_region) arena.start.region = arena.bounds;
  arena.validate(defaultParams());
  return arena;
}

std::string formatArena(const ArenaConfig& a) {
  auto f = [](double v) { return formatDouble(v); };
  std::string out = "arena-v1\n";
  out += "bounds_m " + f(a.bounds.xmin) + " " + f(a.bounds.ymin) + " " + f(a.bounds.xmax) + " " +
         f(a.bounds.ymax) + "\n";
  out += "goal_m " + f(a.goal.x) + " " + f(a.goal.y) + "\n";
  out += "goal_radius_m " + f(a.goal_radius) + "\n";
  if (a.distance_normalizer) out += "distance_normalizer_m " + f(*a.distance_normalizer) + "\n";
  const Rect& r = a.start.region;
  out += "start_region_m " + f(r.xmin) + " " + f(r.ymin) + " " + f(r.xmax) + " " + f(r.ymax) + "\n";
  out += "start_clearance_m " + f(a.start.clearance) + "\n";
  out += "start_min_goal_distance_m " + f(a.start.min_goal_distance) + "\n";
  for (const Obstacle& o : a.obstacles) {
    if (const Circle* c = std::get_if<Circle>(&o)) {
      out += "circle_m " + f(c->center.x) + " " + f(c->center.y) + " " + f(c->radius) + "\n";
    } else {
      const Rect& q = std::get<Rect>(o);
      out += "rect_m " + f(q.xmin) + " " + f(q.ymin) + " " + f(q.xmax) + " " + f(q.ymax) + "\n";
    }
  }
  return out;
}

ArenaConfig loadArenaFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open arena file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parseArena(ss.str());
}

// ---------------------------------------------------------------------------
// Counterexample replay

std::string_view replayStatusName(ReplayStatus s) {
  switch (s) {
    case ReplayStatus::Realized: return "realized";
    case ReplayStatus::NotRealized: return "not_realized";
    case ReplayStatus::Unrealizable: return "unrealizable";
  }
  return "?";
}

namespace {

constexpr double kReadingTol = 1e-9;
constexpr double kMarkerRadius = 0.01;  // obstacle circle radius, in units of lidar_range

// Angle inputs 0 and 1 both mean "directly behind".
double angleGap(double a, double b) {
  double d = std::fmod(std::abs(a - b), 1.0);
  return std::min(d, 1.0 - d);
}

double observationError(const Observation& a, const Observation& b) {
  double e = angleGap(a.angle_to_goal, b.angle_to_goal);
  e = std::max(e, std::abs(a.distance_to_goal - b.distance_to_goal));
  for (std::size_t i = 0; i < kNumBeams; ++i) e = std::max(e, std::abs(a.lidar[i] - b.lidar[i]));
  return e;
}

ReplayResult unrealizable(std::string why) {
  ReplayResult r;
  r.status = ReplayStatus::Unrealizable;
  r.detail = std::move(why);
  return r;
}

}  // namespace

ReplayResult replayCounterexample(const Network& net, const ReplayRequest& req,
                                  const SimParams& params) {
  params.validate();
  if (req.observations.empty() || req.observations.size() != req.actions.size()) {
    throw ValueError("replay request needs one predicted action per observation");
  }
  const std::size_t k = req.observations.size();
  if (k > 1 && !params.slidingWindowCompatible()) {
    return unrealizable("multi-step witness needs beam spacing equal to the turn angle");
  }
  const int n = params.headingDivisions();
  const double turn = deg2rad(params.turn_angle_deg);
  const double range = params.lidar_range;

  // Cumulative turn count before each step.
  std::vector<int> turns(k, 0);
  for (std::size_t t = 1; t < k; ++t) {
    const Action a = req.actions[t - 1];
    if (a == Action::Forward) return unrealizable("witness moves forward before its last step");
    turns[t] = turns[t - 1] + (a == Action::Left ? 1 : -1);
  }

  // World direction -> reading. Beams of different steps (or of the same step
  // at wide spacing) that look the same way must agree.
  std::vector<std::pair<double, double>> rays;  // (angle, reading)
  std::vector<std::optional<double>> by_dir(n);
  for (std::size_t t = 0; t < k; ++t) {
    for (std::size_t i = 0; i < kNumBeams; ++i) {
      const double reading = req.observations[t].lidar[i];
      if (!(reading >= 0.0 && reading <= 1.0)) return unrealizable("lidar reading outside [0,1]");
      const int offset = static_cast<int>(kCenterBeam) - static_cast<int>(i);
      double angle = 0.0;
      if (params.slidingWindowCompatible()) {
        const int dir = positiveMod(turns[t] + offset, n);
        if (by_dir[dir] && std::abs(*by_dir[dir] - reading) > kReadingTol) {
          return unrealizable("witness gives two different readings for one world direction");
        }
        if (by_dir[dir]) continue;
        by_dir[dir] = reading;
        angle = dir * turn;
      } else {
        angle = offset * deg2rad(params.beam_spacing_deg);
      }
      rays.emplace_back(angle, reading);
    }
  }

  const double sign = params.right_turn_increases_angle ? 1.0 : -1.0;
  const double inc = params.angleIncrementPerRightTurn();
  for (std::size_t t = 1; t < k; ++t) {
    const Observation& o = req.observations[t];
    if (std::abs(o.distance_to_goal - req.observations[0].distance_to_goal) > kReadingTol) {
      return unrealizable("goal distance changes during an in-place turn");
    }
    const double expected = req.observations[0].angle_to_goal - turns[t] * inc;
    if (angleGap(o.angle_to_goal, expected) > kReadingTol) {
      return unrealizable("goal angle inconsistent with the turns taken");
    }
  }

  ArenaConfig arena;
  const double half = 2.6 * range;
  arena.bounds = {-half, -half, half, half};
  arena.distance_normalizer = 2.0 * range;
  arena.goal_radius = 0.05 * range;
  const double marker = kMarkerRadius * range;
  for (const auto& [angle, reading] : rays) {
    if (reading >= 1.0 - kReadingTol) continue;
    const double dist = reading * range;
    if (dist < params.robot_radius) return unrealizable("reading places an obstacle inside the robot");
    const double c = dist + marker;
    arena.obstacles.emplace_back(Circle{{c * std::cos(angle), c * std::sin(angle)}, marker});
  }

  const Observation& o0 = req.observations[0];
  const double bearing = sign * (o0.angle_to_goal - 0.5) * kTwoPi;
  const double goal_dist = o0.distance_to_goal * *arena.distance_normalizer;
  if (goal_dist <= arena.goal_radius) return unrealizable("goal would already be reached");
  arena.goal = {goal_dist * std::cos(bearing), goal_dist * std::sin(bearing)};
  for (const Obstacle& ob : arena.obstacles) {
    const Circle& c = std::get<Circle>(ob);
    if (norm({arena.goal.x - c.center.x, arena.goal.y - c.center.y}) <= c.radius) {
      return unrealizable("goal falls inside an obstacle marker");
    }
  }
  arena.start = {arena.bounds, 0.0, 0.0};

  ReplayResult result;
  result.arena = arena;
  result.start = RobotState{};
  if (inCollision(arena, result.start.position, params)) {
    return unrealizable("synthesized start pose is already in collision");
  }
  const Observation sensed = sense(arena, result.start, params);
  result.observation_error = observationError(sensed, o0);
  if (result.observation_error > 1e-9) {
    ReplayResult r = unrealizable("simulator cannot reproduce the witness observation (error " +
                                  formatDouble(result.observation_error) + ")");
    r.arena = arena;
    r.observation_error = result.observation_error;
    return r;
  }

  // Run the greedy policy for a bounded horizon and record the trace.
  const std::size_t horizon =
      req.kind == ViolationKind::Collision
          ? 3
          : std::max<std::size_t>(10, 2 * static_cast<std::size_t>(req.pose_period)) + 2;
  RobotState state = result.start;
  Observation obs = sensed;
  std::vector<RobotState> poses{state};
  Episode& ep = result.episode;
  for (std::size_t step = 0; step < horizon; ++step) {
    const Action a = greedyAction(net, obs);
    StepOutcome out = stepAction(arena, state, a, params);
    ep.steps.push_back({state.step_count, state, obs, a, out.reward, out.terminal});
    if (step < k) {
      result.observation_error =
          std::max(result.observation_error, observationError(obs, req.observations[step]));
    }
    state = out.next_state;
    obs = out.observation;
    poses.push_back(state);
    ep.outcome = out.terminal;
    if (out.terminal != Terminal::None) break;
  }
  ep.final_state = state;
  if (ep.outcome == Terminal::None) ep.outcome = Terminal::StepLimit;

  if (req.kind == ViolationKind::Collision) {
    if (ep.steps.front().action != Action::Forward) {
      result.status = ReplayStatus::NotRealized;
      result.detail = "policy chose " + std::string(actionName(ep.steps.front().action));
      return result;
    }
    // Keep driving straight: the obstacle is inside forward_step + radius reach.
    RobotState s = result.start;
    for (int step = 1; step <= 2; ++step) {
      StepOutcome out = stepAction(arena, s, Action::Forward, params);
      if (out.terminal == Terminal::Collision) {
        result.status = ReplayStatus::Realized;
        result.detail = "collision after " + std::to_string(step) + " forward step(s)";
        return result;
      }
      s = out.next_state;
    }
    result.status = ReplayStatus::NotRealized;
    result.detail = "forward motion does not collide within 2 steps";
    return result;
  }

  const std::size_t period = static_cast<std::size_t>(std::max(1, req.pose_period));
  const std::size_t need = std::max<std::size_t>(10, 2 * period);
  if (ep.steps.size() < need) {
    result.status = ReplayStatus::NotRealized;
    result.detail = "episode ended after " + std::to_string(ep.steps.size()) + " steps";
    return result;
  }
  for (std::size_t t = 0; t < ep.steps.size(); ++t) {
    if (ep.steps[t].action != req.actions[t % k]) {
      result.status = ReplayStatus::NotRealized;
      result.detail = "step " + std::to_string(t) + " chose " +
                      std::string(actionName(ep.steps[t].action)) + ", expected " +
                      std::string(actionName(req.actions[t % k]));
      return result;
    }
  }
  for (std::size_t t = 0; t + period < poses.size(); ++t) {
    if (!poses[t].samePose(poses[t + period])) {
      result.status = ReplayStatus::NotRealized;
      result.detail = "pose does not repeat with period " + std::to_string(period);
      return result;
    }
  }
  result.status = ReplayStatus::Realized;
  result.detail = "action pattern held for " + std::to_string(ep.steps.size()) +
                  " steps with pose period " + std::to_string(period);
  return result;
}

}  // namespace navguard::sim
