#include "navguard/querylang.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "navguard/error.hpp"

namespace navguard::props {

using sim::Action;
using verify::ConstraintTag;
using verify::QueryConstraint;
using verify::Relation;

namespace {

constexpr std::size_t kAngle = sim::kNumBeams;
constexpr std::size_t kDistance = sim::kNumBeams + 1;

struct KindEntry {
  PropertyKind kind;
  const char* name;
};

constexpr KindEntry kKinds[] = {
    {PropertyKind::ForwardCollision, "forward_collision"},
    {PropertyKind::LeftCollision, "left_collision"},
    {PropertyKind::RightCollision, "right_collision"},
    {PropertyKind::AlternatingLoop, "alternating_loop"},
    {PropertyKind::LeftCycle, "left_cycle"},
    {PropertyKind::RightCycle, "right_cycle"},
    {PropertyKind::BraveryProbe, "bravery_probe"},
    {PropertyKind::Custom, "custom"},
};

void requirePolicyShape(const std::shared_ptr<const Network>& net) {
  if (!net) throw ValueError("property needs a network");
  if (net->inputDim() != sim::kObservationSize) {
    throw DimensionError("policy input", sim::kObservationSize, net->inputDim());
  }
  if (net->outputDim() != sim::kNumActions) {
    throw DimensionError("policy output", sim::kNumActions, net->outputDim());
  }
}

std::vector<Interval> clearBox() {
  std::vector<Interval> box(sim::kObservationSize, Interval{kClearLo, 1.0});
  box[kAngle] = {0.0, 1.0};
  box[kDistance] = {kGoalDistanceLo, 1.0};
  return box;
}

// y_winner - y_other >= margin for both other outputs of one copy.
void addWins(Query& q, std::size_t copy, Action winner, double margin) {
  const auto w = static_cast<std::size_t>(winner);
  for (std::size_t o = 0; o < sim::kNumActions; ++o) {
    if (o == w) continue;
    QueryConstraint c;
    c.terms = {{verify::out(copy, w), 1.0}, {verify::out(copy, o), -1.0}};
    c.rel = Relation::GE;
    c.rhs = margin;
    c.tag = ConstraintTag::Post;
    c.label = "step " + std::to_string(copy) + ": " + std::string(sim::actionName(winner)) +
              " beats " + std::string(sim::actionName(static_cast<Action>(o)));
    q.constraints.push_back(std::move(c));
  }
}

QueryConstraint equality(verify::VarRef a, verify::VarRef b, double offset, std::string label) {
  QueryConstraint c;
  c.terms = {{a, 1.0}, {b, -1.0}};
  c.rel = Relation::EQ;
  c.rhs = offset;
  c.tag = ConstraintTag::Link;
  c.label = std::move(label);
  return c;
}

void addWindowLink(Query& q, const SlidingWindowLink& link) {
  const std::size_t t = link.from_step;
  const std::size_t u = t + 1;
  if (u >= q.copies) throw ShapeError("sliding-window link past the last step");
  if (link.direction == Action::Forward) throw ValueError("sliding-window link needs a turn");
  const std::string tag = std::to_string(t) + "->" + std::to_string(u);
  for (std::size_t i = 0; i + 1 < sim::kNumBeams; ++i) {
    if (link.direction == Action::Right) {
      q.constraints.push_back(equality(verify::in(u, i), verify::in(t, i + 1), 0.0,
                                       "window " + tag + " beam " + std::to_string(i)));
    } else {
      q.constraints.push_back(equality(verify::in(u, i + 1), verify::in(t, i), 0.0,
                                       "window " + tag + " beam " + std::to_string(i + 1)));
    }
  }
  const double inc = link.direction == Action::Right ? link.angle_increment : -link.angle_increment;
  q.constraints.push_back(equality(verify::in(u, kAngle), verify::in(t, kAngle), inc, "angle " + tag));
  if (link.distance_equal) {
    q.constraints.push_back(
        equality(verify::in(u, kDistance), verify::in(t, kDistance), 0.0, "distance " + tag));
  }
}

int positiveMod(int a, int n) { return ((a % n) + n) % n; }

struct UnionFind {
  std::vector<std::size_t> parent;
  explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  bool unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    parent[std::max(a, b)] = std::min(a, b);
    return true;
  }
};

std::string fmt(double v) { return formatDouble(v); }

}  // namespace

std::string kindName(PropertyKind k) {
  for (const KindEntry& e : kKinds) {
    if (e.kind == k) return e.name;
  }
  return "?";
}

PropertyKind parseKind(const std::string& name) {
  for (const KindEntry& e : kKinds) {
    if (name == e.name) return e.kind;
  }
  throw ConfigError("unknown property kind '" + name + "'");
}

bool isCollision(PropertyKind k) {
  return k == PropertyKind::ForwardCollision || k == PropertyKind::LeftCollision ||
         k == PropertyKind::RightCollision;
}

bool isLoop(PropertyKind k) {
  return k == PropertyKind::AlternatingLoop || k == PropertyKind::LeftCycle ||
         k == PropertyKind::RightCycle;
}

std::size_t obstacleBeam(PropertyKind k) {
  switch (k) {
    case PropertyKind::ForwardCollision: return 3;
    case PropertyKind::LeftCollision: return 2;
    case PropertyKind::RightCollision: return 4;
    default: throw ValueError("no obstacle beam for " + kindName(k));
  }
}

std::size_t stepsFor(PropertyKind k, double turn_angle_deg) {
  if (isCollision(k) || k == PropertyKind::BraveryProbe) return 1;
  if (k == PropertyKind::AlternatingLoop) return 2;
  if (k == PropertyKind::LeftCycle || k == PropertyKind::RightCycle) {
    const double n = 360.0 / turn_angle_deg;
    if (!(turn_angle_deg > 0.0) || std::abs(n - std::round(n)) > 1e-9) {
      throw ConfigError("turn angle " + fmt(turn_angle_deg) + " does not divide 360");
    }
    return static_cast<std::size_t>(std::lround(n));
  }
  throw ValueError("step count of a custom property comes from its spec");
}

std::vector<Action> loopActions(PropertyKind k, std::size_t steps) {
  std::vector<Action> acts(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    switch (k) {
      case PropertyKind::AlternatingLoop: acts[t] = t % 2 == 0 ? Action::Right : Action::Left; break;
      case PropertyKind::LeftCycle: acts[t] = Action::Left; break;
      case PropertyKind::RightCycle: acts[t] = Action::Right; break;
      default: throw ValueError(kindName(k) + " is not a loop");
    }
  }
  return acts;
}

std::vector<Action> predictedActions(PropertyKind kind, std::size_t steps) {
  if (isLoop(kind)) return loopActions(kind, steps);
  return std::vector<Action>(steps, Action::Forward);
}

Query buildCollision(PropertyKind kind, std::shared_ptr<const Network> net, double slack) {
  requirePolicyShape(net);
  const std::size_t beam = obstacleBeam(kind);
  Query q;
  q.name = kindName(kind) + "(slack=" + fmt(slack) + ")";
  q.network = std::move(net);
  q.copies = 1;
  std::vector<Interval> box = clearBox();
  box[beam] = {kObstacleLo, kObstacleHi};
  q.input_boxes = {box};
  addWins(q, 0, Action::Forward, slack);
  return q;
}

Query buildLoop(PropertyKind kind, std::shared_ptr<const Network> net, double slack,
                const LoopGeometry& geometry) {
  requirePolicyShape(net);
  const std::size_t k = stepsFor(kind, geometry.turn_angle_deg);
  const std::vector<Action> acts = loopActions(kind, k);
  const int n = static_cast<int>(std::lround(360.0 / geometry.turn_angle_deg));
  const double inc = (geometry.right_turn_increases_angle ? 1.0 : -1.0) *
                     (geometry.turn_angle_deg / 360.0);

  Query q;
  q.name = kindName(kind) + "(turn=" + fmt(geometry.turn_angle_deg) + ",slack=" + fmt(slack) + ")";
  q.network = std::move(net);
  q.copies = k;
  q.input_boxes.assign(k, clearBox());
  for (std::size_t t = 0; t < k; ++t) addWins(q, t, acts[t], slack / static_cast<double>(k));

  // Consecutive-step windows first.
  UnionFind uf(k * sim::kNumBeams);
  auto slot = [](std::size_t t, std::size_t i) { return t * sim::kNumBeams + i; };
  for (std::size_t t = 0; t + 1 < k; ++t) {
    addWindowLink(q, {t, acts[t], inc, true});
    for (std::size_t i = 0; i + 1 < sim::kNumBeams; ++i) {
      if (acts[t] == Action::Right) {
        uf.unite(slot(t + 1, i), slot(t, i + 1));
      } else {
        uf.unite(slot(t + 1, i + 1), slot(t, i));
      }
    }
  }

  // Then every remaining pair that sees the same world direction: beams that
  // wrap around over a full cycle, and beams of one step that coincide when
  // the spacing is wide.
  std::vector<int> turns(k, 0);
  for (std::size_t t = 1; t < k; ++t) turns[t] = turns[t - 1] + (acts[t - 1] == Action::Left ? 1 : -1);
  std::vector<std::optional<std::size_t>> first(n);
  for (std::size_t t = 0; t < k; ++t) {
    for (std::size_t i = 0; i < sim::kNumBeams; ++i) {
      const int dir = positiveMod(turns[t] + static_cast<int>(sim::kCenterBeam) - static_cast<int>(i), n);
      if (!first[dir]) {
        first[dir] = slot(t, i);
        continue;
      }
      const std::size_t f = *first[dir];
      if (uf.unite(slot(t, i), f)) {
        q.constraints.push_back(equality(verify::in(t, i),
                                         verify::in(f / sim::kNumBeams, f % sim::kNumBeams), 0.0,
                                         "same direction " + std::to_string(dir) + " step " +
                                             std::to_string(t) + " beam " + std::to_string(i)));
      }
    }
  }
  return q;
}

Query buildBraveryProbe(std::shared_ptr<const Network> net, double d, double slack) {
  requirePolicyShape(net);
  if (!(d >= kBraveryLo && d <= 1.0)) {
    throw ValueError("bravery bound " + fmt(d) + " outside [" + fmt(kBraveryLo) + ", 1]");
  }
  Query q;
  q.name = "bravery_probe(d=" + fmt(d) + ",slack=" + fmt(slack) + ")";
  q.network = std::move(net);
  q.copies = 1;
  std::vector<Interval> box = clearBox();
  box[sim::kCenterBeam] = {kBraveryLo, d};
  q.input_boxes = {box};
  addWins(q, 0, Action::Forward, slack);
  return q;
}

Query buildCustom(const CustomSpec& spec, std::shared_ptr<const Network> net) {
  if (!net) throw ValueError("property needs a network");
  if (spec.steps == 0) throw ShapeError("custom property needs at least one step");
  if (spec.boxes.size() > spec.steps) throw ShapeError("more boxes than steps");
  Query q;
  q.name = "custom";
  q.copies = spec.steps;
  q.input_boxes.assign(spec.steps, std::vector<Interval>(net->inputDim(), Interval{0.0, 1.0}));
  for (std::size_t t = 0; t < spec.boxes.size(); ++t) {
    if (spec.boxes[t].size() != net->inputDim()) {
      throw DimensionError("custom box", net->inputDim(), spec.boxes[t].size());
    }
    q.input_boxes[t] = spec.boxes[t];
  }
  q.network = std::move(net);
  q.constraints = spec.constraints;
  if (!spec.links.empty() && q.network->inputDim() != sim::kObservationSize) {
    throw DimensionError("policy input", sim::kObservationSize, q.network->inputDim());
  }
  for (const SlidingWindowLink& l : spec.links) addWindowLink(q, l);
  return q;
}

Query buildProperty(const PropertySpec& spec, std::shared_ptr<const Network> net,
                    double default_slack) {
  const double slack = spec.slack.value_or(default_slack);
  if (isCollision(spec.kind)) return buildCollision(spec.kind, std::move(net), slack);
  if (isLoop(spec.kind)) {
    return buildLoop(spec.kind, std::move(net), slack,
                     {spec.turn_angle_deg, spec.right_turn_increases_angle});
  }
  if (spec.kind == PropertyKind::BraveryProbe) {
    return buildBraveryProbe(std::move(net), spec.bravery_bound, slack);
  }
  if (!spec.custom) throw ConfigError("custom property without a body");
  return buildCustom(*spec.custom, std::move(net));
}

verify::Json specToJson(const PropertySpec& spec) {
  verify::Json j{{"kind", kindName(spec.kind)}};
  if (spec.slack) j["slack"] = *spec.slack;
  if (isLoop(spec.kind)) {
    j["turn_angle_deg"] = spec.turn_angle_deg;
    j["right_turn_increases_angle"] = spec.right_turn_increases_angle;
  }
  if (spec.kind == PropertyKind::BraveryProbe) j["bravery_bound"] = spec.bravery_bound;
  if (spec.custom) {
    const CustomSpec& c = *spec.custom;
    verify::Json body{{"steps", c.steps}};
    verify::Json boxes = verify::Json::array();
    for (const auto& box : c.boxes) {
      verify::Json b = verify::Json::array();
      for (const Interval& iv : box) b.push_back(verify::Json::array({iv.lo, iv.hi}));
      boxes.push_back(b);
    }
    body["boxes"] = boxes;
    verify::Json cons = verify::Json::array();
    for (const auto& qc : c.constraints) cons.push_back(verify::constraintToJson(qc));
    body["constraints"] = cons;
    verify::Json links = verify::Json::array();
    for (const SlidingWindowLink& l : c.links) {
      links.push_back({{"from_step", l.from_step},
                       {"direction", std::string(sim::actionName(l.direction))},
                       {"angle_increment", l.angle_increment},
                       {"distance_equal", l.distance_equal}});
    }
    body["links"] = links;
    j["custom"] = body;
  }
  return j;
}

PropertySpec specFromJson(const verify::Json& j) {
  try {
    PropertySpec s;
    s.kind = parseKind(j.at("kind").get<std::string>());
    if (j.contains("slack") && !j.at("slack").is_null()) s.slack = j.at("slack").get<double>();
    s.turn_angle_deg = j.value("turn_angle_deg", 30.0);
    s.right_turn_increases_angle = j.value("right_turn_increases_angle", true);
    s.bravery_bound = j.value("bravery_bound", 1.0);
    if (j.contains("custom")) {
      const verify::Json& b = j.at("custom");
      CustomSpec c;
      c.steps = b.value("steps", std::size_t{1});
      if (b.contains("boxes")) {
        for (const verify::Json& box : b.at("boxes")) {
          std::vector<Interval> ivs;
          for (const verify::Json& iv : box) ivs.push_back({iv.at(0).get<double>(), iv.at(1).get<double>()});
          c.boxes.push_back(std::move(ivs));
        }
      }
      if (b.contains("constraints")) {
        for (const verify::Json& cj : b.at("constraints")) c.constraints.push_back(verify::constraintFromJson(cj));
      }
      if (b.contains("links")) {
        for (const verify::Json& lj : b.at("links")) {
          SlidingWindowLink l;
          l.from_step = lj.value("from_step", std::size_t{0});
          l.direction = sim::parseAction(lj.value("direction", std::string("RIGHT")));
          l.angle_increment = lj.value("angle_increment", 1.0 / 12.0);
          l.distance_equal = lj.value("distance_equal", true);
          c.links.push_back(l);
        }
      }
      s.custom = std::move(c);
    } else if (s.kind == PropertyKind::Custom) {
      throw ConfigError("custom property without a 'custom' body");
    }
    return s;
  } catch (const verify::Json::exception& e) {
    throw FormatError(std::string("malformed property spec: ") + e.what());
  }
}

std::vector<PropertySpec> loadPropertySpecs(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open property file '" + path + "'");
  verify::Json doc;
  try {
    doc = verify::Json::parse(in);
  } catch (const verify::Json::exception& e) {
    throw FormatError("property file '" + path + "': " + e.what());
  }
  const verify::Json& arr = doc.is_object() ? doc.at("properties") : doc;
  if (!arr.is_array()) throw FormatError("property file '" + path + "' must hold a list");
  std::vector<PropertySpec> out;
  for (const verify::Json& j : arr) out.push_back(specFromJson(j));
  return out;
}

std::vector<PropertySpec> standardSuite(double cycle_turn_deg) {
  std::vector<PropertySpec> out;
  for (PropertyKind k : {PropertyKind::ForwardCollision, PropertyKind::LeftCollision,
                         PropertyKind::RightCollision, PropertyKind::AlternatingLoop,
                         PropertyKind::LeftCycle, PropertyKind::RightCycle}) {
    PropertySpec s;
    s.kind = k;
    s.turn_angle_deg = k == PropertyKind::AlternatingLoop ? 30.0 : cycle_turn_deg;
    out.push_back(s);
  }
  return out;
}

Network mirrorNetwork(const Network& net) {
  if (net.inputDim() != sim::kObservationSize || net.outputDim() != sim::kNumActions) {
    throw ShapeError("mirroring needs a 9-input, 3-output policy");
  }
  std::vector<AffineLayer> layers = net.layers();
  AffineLayer& first = layers.front();
  const AffineLayer& orig = net.layer(0);
  for (std::size_t r = 0; r < first.outWidth(); ++r) {
    for (std::size_t i = 0; i < sim::kNumBeams; ++i) {
      first.weights(r, i) = orig.weights(r, sim::kNumBeams - 1 - i);
    }
    // w * x7 becomes w * (1 - x7).
    first.weights(r, kAngle) = -orig.weights(r, kAngle);
    first.biases[r] = orig.biases[r] + orig.weights(r, kAngle);
  }
  AffineLayer& last = layers.back();
  const auto l = static_cast<std::size_t>(Action::Left);
  const auto rr = static_cast<std::size_t>(Action::Right);
  for (std::size_t c = 0; c < last.inWidth(); ++c) std::swap(last.weights(l, c), last.weights(rr, c));
  std::swap(last.biases[l], last.biases[rr]);
  return Network(std::move(layers));
}

}  // namespace navguard::props
