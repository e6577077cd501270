#pragma once

#include <chrono>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <gmpxx.h>
#include <json.hpp>

#include "navguard/netcore.hpp"

namespace navguard::verify {

using Json = nlohmann::json;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct Interval {
  double lo = -kInf;
  double hi = kInf;
  bool empty() const { return lo > hi; }
  double width() const { return hi - lo; }
  friend bool operator==(const Interval&, const Interval&) = default;
};

enum class Relation { LE, GE, EQ };

// Where a constraint came from. Affine rows encode the network itself; the
// other tags come from the query.
enum class ConstraintTag { Affine, Link, Post, Extra };

std::string relationName(Relation r);
Relation parseRelation(const std::string& s);
std::string tagName(ConstraintTag t);
ConstraintTag parseTag(const std::string& s);

// ---------------------------------------------------------------------------
// Query: what the user states, in terms of network copies.

struct VarRef {
  enum class Role { Input, Output };
  std::size_t copy = 0;
  Role role = Role::Input;
  std::size_t index = 0;
  friend bool operator==(const VarRef&, const VarRef&) = default;
};

inline VarRef in(std::size_t copy, std::size_t index) { return {copy, VarRef::Role::Input, index}; }
inline VarRef out(std::size_t copy, std::size_t index) { return {copy, VarRef::Role::Output, index}; }

struct QueryTerm {
  VarRef ref;
  double coef = 1.0;
};

struct QueryConstraint {
  std::vector<QueryTerm> terms;
  Relation rel = Relation::GE;
  double rhs = 0.0;
  ConstraintTag tag = ConstraintTag::Post;
  std::string label;
};

struct Query {
  std::string name;
  std::shared_ptr<const Network> network;
  std::size_t copies = 1;
  // input_boxes[copy][input]; every input needs finite bounds.
  std::vector<std::vector<Interval>> input_boxes;
  std::vector<QueryConstraint> constraints;

  // Convenience: k copies, every input box set to `box`.
  static Query make(std::shared_ptr<const Network> net, std::size_t copies, Interval box);
};

Json constraintToJson(const QueryConstraint& c);
QueryConstraint constraintFromJson(const Json& j);
Json queryToJson(const Query& q);
Query queryFromJson(const Json& j);
// SHA-256 (hex) of the canonical JSON rendering.
std::string queryHash(const Query& q);

// ---------------------------------------------------------------------------
// LinearSystem: one variable per neuron per copy.

struct Variable {
  std::string name;
  Interval box;  // infinite for everything but inputs
};

struct LinearTerm {
  std::size_t var = 0;
  double coef = 0.0;
};

struct LinearConstraint {
  std::vector<LinearTerm> terms;
  Relation rel = Relation::EQ;
  double rhs = 0.0;
  ConstraintTag tag = ConstraintTag::Affine;
  std::string label;
};

struct ReluPair {
  std::size_t pre = 0;
  std::size_t post = 0;
};

struct CopyLayout {
  std::vector<std::size_t> inputs;
  std::vector<std::vector<std::size_t>> pre;   // [hidden layer][unit]
  std::vector<std::vector<std::size_t>> post;  // [hidden layer][unit]
  std::vector<std::size_t> outputs;
};

struct LinearSystem {
  std::shared_ptr<const Network> network;  // shared by every copy
  std::vector<Variable> variables;
  std::vector<LinearConstraint> constraints;
  std::vector<ReluPair> relus;
  std::vector<CopyLayout> copies;

  std::size_t numCopies() const { return copies.size(); }
  std::size_t count(ConstraintTag tag) const;
  std::size_t resolve(const VarRef& ref) const;
};

// Throws ShapeError / ConfigError for inconsistent queries and for any input
// without finite bounds.
LinearSystem compile(const Query& query);

Json systemToJson(const LinearSystem& s);

// ---------------------------------------------------------------------------
// Bounds

// Per ReLU (indexing LinearSystem::relus): 0 free, +1 active, -1 inactive.
using PhaseVector = std::vector<std::int8_t>;

struct BoundsResult {
  bool infeasible = false;
  std::vector<Interval> bounds;  // per LinearSystem variable
};

struct PropagationOptions {
  bool symbolic = true;  // back-substitution through triangle relaxations
};

// Sound box bounds for every variable under the given phase restrictions.
BoundsResult propagateBounds(const LinearSystem& sys, const PhaseVector& phases,
                             const PropagationOptions& opts = {});

// ---------------------------------------------------------------------------
// Solving

enum class Status { SAT, UNSAT, TIMEOUT, ERROR };
std::string statusName(Status s);
Status parseStatus(const std::string& s);

enum class LeafArithmetic { ExactRational, FloatWithTolerance };

struct BnbConfig {
  double timeout_s = 600.0;
  // Deterministic budget; 0 disables it.
  std::uint64_t max_nodes = 0;
  LeafArithmetic leaf = LeafArithmetic::ExactRational;
  double witness_tolerance = 1e-6;
  std::size_t workers = 1;
  // Bound propagation, phase fixing and LP pruning. Turning this off leaves a
  // plain split over every ReLU; verdicts must not change.
  bool prune = true;
  bool lp = true;
  bool polish = true;
  // Bisections of the free-input box allowed on one path before splitting
  // ReLUs only.
  std::size_t max_input_splits = 24;
};

struct Witness {
  std::vector<Vector> inputs;   // per copy
  std::vector<Vector> outputs;  // per copy, double evaluation
  // Exact input values when produced by the rational leaf solver.
  std::vector<std::vector<mpq_class>> exact_inputs;
};

struct SolveStats {
  std::uint64_t nodes = 0;
  std::uint64_t leaves = 0;
  std::uint64_t lp_calls = 0;
  std::uint64_t pruned = 0;
  std::size_t max_depth = 0;
  double wall_time_s = 0.0;
};

struct Verdict {
  Status status = Status::ERROR;
  std::optional<Witness> witness;
  SolveStats stats;
  std::string query_hash;
  std::string diagnostic;
};

Verdict solve(const LinearSystem& sys, const BnbConfig& config);
// Compiles, solves and stamps the query hash.
Verdict solve(const Query& query, const BnbConfig& config);

struct WitnessCheck {
  bool ok = false;
  double max_residual = 0.0;
};

// Re-evaluates the network on the witness inputs and checks boxes and all
// query constraints.
WitnessCheck checkWitness(const LinearSystem& sys, const std::vector<Vector>& inputs,
                          double tolerance);
// Same check in exact arithmetic; with tolerance 0 this is a proof.
WitnessCheck checkWitnessExact(const LinearSystem& sys,
                               const std::vector<std::vector<mpq_class>>& inputs,
                               const mpq_class& tolerance = 0);

// `include_timing` adds wall time; off for byte-stable logs.
Json verdictToJson(const Verdict& v, bool include_timing);
Verdict verdictFromJson(const Json& j);

}  // namespace navguard::verify
