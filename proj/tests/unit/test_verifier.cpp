#include <gtest/gtest.h>

#include <random>

#include "navguard/error.hpp"
#include "navguard/verifier.hpp"
#include "../support/fixtures.hpp"
#include "../support/oracle.hpp"

using namespace navguard;
using namespace navguard::verify;
using navguard::testing::fig1Network;
using navguard::testing::share;

namespace {

Query toyQuery(double threshold, Relation rel = Relation::GE) {
  Query q = Query::make(share(fig1Network()), 1, {-10, 10});
  q.constraints.push_back({{{out(0, 0), 1.0}}, rel, threshold, ConstraintTag::Post, "y"});
  return q;
}

BnbConfig quick() {
  BnbConfig c;
  c.timeout_s = 60;
  return c;
}

}  // namespace

TEST(Compile, ToyNetworkCounts) {
  const LinearSystem s = compile(Query::make(share(fig1Network()), 1, {-10, 10}));
  EXPECT_EQ(s.variables.size(), 7u);  // 2 in, 2 pre, 2 post, 1 out
  EXPECT_EQ(s.count(ConstraintTag::Affine), 3u);
  EXPECT_EQ(s.relus.size(), 2u);
  EXPECT_EQ(s.copies.size(), 1u);
}

TEST(Compile, TwoCopiesDoubleTheVariables) {
  Query q = Query::make(share(fig1Network()), 2, {-1, 1});
  q.constraints.push_back({{{in(0, 0), 1.0}, {in(1, 0), -1.0}}, Relation::EQ, 0.0,
                           ConstraintTag::Link, "tie"});
  const LinearSystem s = compile(q);
  EXPECT_EQ(s.variables.size(), 14u);
  EXPECT_EQ(s.count(ConstraintTag::Affine), 6u);
  EXPECT_EQ(s.count(ConstraintTag::Link), 1u);
  EXPECT_EQ(s.relus.size(), 4u);
  EXPECT_EQ(s.network.get(), q.network.get());
}

TEST(Compile, RejectsUnboundedInput) {
  Query q = Query::make(share(fig1Network()), 1, {-10, 10});
  q.input_boxes[0][1].hi = kInf;
  EXPECT_THROW(compile(q), ConfigError);
}

TEST(Compile, RejectsOutOfRangeReference) {
  Query q = toyQuery(7);
  q.constraints.push_back({{{out(0, 3), 1.0}}, Relation::GE, 0, ConstraintTag::Post, ""});
  EXPECT_THROW(compile(q), ConfigError);
}

TEST(Bounds, ToyIntervalContainment) {
  const LinearSystem s = compile(Query::make(share(fig1Network()), 1, {-10, 10}));
  for (bool symbolic : {false, true}) {
    const BoundsResult b = propagateBounds(s, PhaseVector(2, 0), {symbolic});
    ASSERT_FALSE(b.infeasible);
    const Interval y = b.bounds[s.copies[0].outputs[0]];
    // Interval oracle: hidden pre in [-69,71] and [-52,48]; output in [-48,142].
    EXPECT_GE(y.lo, -48 - 1e-6);
    EXPECT_LE(y.hi, 142 + 1e-6);
    if (!symbolic) {
      EXPECT_NEAR(b.bounds[s.copies[0].pre[0][0]].lo, -69, 1e-6);
      EXPECT_NEAR(b.bounds[s.copies[0].pre[0][0]].hi, 71, 1e-6);
      EXPECT_NEAR(b.bounds[s.copies[0].pre[0][1]].lo, -52, 1e-6);
      EXPECT_NEAR(b.bounds[s.copies[0].pre[0][1]].hi, 48, 1e-6);
      EXPECT_NEAR(y.lo, -48, 1e-6);
      EXPECT_NEAR(y.hi, 142, 1e-6);
    }
  }
}

TEST(Bounds, PointBoxCollapsesToEvaluation) {
  Query q = Query::make(share(fig1Network()), 1, {0, 0});
  q.input_boxes[0] = {{2, 2}, {3, 3}};
  const LinearSystem s = compile(q);
  const BoundsResult b = propagateBounds(s, PhaseVector(2, 0));
  const Interval y = b.bounds[s.copies[0].outputs[0]];
  EXPECT_NEAR(y.lo, 40, 1e-6);
  EXPECT_NEAR(y.hi, 40, 1e-6);
}

TEST(Bounds, FixedOffPhaseZeroesPost) {
  const LinearSystem s = compile(Query::make(share(fig1Network()), 1, {-10, 10}));
  const BoundsResult b = propagateBounds(s, PhaseVector{-1, 0});
  ASSERT_FALSE(b.infeasible);
  EXPECT_EQ(b.bounds[s.copies[0].post[0][0]], (Interval{0.0, 0.0}));
}

TEST(Bounds, ImpossiblePhaseIsInfeasible) {
  Query q = Query::make(share(fig1Network()), 1, {0, 0});
  q.input_boxes[0] = {{2, 2}, {3, 3}};  // first hidden pre = 20
  const LinearSystem s = compile(q);
  EXPECT_TRUE(propagateBounds(s, PhaseVector{-1, 0}).infeasible);
}

TEST(Solve, ToySatWithCheckedWitness) {
  const Query q = toyQuery(7);
  const Verdict v = solve(q, quick());
  ASSERT_EQ(v.status, Status::SAT);
  ASSERT_TRUE(v.witness);
  const LinearSystem s = compile(q);
  EXPECT_TRUE(checkWitness(s, v.witness->inputs, 1e-6).ok);
  EXPECT_TRUE(checkWitnessExact(s, v.witness->exact_inputs, 0).ok);
  EXPECT_GE(forward(fig1Network(), v.witness->inputs[0])[0], 7 - 1e-9);
  EXPECT_EQ(v.query_hash.size(), 64u);
}

TEST(Solve, ToyUnsatAboveIntervalBound) {
  const Verdict v = solve(toyQuery(143), quick());
  EXPECT_EQ(v.status, Status::UNSAT);
  EXPECT_FALSE(v.witness);
}

TEST(Solve, ContradictoryPostconditionNeedsNoSplit) {
  Query q = toyQuery(1, Relation::GE);
  q.constraints.push_back({{{out(0, 0), 1.0}}, Relation::LE, -1, ConstraintTag::Post, ""});
  const Verdict v = solve(q, quick());
  EXPECT_EQ(v.status, Status::UNSAT);
  EXPECT_EQ(v.stats.max_depth, 0u);
  EXPECT_EQ(v.stats.leaves, 0u);
}

TEST(Solve, NodeBudgetGivesTimeout) {
  BnbConfig c = quick();
  c.prune = false;
  c.max_nodes = 1;
  const Verdict v = solve(toyQuery(143), c);
  EXPECT_EQ(v.status, Status::TIMEOUT);
}

TEST(Solve, FloatLeafArithmeticAgrees) {
  BnbConfig c = quick();
  c.leaf = LeafArithmetic::FloatWithTolerance;
  EXPECT_EQ(solve(toyQuery(7), c).status, Status::SAT);
  EXPECT_EQ(solve(toyQuery(143), c).status, Status::UNSAT);
}

TEST(Solve, AliasedInputsAcrossCopies) {
  // Copy 1 sees copy 0's inputs shifted by +1 in x0.
  Query q = Query::make(share(fig1Network()), 2, {-2, 2});
  q.constraints.push_back({{{in(1, 0), 1.0}, {in(0, 0), -1.0}}, Relation::EQ, 1.0,
                           ConstraintTag::Link, ""});
  q.constraints.push_back({{{in(1, 1), 1.0}, {in(0, 1), -1.0}}, Relation::EQ, 0.0,
                           ConstraintTag::Link, ""});
  // Moving x0 up never lowers the output, so y0 - y1 >= 0.5 is impossible.
  q.constraints.push_back({{{out(0, 0), 1.0}, {out(1, 0), -1.0}}, Relation::GE, 0.5,
                           ConstraintTag::Post, ""});
  EXPECT_EQ(solve(q, quick()).status, Status::UNSAT);
  q.constraints.back().rel = Relation::LE;
  q.constraints.back().rhs = -0.5;
  const Verdict v = solve(q, quick());
  ASSERT_EQ(v.status, Status::SAT);
  const auto& x = v.witness->inputs;
  EXPECT_NEAR(x[1][0], x[0][0] + 1, 1e-12);
  EXPECT_EQ(x[1][1], x[0][1]);
}

TEST(CheckWitness, BoxViolationResidual) {
  const Query q = toyQuery(-1000);
  const LinearSystem s = compile(q);
  const WitnessCheck c = checkWitness(s, {{11.0, 0.0}}, 1e-6);
  EXPECT_FALSE(c.ok);
  EXPECT_DOUBLE_EQ(c.max_residual, 1.0);
  EXPECT_TRUE(checkWitness(s, {{0.0, 2.0}}, 1e-6).ok);
}

TEST(CheckWitness, RejectsWrongWidth) {
  const LinearSystem s = compile(toyQuery(7));
  EXPECT_THROW(checkWitness(s, {{1.0}}, 1e-6), DimensionError);
}

TEST(Records, QueryAndVerdictRoundTrip) {
  const Query q = toyQuery(7);
  const Query back = queryFromJson(queryToJson(q));
  EXPECT_EQ(queryHash(back), queryHash(q));
  EXPECT_EQ(*back.network, *q.network);
  Query other = toyQuery(8);
  EXPECT_NE(queryHash(other), queryHash(q));

  const Verdict v = solve(q, quick());
  const Verdict v2 = verdictFromJson(verdictToJson(v, true));
  EXPECT_EQ(v2.status, v.status);
  EXPECT_EQ(v2.witness->inputs, v.witness->inputs);
  EXPECT_EQ(v2.witness->exact_inputs, v.witness->exact_inputs);
  EXPECT_EQ(verdictToJson(v2, false), verdictToJson(v, false));
  EXPECT_FALSE(verdictToJson(v, false)["stats"].contains("wall_time_s"));
}

namespace {

using navguard::testing::RandomCase;
using navguard::testing::randomCase;

}  // namespace

TEST(Solve, MatchesBruteForceOracleOnRandomNetworks) {
  std::mt19937_64 rng(20240611);
  int sat = 0;
  for (int i = 0; i < 40; ++i) {
    RandomCase rc = randomCase(rng);
    const bool expect = navguard::testing::bruteForceSat(*rc.query.network, rc.box, rc.rows);
    for (int mode = 0; mode < 3; ++mode) {
      BnbConfig c = quick();
      c.prune = mode != 2;
      c.max_input_splits = mode == 1 ? 0 : 24;
      const Verdict v = solve(rc.query, c);
      ASSERT_EQ(v.status == Status::SAT, expect) << "case " << i << " mode " << mode;
      ASSERT_NE(v.status, Status::ERROR) << v.diagnostic;
      if (v.witness) {
        EXPECT_TRUE(checkWitness(compile(rc.query), v.witness->inputs, 1e-6).ok);
      }
    }
    sat += expect;
  }
  EXPECT_GT(sat, 5);
  EXPECT_LT(sat, 35);
}

TEST(Solve, StatusIndependentOfWorkerCount) {
  std::mt19937_64 rng(77);
  for (int i = 0; i < 15; ++i) {
    RandomCase rc = randomCase(rng);
    BnbConfig one = quick();
    BnbConfig many = quick();
    many.workers = 3;
    EXPECT_EQ(solve(rc.query, one).status, solve(rc.query, many).status) << "case " << i;
  }
}
