#pragma once

// Solver-side view of a LinearSystem: inputs tied together by offset
// equalities collapse onto shared free variables z, and the remaining
// query constraints are kept as rows over inputs and outputs.

#include <vector>

#include <gmpxx.h>

#include "navguard/verifier.hpp"

namespace navguard::verify::detail {

struct RowTerm {
  std::size_t copy = 0;
  bool output = false;
  std::size_t index = 0;
  double coef = 0.0;
  mpq_class coef_q;
};

struct Row {
  std::vector<RowTerm> terms;
  Relation rel = Relation::GE;
  double rhs = 0.0;
  mpq_class rhs_q;
  bool post = false;  // postcondition rows get the witness margin
};

struct Problem {
  const LinearSystem* sys = nullptr;
  const Network* net = nullptr;
  std::size_t k = 0;
  std::size_t p = 0;  // number of free variables

  std::vector<std::vector<std::size_t>> rep;  // [copy][input] -> z
  std::vector<std::vector<mpq_class>> off_q;  // input = z + off
  std::vector<std::vector<double>> off;
  std::vector<Interval> zbox;                 // rounded outward
  std::vector<mpq_class> zlo_q, zhi_q;

  std::vector<Row> rows;

  // relu id <-> (copy, hidden layer, unit)
  std::vector<std::vector<std::vector<std::size_t>>> relu_id;
  struct ReluPos {
    std::size_t copy, layer, unit;
  };
  std::vector<ReluPos> relu_pos;

  // Network parameters as exact rationals.
  std::vector<std::vector<std::vector<mpq_class>>> wq;  // [layer][out][in]
  std::vector<std::vector<mpq_class>> bq;

  bool infeasible = false;
  std::string why;
};

Problem buildProblem(const LinearSystem& sys);

// Bounds of every neuron for one node of the search.
struct NodeBounds {
  bool infeasible = false;
  // [copy][layer][unit]; layers include the output layer.
  std::vector<std::vector<Vector>> lo, hi;
  // Relaxation of hidden units: upper = us * pre + ui, lower = ls * pre.
  std::vector<std::vector<Vector>> us, ui, ls;
  // Phase implied for every relu (split or stable), 0 when still unstable.
  PhaseVector effective;
};

// `zbox` narrows the free-variable box when given.
NodeBounds computeBounds(const Problem& pb, const PhaseVector& phases, bool symbolic,
                         const std::vector<Interval>* zbox = nullptr);

// Exact assignment of the free variables as inputs per copy.
std::vector<std::vector<mpq_class>> inputsFromZ(const Problem& pb, const std::vector<mpq_class>& z);
std::vector<Vector> inputsFromZ(const Problem& pb, const std::vector<double>& z);

}  // namespace navguard::verify::detail
