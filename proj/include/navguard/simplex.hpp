#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <vector>

#include <gmpxx.h>

namespace navguard {

// Tolerances for the tableau arithmetic. Exact numbers use none.
template <typename Num>
struct SimplexTraits;

template <>
struct SimplexTraits<double> {
  static bool isZero(double v) { return std::abs(v) <= 1e-12; }
  // Smallest coefficient accepted as a pivot.
  static bool tinyPivot(double v) { return std::abs(v) <= 1e-9; }
  // Bound violations smaller than this (relative) are ignored.
  static double slack(double bound) { return 1e-8 * (1.0 + std::abs(bound)); }
};

template <>
struct SimplexTraits<mpq_class> {
  static bool isZero(const mpq_class& v) { return sgn(v) == 0; }
  static bool tinyPivot(const mpq_class&) { return false; }
  static mpq_class slack(const mpq_class&) { return 0; }
};

enum class FeasStatus { Feasible, Infeasible, IterationLimit };

// Feasibility-only general simplex in the style of Dutertre and de Moura:
// every row r defines an auxiliary variable s_r = sum_j a_rj x_j with its own
// bounds, and the check loop repairs bound violations with Bland's rule.
// Works on a compact tableau (rows x nonbasic columns).
template <typename Num>
class GeneralSimplex {
public:
  using Traits = SimplexTraits<Num>;

  explicit GeneralSimplex(std::size_t num_vars) : n_(num_vars) {
    lo_.resize(n_);
    hi_.resize(n_);
    has_lo_.assign(n_, false);
    has_hi_.assign(n_, false);
  }

  std::size_t numStructural() const { return n_; }

  void setBounds(std::size_t var, std::optional<Num> lo, std::optional<Num> hi) {
    has_lo_[var] = lo.has_value();
    has_hi_[var] = hi.has_value();
    if (lo) lo_[var] = *lo;
    if (hi) hi_[var] = *hi;
  }

  // Adds lo <= coeffs . x <= hi over the structural variables. Returns the
  // index of the auxiliary variable.
  std::size_t addRow(std::vector<Num> coeffs, std::optional<Num> lo, std::optional<Num> hi) {
    coeffs.resize(n_);
    rows_.push_back(std::move(coeffs));
    lo_.push_back(lo ? *lo : Num(0));
    hi_.push_back(hi ? *hi : Num(0));
    has_lo_.push_back(lo.has_value());
    has_hi_.push_back(hi.has_value());
    return n_ + rows_.size() - 1;
  }

  FeasStatus check(std::size_t max_pivots = std::numeric_limits<std::size_t>::max()) {
    initialize();
    for (std::size_t it = 0;; ++it) {
      // Smallest violating basic variable.
      std::size_t row = npos;
      bool below = false;
      for (std::size_t r = 0; r < basic_.size(); ++r) {
        const std::size_t v = basic_[r];
        if (row != npos && v > basic_[row]) continue;
        if (has_lo_[v] && val_[v] < lo_[v] - Traits::slack(lo_[v])) {
          row = r;
          below = true;
        } else if (has_hi_[v] && val_[v] > hi_[v] + Traits::slack(hi_[v])) {
          row = r;
          below = false;
        }
      }
      if (row == npos) return FeasStatus::Feasible;
      if (it >= max_pivots) return FeasStatus::IterationLimit;

      std::size_t col = npos;
      bool skipped_tiny = false;
      for (std::size_t c = 0; c < nonbasic_.size(); ++c) {
        const Num& a = tab_[row][c];
        if (Traits::isZero(a)) continue;
        const std::size_t v = nonbasic_[c];
        if (col != npos && v > nonbasic_[col]) continue;
        const bool can_up = !has_hi_[v] || val_[v] < hi_[v];
        const bool can_down = !has_lo_[v] || val_[v] > lo_[v];
        const bool pos = a > 0;
        const bool ok = below ? ((pos && can_up) || (!pos && can_down))
                              : ((!pos && can_up) || (pos && can_down));
        if (!ok) continue;
        if (Traits::tinyPivot(a)) {
          skipped_tiny = true;
          continue;
        }
        col = c;
      }
      // A row that could only move through a numerically tiny pivot is not a
      // trustworthy conflict.
      if (col == npos) return skipped_tiny ? FeasStatus::IterationLimit : FeasStatus::Infeasible;
      const std::size_t bv = basic_[row];
      pivotAndUpdate(row, col, below ? lo_[bv] : hi_[bv]);
    }
  }

  // Current assignment of structural variable j (valid after Feasible).
  const Num& value(std::size_t var) const { return val_[var]; }
  std::vector<Num> structuralValues() const {
    return std::vector<Num>(val_.begin(), val_.begin() + static_cast<std::ptrdiff_t>(n_));
  }

private:
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  void initialize() {
    const std::size_t m = rows_.size();
    val_.assign(n_ + m, Num(0));
    for (std::size_t j = 0; j < n_; ++j) {
      if (has_lo_[j] && val_[j] < lo_[j]) val_[j] = lo_[j];
      if (has_hi_[j] && val_[j] > hi_[j]) val_[j] = hi_[j];
    }
    nonbasic_.resize(n_);
    for (std::size_t j = 0; j < n_; ++j) nonbasic_[j] = j;
    basic_.resize(m);
    tab_ = rows_;
    for (std::size_t r = 0; r < m; ++r) {
      basic_[r] = n_ + r;
      Num s = 0;
      for (std::size_t j = 0; j < n_; ++j) {
        if (!Traits::isZero(tab_[r][j])) s += tab_[r][j] * val_[j];
      }
      val_[n_ + r] = s;
    }
  }

  void pivotAndUpdate(std::size_t row, std::size_t col, const Num& target) {
    const std::size_t xb = basic_[row];
    const std::size_t xn = nonbasic_[col];
    const Num a = tab_[row][col];
    const Num theta = (target - val_[xb]) / a;
    val_[xb] = target;
    val_[xn] += theta;
    for (std::size_t r = 0; r < basic_.size(); ++r) {
      if (r == row) continue;
      const Num& c = tab_[r][col];
      if (!Traits::isZero(c)) val_[basic_[r]] += c * theta;
    }

    // Solve the pivot row for xn.
    std::vector<Num>& pr = tab_[row];
    const Num inv = Num(1) / a;
    for (std::size_t c = 0; c < pr.size(); ++c) {
      if (c == col) {
        pr[c] = inv;
      } else if (!Traits::isZero(pr[c])) {
        pr[c] = -pr[c] * inv;
      } else {
        pr[c] = 0;
      }
    }
    for (std::size_t r = 0; r < basic_.size(); ++r) {
      if (r == row) continue;
      std::vector<Num>& tr = tab_[r];
      const Num b = tr[col];
      if (Traits::isZero(b)) {
        tr[col] = 0;
        continue;
      }
      for (std::size_t c = 0; c < tr.size(); ++c) {
        if (c == col) {
          tr[c] = b * pr[c];
        } else if (!Traits::isZero(pr[c])) {
          tr[c] += b * pr[c];
        }
      }
    }
    basic_[row] = xn;
    nonbasic_[col] = xb;
  }

  std::size_t n_;
  std::vector<std::vector<Num>> rows_;
  std::vector<Num> lo_, hi_;
  std::vector<bool> has_lo_, has_hi_;

  std::vector<std::vector<Num>> tab_;
  std::vector<std::size_t> basic_, nonbasic_;
  std::vector<Num> val_;
};

}  // namespace navguard
