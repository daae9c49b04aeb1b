#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "drtoll/error.hpp"
#include "drtoll/types.hpp"

namespace drtoll::optim {

enum class SolveStatus { optimal, infeasible, unbounded, iteration_cap };

inline const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::optimal: return "optimal";
    case SolveStatus::infeasible: return "infeasible";
    case SolveStatus::unbounded: return "unbounded";
    case SolveStatus::iteration_cap: return "iteration_cap";
  }
  return "unknown";
}

struct SolveReport {
  SolveStatus status = SolveStatus::iteration_cap;
  int iterations = 0;
  double primal_residual = 0.0;
  /// Duality gap (LP) or gap estimate (composite solver); +inf when unknown.
  double gap = std::numeric_limits<double>::infinity();
};

enum class Sense { maximize, minimize };

/// optimize cost^T x  s.t.  A x <= b,  x >= lower.
struct LpProblem {
  Vector cost;
  Matrix A;
  Vector b;
  Vector lower;  // empty means all zeros
  Sense sense = Sense::maximize;
};

struct LpOptions {
  double tol = 1e-10;
  int max_iterations = 0;  // 0 selects 50 * (rows + cols) + 100
};

struct LpSolution {
  Vector x;
  /// Nonnegative multipliers of A x <= b (Lagrangian sign convention of the
  /// problem's sense). Only meaningful when status is optimal.
  Vector duals;
  double objective = std::numeric_limits<double>::quiet_NaN();
  double dual_objective = std::numeric_limits<double>::quiet_NaN();
  SolveReport report;
};

namespace detail {

// Dense tableau simplex in minimization form with Bland's pivoting rule.
class Tableau {
 public:
  Tableau(Matrix rows, Vector rhs, std::vector<Eigen::Index> basis,
          Eigen::Index cols)
      : t_(std::move(rows)), rhs_(std::move(rhs)), basis_(std::move(basis)),
        allowed_(static_cast<std::size_t>(cols), true) {}

  void set_cost(const Vector& d) {
    cost_ = d;
    reduced_ = d;
    value_ = 0.0;
    for (Eigen::Index i = 0; i < t_.rows(); ++i) {
      const double db = d[basis_[i]];
      if (db != 0.0) {
        reduced_ -= db * t_.row(i).transpose();
        value_ += db * rhs_[i];
      }
    }
  }

  void pivot(Eigen::Index row, Eigen::Index col) {
    const double p = t_(row, col);
    t_.row(row) /= p;
    rhs_[row] /= p;
    for (Eigen::Index i = 0; i < t_.rows(); ++i) {
      if (i == row) continue;
      const double f = t_(i, col);
      if (f != 0.0) {
        t_.row(i) -= f * t_.row(row);
        rhs_[i] -= f * rhs_[row];
        t_(i, col) = 0.0;
      }
    }
    const double f = reduced_[col];
    if (f != 0.0) {
      reduced_ -= f * t_.row(row).transpose();
      value_ += f * rhs_[row];
      reduced_[col] = 0.0;
    }
    t_(row, col) = 1.0;
    basis_[row] = col;
  }

  // Runs Bland's rule until optimal, unbounded or out of iterations.
  SolveStatus run(int& iterations, int max_iterations, double tol) {
    while (true) {
      Eigen::Index enter = -1;
      for (Eigen::Index j = 0; j < reduced_.size(); ++j) {
        if (allowed_[static_cast<std::size_t>(j)] && reduced_[j] < -tol) {
          enter = j;
          break;
        }
      }
      if (enter < 0) return SolveStatus::optimal;
      if (iterations >= max_iterations) return SolveStatus::iteration_cap;

      Eigen::Index leave = -1;
      double best = std::numeric_limits<double>::infinity();
      for (Eigen::Index i = 0; i < t_.rows(); ++i) {
        const double a = t_(i, enter);
        if (a <= tol) continue;
        const double ratio = std::max(rhs_[i], 0.0) / a;
        if (leave < 0 || ratio < best - 1e-14) {
          best = ratio;
          leave = i;
        } else if (ratio <= best + 1e-14 && basis_[i] < basis_[leave]) {
          best = std::min(best, ratio);
          leave = i;
        }
      }
      if (leave < 0) return SolveStatus::unbounded;
      pivot(leave, enter);
      ++iterations;
    }
  }

  void remove_row(Eigen::Index row) {
    const Eigen::Index m = t_.rows();
    for (Eigen::Index i = row; i + 1 < m; ++i) {
      t_.row(i) = t_.row(i + 1);
      rhs_[i] = rhs_[i + 1];
      basis_[static_cast<std::size_t>(i)] = basis_[static_cast<std::size_t>(i + 1)];
    }
    t_.conservativeResize(m - 1, Eigen::NoChange);
    rhs_.conservativeResize(m - 1);
    basis_.pop_back();
  }

  Matrix& t() { return t_; }
  Vector& rhs() { return rhs_; }
  std::vector<Eigen::Index>& basis() { return basis_; }
  std::vector<bool>& allowed() { return allowed_; }
  double value() const { return value_; }

 private:
  Matrix t_;
  Vector rhs_;
  std::vector<Eigen::Index> basis_;
  std::vector<bool> allowed_;
  Vector cost_;
  Vector reduced_;
  double value_ = 0.0;
};

}  // namespace detail

/// Dense two-phase simplex. Deterministic: Bland's rule fixes the pivot order.
inline LpSolution solve_lp(const LpProblem& p, const LpOptions& opt = {}) {
  const Eigen::Index n = p.cost.size();
  const Eigen::Index m = p.A.rows();
  if (p.A.cols() != n || p.b.size() != m ||
      (p.lower.size() != 0 && p.lower.size() != n)) {
    throw InvalidInput("solve_lp: inconsistent problem dimensions");
  }
  if (!p.cost.allFinite() || !p.A.allFinite() || !p.b.allFinite() ||
      !p.lower.allFinite()) {
    throw InvalidInput("solve_lp: non-finite problem data");
  }
  const Vector lower = p.lower.size() ? p.lower : Vector::Zero(n);
  const Vector b_shift = p.b - p.A * lower;

  // Columns: [x (n) | slack (m) | artificial (k)].
  std::vector<Eigen::Index> art_rows;
  for (Eigen::Index i = 0; i < m; ++i) {
    if (b_shift[i] < 0.0) art_rows.push_back(i);
  }
  const Eigen::Index k = static_cast<Eigen::Index>(art_rows.size());
  const Eigen::Index cols = n + m + k;
  Matrix rows = Matrix::Zero(m, cols);
  Vector rhs(m);
  std::vector<Eigen::Index> basis(static_cast<std::size_t>(m));
  Eigen::Index next_art = n + m;
  for (Eigen::Index i = 0; i < m; ++i) {
    const double sign = b_shift[i] < 0.0 ? -1.0 : 1.0;
    rows.block(i, 0, 1, n) = sign * p.A.row(i);
    rows(i, n + i) = sign;
    rhs[i] = sign * b_shift[i];
    if (sign < 0.0) {
      rows(i, next_art) = 1.0;
      basis[static_cast<std::size_t>(i)] = next_art++;
    } else {
      basis[static_cast<std::size_t>(i)] = n + i;
    }
  }

  const int max_it =
      opt.max_iterations > 0 ? opt.max_iterations
                             : static_cast<int>(50 * (m + n) + 100);
  const double scale = 1.0 + (b_shift.size() ? b_shift.cwiseAbs().maxCoeff() : 0.0);

  LpSolution sol;
  detail::Tableau tab(std::move(rows), std::move(rhs), std::move(basis), cols);
  int iterations = 0;

  if (k > 0) {
    Vector d = Vector::Zero(cols);
    d.tail(k).setOnes();
    tab.set_cost(d);
    const SolveStatus s1 = tab.run(iterations, max_it, opt.tol);
    if (s1 == SolveStatus::iteration_cap) {
      sol.report = {SolveStatus::iteration_cap, iterations, 0.0,
                    std::numeric_limits<double>::infinity()};
      return sol;
    }
    if (tab.value() > 1e-9 * scale) {
      sol.report = {SolveStatus::infeasible, iterations, tab.value(),
                    std::numeric_limits<double>::infinity()};
      return sol;
    }
    // Drive remaining (zero-level) artificials out of the basis.
    for (Eigen::Index i = 0; i < tab.t().rows();) {
      if (tab.basis()[static_cast<std::size_t>(i)] < n + m) {
        ++i;
        continue;
      }
      Eigen::Index col = -1;
      for (Eigen::Index j = 0; j < n + m; ++j) {
        if (std::abs(tab.t()(i, j)) > 1e-9) {
          col = j;
          break;
        }
      }
      if (col >= 0) {
        tab.pivot(i, col);
        ++i;
      } else {
        tab.remove_row(i);  // redundant constraint
      }
    }
    for (Eigen::Index j = n + m; j < cols; ++j) {
      tab.allowed()[static_cast<std::size_t>(j)] = false;
    }
  }

  const double sense = p.sense == Sense::maximize ? -1.0 : 1.0;
  Vector d = Vector::Zero(cols);
  d.head(n) = sense * p.cost;
  tab.set_cost(d);
  const SolveStatus s2 = tab.run(iterations, max_it, opt.tol);

  Vector y = Vector::Zero(n);
  for (Eigen::Index i = 0; i < tab.t().rows(); ++i) {
    const Eigen::Index bi = tab.basis()[static_cast<std::size_t>(i)];
    if (bi < n) y[bi] = tab.rhs()[i];
  }
  sol.x = y + lower;
  sol.report.status = s2;
  sol.report.iterations = iterations;
  const Vector viol = (p.A * sol.x - p.b).cwiseMax(0.0);
  sol.report.primal_residual =
      std::max(viol.size() ? viol.maxCoeff() : 0.0,
               n ? (lower - sol.x).cwiseMax(0.0).maxCoeff() : 0.0);
  sol.objective = p.cost.dot(sol.x);

  if (s2 == SolveStatus::optimal) {
    // Recover multipliers from the final basis of [A I] restricted to the
    // rows that survived phase 1.
    const Eigen::Index mb = tab.t().rows();
    Matrix full(m, n + m);
    full << p.A, Matrix::Identity(m, m);
    // Rows that survived: identify via the basis columns' support. A removed
    // row is redundant, so any mb-subset of rows with a nonsingular basis
    // block yields valid multipliers; pick rows greedily by rank.
    Matrix basis_cols(m, mb);
    Vector cb(mb);
    for (Eigen::Index i = 0; i < mb; ++i) {
      const Eigen::Index bi = tab.basis()[static_cast<std::size_t>(i)];
      basis_cols.col(i) = full.col(bi);
      cb[i] = bi < n ? -sense * p.cost[bi] : 0.0;
    }
    Vector lambda = Vector::Zero(m);
    if (mb > 0) {
      Eigen::ColPivHouseholderQR<Matrix> qr(basis_cols.transpose());
      lambda = qr.solve(cb);
    }
    if (p.sense == Sense::minimize) lambda = -lambda;
    sol.duals = lambda;
    // max: min b'^T lambda + c^T lower ; min: max -b'^T lambda + c^T lower
    sol.dual_objective = (p.sense == Sense::maximize ? 1.0 : -1.0) *
                             b_shift.dot(lambda) +
                         p.cost.dot(lower);
    sol.report.gap = std::abs(sol.dual_objective - sol.objective);
  } else if (s2 == SolveStatus::unbounded) {
    sol.objective = p.sense == Sense::maximize
                        ? std::numeric_limits<double>::infinity()
                        : -std::numeric_limits<double>::infinity();
  }
  return sol;
}

/// Phase-1 only: finds a point of {x >= lower, A x <= b} or reports
/// infeasibility.
inline LpSolution find_feasible_point(const Matrix& A, const Vector& b,
                                      const Vector& lower = Vector{}) {
  LpProblem p;
  p.cost = Vector::Zero(A.cols());
  p.A = A;
  p.b = b;
  p.lower = lower;
  return solve_lp(p);
}

}  // namespace drtoll::optim
