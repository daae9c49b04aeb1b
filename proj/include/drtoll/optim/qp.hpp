#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include <Eigen/LU>

#include "drtoll/error.hpp"
#include "drtoll/optim/lp.hpp"
#include "drtoll/types.hpp"

namespace drtoll::optim {

/// minimize 1/2 x^T H x + h^T x  s.t.  A_eq x = b_eq,  A_in x <= b_in.
/// H must be positive definite on the null space of the active constraints.
struct QpProblem {
  Matrix H;
  Vector h;
  Matrix A_eq;
  Vector b_eq;
  Matrix A_in;
  Vector b_in;
};

struct QpOptions {
  double tol = 1e-11;
  int max_iterations = 0;  // 0 selects 10 * (n + m_in) + 20
};

struct QpSolution {
  Vector x;
  Vector eq_multipliers;
  Vector in_multipliers;  // >= 0 at optimality, zero off the working set
  double kkt_residual = std::numeric_limits<double>::infinity();
  SolveReport report;
};

namespace detail {

inline double kkt_residual(const QpProblem& p, const Vector& x,
                           const Vector& mu_eq, const Vector& lam_in) {
  Vector stat = p.H * x + p.h;
  if (p.A_eq.rows()) stat += p.A_eq.transpose() * mu_eq;
  if (p.A_in.rows()) stat += p.A_in.transpose() * lam_in;
  double r = stat.size() ? stat.cwiseAbs().maxCoeff() : 0.0;
  if (p.A_eq.rows()) r = std::max(r, (p.A_eq * x - p.b_eq).cwiseAbs().maxCoeff());
  if (p.A_in.rows()) {
    const Vector slack = p.b_in - p.A_in * x;
    r = std::max(r, (-slack).cwiseMax(0.0).maxCoeff());
    r = std::max(r, (-lam_in).cwiseMax(0.0).maxCoeff());
    r = std::max(r, (lam_in.cwiseProduct(slack)).cwiseAbs().maxCoeff());
  }
  return r;
}

}  // namespace detail

/// Primal active-set method started from a feasible point x0.
inline QpSolution solve_qp(const QpProblem& p, const Vector& x0,
                           const QpOptions& opt = {}) {
  const Eigen::Index n = p.H.rows();
  const Eigen::Index me = p.A_eq.rows();
  const Eigen::Index mi = p.A_in.rows();
  if (p.H.cols() != n || p.h.size() != n || x0.size() != n ||
      (me && p.A_eq.cols() != n) || p.b_eq.size() != me ||
      (mi && p.A_in.cols() != n) || p.b_in.size() != mi) {
    throw InvalidInput("solve_qp: inconsistent problem dimensions");
  }
  const int max_it = opt.max_iterations > 0
                         ? opt.max_iterations
                         : static_cast<int>(10 * (n + mi) + 20);

  Vector x = x0;
  std::vector<Eigen::Index> working;
  std::vector<bool> in_working(static_cast<std::size_t>(mi), false);
  Vector mu_eq = Vector::Zero(me);
  Vector lam_in = Vector::Zero(mi);

  QpSolution sol;
  int it = 0;
  bool done = false;
  bool full_step = false;
  for (; it < max_it; ++it) {
    const Eigen::Index mw = static_cast<Eigen::Index>(working.size());
    const Eigen::Index ma = me + mw;
    Matrix K = Matrix::Zero(n + ma, n + ma);
    K.topLeftCorner(n, n) = p.H;
    Matrix A(ma, n);
    if (me) A.topRows(me) = p.A_eq;
    for (Eigen::Index w = 0; w < mw; ++w) {
      A.row(me + w) = p.A_in.row(working[static_cast<std::size_t>(w)]);
    }
    K.topRightCorner(n, ma) = A.transpose();
    K.bottomLeftCorner(ma, n) = A;
    const Vector g = p.H * x + p.h;
    Vector rhs = Vector::Zero(n + ma);
    rhs.head(n) = -g;
    const Eigen::FullPivLU<Matrix> lu(K);
    const Vector sol_k = lu.solve(rhs);
    const Vector step = sol_k.head(n);
    const Vector mult = sol_k.tail(ma);

    const double xscale = 1.0 + (n ? x.cwiseAbs().maxCoeff() : 0.0);
    // After an unblocked full step x already minimizes over the working set;
    // with a badly conditioned H the re-solved step is only roundoff.
    if (n == 0 || full_step || step.cwiseAbs().maxCoeff() <= opt.tol * xscale) {
      full_step = false;
      mu_eq = mult.head(me);
      lam_in.setZero();
      Eigen::Index drop = -1;
      double most_negative = 0.0;
      const double gscale = 1.0 + (n ? g.cwiseAbs().maxCoeff() : 0.0);
      for (Eigen::Index w = 0; w < mw; ++w) {
        const double l = mult[me + w];
        lam_in[working[static_cast<std::size_t>(w)]] = l;
        if (l < -1e-10 * gscale && l < most_negative) {
          most_negative = l;
          drop = w;
        }
      }
      if (drop < 0) {
        done = true;
        break;
      }
      in_working[static_cast<std::size_t>(working[static_cast<std::size_t>(drop)])] = false;
      working.erase(working.begin() + drop);
      continue;
    }

    std::vector<std::pair<double, Eigen::Index>> ratios;
    for (Eigen::Index i = 0; i < mi; ++i) {
      if (in_working[static_cast<std::size_t>(i)]) continue;
      const double ap = p.A_in.row(i).dot(step);
      if (ap <= 1e-14 * (1.0 + p.A_in.row(i).cwiseAbs().maxCoeff()) * step.cwiseAbs().maxCoeff()) {
        continue;
      }
      const double slack = std::max(p.b_in[i] - p.A_in.row(i).dot(x), 0.0);
      if (slack / ap < 1.0) ratios.emplace_back(slack / ap, i);
    }
    std::sort(ratios.begin(), ratios.end());

    // A row in the span of the working set only meets the step through
    // roundoff; adding it would make the KKT matrix singular.
    auto dependent = [&](Eigen::Index i) {
      if (ma == 0) return false;
      const Vector a = p.A_in.row(i).transpose();
      const Vector coef = A.transpose().completeOrthogonalDecomposition().solve(a);
      return (A.transpose() * coef - a).norm() <= 1e-9 * (1.0 + a.norm());
    };
    double alpha = 1.0;
    Eigen::Index blocking = -1;
    for (const auto& [a, i] : ratios) {
      if (dependent(i)) continue;
      alpha = a;
      blocking = i;
      break;
    }
    x += alpha * step;
    full_step = blocking < 0;
    if (blocking >= 0) {
      working.push_back(blocking);
      in_working[static_cast<std::size_t>(blocking)] = true;
    }
  }

  sol.x = x;
  sol.eq_multipliers = mu_eq;
  sol.in_multipliers = lam_in;
  sol.kkt_residual = detail::kkt_residual(p, x, mu_eq, lam_in);
  sol.report.status = done ? SolveStatus::optimal : SolveStatus::iteration_cap;
  sol.report.iterations = it;
  double viol = 0.0;
  if (me) viol = (p.A_eq * x - p.b_eq).cwiseAbs().maxCoeff();
  if (mi) viol = std::max(viol, (p.A_in * x - p.b_in).cwiseMax(0.0).maxCoeff());
  sol.report.primal_residual = viol;
  sol.report.gap = done ? 0.0 : std::numeric_limits<double>::infinity();
  return sol;
}

/// Constraint set {x >= 0, G x <= rhs} used by the toll design problem.
struct Polyhedron {
  Matrix G;
  Vector rhs;

  Eigen::Index dim() const { return G.cols(); }

  bool contains(const Vector& x, double tol = 1e-9) const {
    if (x.size() != dim()) return false;
    if (x.size() && x.minCoeff() < -tol) return false;
    if (G.rows() && (G * x - rhs).maxCoeff() > tol) return false;
    return true;
  }

  QpProblem as_constraints() const {
    QpProblem p;
    const Eigen::Index n = dim();
    p.A_eq = Matrix(0, n);
    p.b_eq = Vector(0);
    p.A_in = Matrix(n + G.rows(), n);
    p.A_in << -Matrix::Identity(n, n), G;
    p.b_in = Vector(n + G.rows());
    p.b_in << Vector::Zero(n), rhs;
    return p;
  }
};

/// Some point of the polyhedron via simplex phase 1, or nullopt if empty.
inline std::optional<Vector> feasible_point(const Polyhedron& poly) {
  const LpSolution s = find_feasible_point(poly.G, poly.rhs);
  if (s.report.status != SolveStatus::optimal) return std::nullopt;
  return s.x;
}

struct Projection {
  Vector point;
  SolveReport report;
  double kkt_residual = 0.0;
};

/// Euclidean projection of x onto {y >= 0, G y <= rhs}. `start`, when given,
/// must be a feasible point and is used to warm-start the active-set solve.
inline Projection project_polyhedron(const Vector& x, const Polyhedron& poly,
                                     const std::optional<Vector>& start = {}) {
  if (x.size() != poly.dim() || poly.rhs.size() != poly.G.rows()) {
    throw InvalidInput("project_polyhedron: dimension mismatch");
  }
  Projection out;
  if (poly.contains(x, 0.0)) {
    out.point = x;
    out.report.status = SolveStatus::optimal;
    out.report.gap = 0.0;
    return out;
  }
  std::optional<Vector> x0;
  if (start && poly.contains(*start, 1e-12)) {
    x0 = start;
  } else {
    x0 = feasible_point(poly);
  }
  if (!x0) {
    out.point = x;
    out.report.status = SolveStatus::infeasible;
    return out;
  }
  QpProblem qp = poly.as_constraints();
  qp.H = Matrix::Identity(x.size(), x.size());
  qp.h = -x;
  const QpSolution s = solve_qp(qp, *x0);
  out.point = s.x;
  out.report = s.report;
  out.kkt_residual = s.kkt_residual;
  return out;
}

}  // namespace drtoll::optim
