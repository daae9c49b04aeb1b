#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "drtoll/error.hpp"
#include "drtoll/optim/linalg.hpp"
#include "drtoll/optim/lp.hpp"
#include "drtoll/optim/qp.hpp"
#include "drtoll/types.hpp"

namespace drtoll::optim {

/// minimize eps * ||A x + c||_2 + x^T Q x + g^T x over a Polyhedron.
struct CompositeProblem {
  Matrix A;
  Vector c;
  Matrix Q;  // symmetric PSD
  Vector g;
  double eps = 0.0;

  double objective(const Vector& x) const {
    return eps * (A * x + c).norm() + x.dot(Q * x) + g.dot(x);
  }

  /// Gradient; the norm term contributes 0 where A x + c vanishes.
  Vector gradient(const Vector& x) const {
    Vector grad = 2.0 * (Q * x) + g;
    const Vector r = A * x + c;
    const double nr = r.norm();
    if (eps > 0.0 && nr > 1e-12) grad += eps * (A.transpose() * r) / nr;
    return grad;
  }

  Matrix hessian(const Vector& x) const {
    Matrix h = 2.0 * Q;
    const Vector r = A * x + c;
    const double nr = r.norm();
    if (eps > 0.0 && nr > 1e-12) {
      const Vector u = r / nr;
      const Matrix proj =
          Matrix::Identity(r.size(), r.size()) - u * u.transpose();
      h += (eps / nr) * A.transpose() * proj * A;
    }
    return symmetrized(h);
  }
};

/// Solver knobs. Defaults are what the CLI uses.
struct CompositeOptions {
  /// Relative objective tolerance for stopping either phase.
  double tol = 1e-10;
  /// First-order phase: iteration cap and stall window.
  int max_first_order_iterations = 5000;
  int stall_window = 25;
  /// Backtracking growth factor for the Lipschitz estimate.
  double lipschitz_growth = 2.0;
  /// Polish phase: projected Newton steps with Armijo line search.
  int max_polish_iterations = 60;
  double armijo = 1e-4;
  /// Polish stops once the predicted decrease falls below this (relative).
  double polish_tol = 1e-14;
  /// Ridge added to the polish-phase Hessian (relative to its norm).
  double hessian_ridge = 1e-9;
};

struct CompositeResult {
  Vector x;
  double objective = std::numeric_limits<double>::quiet_NaN();
  SolveReport report;
  int first_order_iterations = 0;
  int polish_iterations = 0;
  /// Objective after each accepted polish step, starting from the
  /// first-order iterate.
  std::vector<double> polish_trace;
};

namespace detail {

// Frank-Wolfe gap: max_{y in P} grad^T (x - y), an upper bound on
// F(x) - min F for convex F.
inline double linearization_gap(const CompositeProblem& prob,
                                const Polyhedron& poly, const Vector& x) {
  LpProblem lp;
  lp.cost = prob.gradient(x);
  lp.A = poly.G;
  lp.b = poly.rhs;
  lp.sense = Sense::minimize;
  const LpSolution s = solve_lp(lp);
  if (s.report.status != SolveStatus::optimal) {
    return std::numeric_limits<double>::infinity();
  }
  return std::max(0.0, lp.cost.dot(x) - s.objective);
}

}  // namespace detail

/// Accelerated projected-gradient phase (monotone FISTA with backtracking),
/// then a projected-Newton polish whose subproblems are solved by the
/// active-set QP.
inline CompositeResult solve_composite(const CompositeProblem& prob,
                                       const Polyhedron& poly,
                                       const CompositeOptions& opt = {},
                                       const std::optional<Vector>& x0 = {}) {
  const Eigen::Index n = poly.dim();
  if (prob.A.cols() != n || prob.c.size() != prob.A.rows() ||
      prob.Q.rows() != n || prob.Q.cols() != n || prob.g.size() != n) {
    throw InvalidInput("solve_composite: dimension mismatch");
  }
  if (prob.eps < 0.0) throw InvalidInput("solve_composite: eps must be >= 0");
  if (n > kMaxDenseDimension) {
    throw InvalidInput("solve_composite: problem exceeds the dense envelope");
  }

  CompositeResult res;
  std::optional<Vector> start;
  if (x0 && poly.contains(*x0, 1e-12)) {
    start = x0;
  } else {
    start = feasible_point(poly);
    if (start && x0) {
      const Projection pr = project_polyhedron(*x0, poly, start);
      if (pr.report.status == SolveStatus::optimal) start = pr.point;
    }
  }
  if (!start) {
    res.report.status = SolveStatus::infeasible;
    return res;
  }

  auto F = [&](const Vector& v) { return prob.objective(v); };
  auto project = [&](const Vector& v, const Vector& warm) {
    const Projection pr = project_polyhedron(v, poly, warm);
    if (pr.report.status == SolveStatus::infeasible) {
      throw Infeasible("solve_composite: polyhedron became empty");
    }
    return pr.point;
  };

  // ---- first-order phase ----
  const double qnorm = n ? spectral_norm(symmetrized(prob.Q)) : 0.0;
  double anorm2 = 0.0;
  if (prob.A.size()) {
    Eigen::JacobiSVD<Matrix> svd(prob.A);
    anorm2 = std::pow(svd.singularValues()[0], 2);
  }
  Vector x = *start;
  double fx = F(x);
  const double r0 = std::max((prob.A * x + prob.c).norm(), 1e-8);
  double L = std::max(2.0 * qnorm + prob.eps * anorm2 / r0, 1e-8);

  Vector x_prev = x;
  Vector y = x;
  double t = 1.0;
  double best = fx;
  int since_improvement = 0;
  int it = 0;
  for (; it < opt.max_first_order_iterations; ++it) {
    const Vector gy = prob.gradient(y);
    const double fy = F(y);
    Vector z;
    double fz = 0.0;
    for (int bt = 0; bt < 60; ++bt) {
      z = project(y - gy / L, x);
      fz = F(z);
      const Vector d = z - y;
      if (fz <= fy + gy.dot(d) + 0.5 * L * d.squaredNorm() +
                    1e-12 * (1.0 + std::abs(fy))) {
        break;
      }
      L *= opt.lipschitz_growth;
    }
    const double step = (z - y).norm();
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    x_prev = x;
    if (fz <= fx) {
      x = z;
      fx = fz;
    }
    y = x + (t / t_next) * (z - x) + ((t - 1.0) / t_next) * (x - x_prev);
    t = t_next;

    if (fx < best - opt.tol * (1.0 + std::abs(best))) {
      best = fx;
      since_improvement = 0;
    } else if (++since_improvement >= opt.stall_window) {
      ++it;
      break;
    }
    if (L * step <= opt.tol * (1.0 + std::abs(fx))) {
      ++it;
      break;
    }
  }
  res.first_order_iterations = it;

  // ---- polish phase ----
  res.polish_trace.push_back(fx);
  bool converged = false;
  int pit = 0;
  for (; pit < opt.max_polish_iterations; ++pit) {
    const Vector grad = prob.gradient(x);
    Matrix H = prob.hessian(x);
    const double hn = std::max(H.cwiseAbs().maxCoeff(), 1.0);
    H += opt.hessian_ridge * hn * Matrix::Identity(n, n);
    QpProblem qp = poly.as_constraints();
    qp.H = H;
    qp.h = grad - H * x;
    const QpSolution sub = solve_qp(qp, x);
    if (sub.report.status != SolveStatus::optimal) break;
    // With a nearly singular model the subproblem answer can sit a hair
    // outside the polyhedron; pull it back so every trial point is feasible.
    Vector target = sub.x;
    if (!poly.contains(target, 0.0)) target = project(target, x);
    const Vector dir = target - x;
    const double decrease = grad.dot(dir);
    if (decrease > -opt.polish_tol * (1.0 + std::abs(fx))) {
      converged = true;
      break;
    }
    double s = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < 50; ++ls) {
      const Vector cand = x + s * dir;
      const double fc = F(cand);
      if (fc <= fx + opt.armijo * s * decrease) {
        x = cand;
        fx = fc;
        accepted = true;
        break;
      }
      s *= 0.5;
    }
    if (!accepted) {
      converged = true;  // no representable decrease left
      break;
    }
    res.polish_trace.push_back(fx);
  }
  res.polish_iterations = pit;

  // Long first-order steps on nearly linear objectives are projected from far
  // away and can land slightly outside; a projection from close by is exact.
  if (!poly.contains(x, 0.0)) {
    x = project(x, *start);
    fx = F(x);
  }

  res.x = x;
  res.objective = fx;
  res.report.iterations = res.first_order_iterations + pit;
  double viol = n ? (-x).cwiseMax(0.0).maxCoeff() : 0.0;
  if (poly.G.rows()) viol = std::max(viol, (poly.G * x - poly.rhs).cwiseMax(0.0).maxCoeff());
  res.report.primal_residual = viol;
  res.report.gap = detail::linearization_gap(prob, poly, x);
  const bool small_gap = res.report.gap <= opt.tol * (1.0 + std::abs(fx));
  res.report.status =
      converged || small_gap ? SolveStatus::optimal : SolveStatus::iteration_cap;
  return res;
}

}  // namespace drtoll::optim
