#pragma once

#include <cmath>
#include <limits>
#include <sstream>
#include <string>

#include "drtoll/equilibrium.hpp"
#include "drtoll/error.hpp"
#include "drtoll/optim/composite.hpp"
#include "drtoll/optim/lp.hpp"
#include "drtoll/optim/qp.hpp"
#include "drtoll/types.hpp"
#include "drtoll/uncertainty.hpp"

namespace drtoll {

/// Which robustness level tightens the full-utilization constraints of the
/// design problem.
///
/// `anticipated` constrains tolls to T(eps, delta), i.e. the constraint margin
/// grows with the design radius. `spread_only` constrains them to T(0, delta)
/// for every eps: edges stay utilized under the nominal spread, and the
/// mean shift is priced only through the objective. On the bundled Pigou
/// scenario the tightened set cuts off the unconstrained optimum for eps >= 10.
enum class TollSetLevel { spread_only, anticipated };

inline const char* to_string(TollSetLevel l) {
  return l == TollSetLevel::spread_only ? "spread_only" : "anticipated";
}

inline TollSetLevel parse_toll_set_level(const std::string& s) {
  if (s == "spread_only") return TollSetLevel::spread_only;
  if (s == "anticipated") return TollSetLevel::anticipated;
  throw InvalidInput("unknown toll set level '" + s +
                     "' (expected spread_only or anticipated)");
}

/// {tau >= 0 : Gamma tau <= -||Gamma|| (eps + delta) 1 - Gamma theta_hat + c},
/// with strict inequality when `strict`.
struct TollPolytope {
  Matrix Gamma;
  Vector rhs;
  bool strict = false;

  static constexpr double kStrictMargin = 1e-12;

  bool contains(const Vector& tau, double tol = 0.0) const {
    if (tau.size() != Gamma.cols()) return false;
    if (tau.size() && tau.minCoeff() < -tol) return false;
    const Vector lhs = Gamma * tau;
    for (Eigen::Index i = 0; i < lhs.size(); ++i) {
      if (strict ? !(lhs[i] < rhs[i] - kStrictMargin) : lhs[i] > rhs[i] + tol) {
        return false;
      }
    }
    return true;
  }

  optim::Polyhedron polyhedron() const { return {Gamma, rhs}; }
};

inline TollPolytope toll_polytope(const KktBlocks& b, const DisturbanceModel& model,
                                  double eps, bool strict) {
  if (!(eps >= 0.0)) throw InvalidInput("toll_polytope: eps must be >= 0");
  model.check(b.num_edges());
  const Eigen::Index m = b.num_edges();
  TollPolytope p;
  p.Gamma = b.Gamma;
  p.rhs = -b.gamma_norm * (eps + model.support_radius) * Vector::Ones(m) -
          b.Gamma * model.mean + b.c;
  p.strict = strict;
  return p;
}

struct EpsilonMax {
  /// +inf when Gamma vanishes or the LP is unbounded.
  double value = 0.0;
  /// A toll in T(value, delta) (any toll in T(0, delta) when value is +inf).
  Vector certificate;
  optim::SolveReport report;

  bool infinite() const { return std::isinf(value); }
};

/// Largest mean-shift radius for which T(eps, delta) is nonempty, via the LP
/// max eps s.t. tau >= 0, eps >= 0, Gamma tau + ||Gamma|| eps 1 <= rhs(0).
inline EpsilonMax epsilon_max(const KktBlocks& b, const DisturbanceModel& model) {
  model.check(b.num_edges());
  const Eigen::Index m = b.num_edges();
  const TollPolytope base = toll_polytope(b, model, 0.0, false);
  const double scale = 1.0 + b.beta.cwiseInverse().maxCoeff();

  EpsilonMax out;
  if (b.gamma_norm <= 1e-12 * scale) {
    // Gamma = 0: the constraint set does not depend on eps.
    if (!(base.rhs.minCoeff() > 0.0)) {
      throw Infeasible("epsilon_max: no toll keeps every edge strictly utilized "
                       "at the nominal disturbance");
    }
    out.value = std::numeric_limits<double>::infinity();
    out.certificate = Vector::Zero(m);
    out.report.status = optim::SolveStatus::optimal;
    out.report.gap = 0.0;
    return out;
  }

  optim::LpProblem lp;
  lp.cost = Vector::Zero(m + 1);
  lp.cost[m] = 1.0;
  lp.A.resize(m, m + 1);
  lp.A << b.Gamma, b.gamma_norm * Vector::Ones(m);
  lp.b = base.rhs;
  lp.sense = optim::Sense::maximize;
  const optim::LpSolution s = optim::solve_lp(lp);
  out.report = s.report;
  switch (s.report.status) {
    case optim::SolveStatus::unbounded: {
      out.value = std::numeric_limits<double>::infinity();
      const auto pt = optim::feasible_point(base.polyhedron());
      out.certificate = pt ? *pt : Vector::Zero(m);
      return out;
    }
    case optim::SolveStatus::infeasible:
      throw Infeasible("epsilon_max: T(0, delta) is empty; the nominal model and "
                       "spread admit no fully utilizing toll");
    case optim::SolveStatus::iteration_cap:
      throw NonConvergence("epsilon_max: simplex iteration cap reached",
                           s.report.primal_residual);
    case optim::SolveStatus::optimal:
      break;
  }
  out.value = std::max(0.0, s.x[m]);
  out.certificate = s.x.head(m);
  if (!(out.value > 1e-12 * scale)) {
    throw Infeasible("epsilon_max: no toll keeps every edge strictly utilized "
                     "(eps_max = 0)",
                     out.value);
  }
  return out;
}

/// eps ||q(tau)|| + tau^T Gamma tau + theta_hat^T Gamma tau.
inline double dro_objective(const KktBlocks& b, const DisturbanceModel& model,
                            double eps, const Vector& tau) {
  model.check(b.num_edges());
  if (tau.size() != b.num_edges()) {
    throw InvalidInput("dro_objective: tau has wrong dimension");
  }
  const Vector gt = b.Gamma * tau;
  return eps * (gt + b.c).norm() + tau.dot(gt) + model.mean.dot(gt);
}

/// Worst-case expected equilibrium latency of a toll: the DRO objective plus
/// the toll-independent constant c^T theta_hat + eta^T S eta.
inline double worst_case_expected_latency(const KktBlocks& b,
                                          const DisturbanceModel& model, double eps,
                                          const Vector& tau) {
  return dro_objective(b, model, eps, tau) + b.c.dot(model.mean) +
         b.eta.dot(b.S * b.eta);
}

struct DesignOptions {
  optim::CompositeOptions solver;
  TollSetLevel toll_set = TollSetLevel::spread_only;
  bool canonicalize = true;
  double feasibility_tol = 1e-8;
};

struct DesignResult {
  Vector tau_star;
  double objective = 0.0;
  double worst_case_expected_latency = 0.0;
  double eps = 0.0;
  double eps_max = 0.0;
  TollSetLevel toll_set = TollSetLevel::spread_only;
  int iterations = 0;
  int polish_iterations = 0;
  double residual = 0.0;
  double gap = 0.0;
  optim::SolveStatus status = optim::SolveStatus::optimal;
  bool canonicalized = false;
};

/// Minimum-norm toll with the same Gamma tau: the objective and the
/// constraints only see Gamma tau, whose level sets are tau + range(R^T).
inline Vector canonical_toll(const KktBlocks& b, const Vector& tau) {
  const Eigen::Index k = b.R.rows();
  const Vector t0 = tau.cwiseMax(0.0);
  if (k == 0) return t0;
  optim::QpProblem qp;
  qp.H = b.R * b.R.transpose();
  qp.h = b.R * t0;
  qp.A_eq = Matrix(0, k);
  qp.b_eq = Vector(0);
  qp.A_in = -b.R.transpose();
  qp.b_in = t0;
  const optim::QpSolution s = optim::solve_qp(qp, Vector::Zero(k));
  if (s.report.status != optim::SolveStatus::optimal) return t0;
  return (t0 + b.R.transpose() * s.x).cwiseMax(0.0);
}

/// Distributionally robust toll for design radius eps.
inline DesignResult solve_dro_tolls(const KktBlocks& b, const DisturbanceModel& model,
                                    double eps, const DesignOptions& opt = {}) {
  model.check(b.num_edges());
  if (!(eps >= 0.0) || !std::isfinite(eps)) {
    throw InvalidInput("solve_dro_tolls: eps must be finite and >= 0");
  }
  const EpsilonMax em = epsilon_max(b, model);
  if (eps > em.value + 1e-9) {
    std::ostringstream os;
    os.precision(12);
    os << "solve_dro_tolls: eps = " << eps << " exceeds eps_max = " << em.value
       << "; no toll guarantees full utilization";
    throw Infeasible(os.str(), em.value);
  }

  const double level = opt.toll_set == TollSetLevel::anticipated ? eps : 0.0;
  const TollPolytope poly = toll_polytope(b, model, level, false);

  optim::CompositeProblem prob;
  prob.A = b.Gamma;
  prob.c = b.c;
  prob.Q = b.Gamma;
  prob.g = b.Gamma * model.mean;
  prob.eps = eps;

  const optim::CompositeResult cr =
      optim::solve_composite(prob, poly.polyhedron(), opt.solver, em.certificate);
  if (cr.report.status == optim::SolveStatus::infeasible) {
    throw Infeasible("solve_dro_tolls: toll polytope is empty", em.value);
  }
  if (cr.report.status != optim::SolveStatus::optimal &&
      !(cr.report.gap <= 1e-6 * (1.0 + std::abs(cr.objective)))) {
    throw NonConvergence("solve_dro_tolls: solver stopped at the iteration cap",
                         cr.report.gap);
  }

  DesignResult r;
  r.tau_star = opt.canonicalize ? canonical_toll(b, cr.x) : cr.x;
  r.canonicalized = opt.canonicalize;
  r.eps = eps;
  r.eps_max = em.value;
  r.toll_set = opt.toll_set;
  r.objective = dro_objective(b, model, eps, r.tau_star);
  r.worst_case_expected_latency = worst_case_expected_latency(b, model, eps, r.tau_star);
  r.iterations = cr.report.iterations;
  r.polish_iterations = cr.polish_iterations;
  const Vector viol = (b.Gamma * r.tau_star - poly.rhs).cwiseMax(0.0);
  r.residual = std::max(viol.size() ? viol.maxCoeff() : 0.0,
                        r.tau_star.size() ? (-r.tau_star).cwiseMax(0.0).maxCoeff() : 0.0);
  r.gap = cr.report.gap;
  r.status = cr.report.status;
  if (r.residual > opt.feasibility_tol) {
    throw NonConvergence("solve_dro_tolls: toll violates the polytope", r.residual);
  }
  return r;
}

/// Design that ignores distributional shift (eps = 0).
inline DesignResult nominal_tolls(const KktBlocks& b, const DisturbanceModel& model,
                                  const DesignOptions& opt = {}) {
  return solve_dro_tolls(b, model, 0.0, opt);
}

}  // namespace drtoll
