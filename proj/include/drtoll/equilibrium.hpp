#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>

#include <Eigen/Cholesky>

#include "drtoll/error.hpp"
#include "drtoll/network.hpp"
#include "drtoll/optim/linalg.hpp"
#include "drtoll/optim/lp.hpp"
#include "drtoll/optim/qp.hpp"
#include "drtoll/types.hpp"

namespace drtoll {

/// Linear edge latencies l_e(f) = beta_e * f with every beta_e > 0.
struct LatencyModel {
  Vector beta;

  void check(Eigen::Index num_edges) const {
    if (beta.size() != num_edges) {
      throw InvalidInput("latency model: expected " + std::to_string(num_edges) +
                         " slopes, got " + std::to_string(beta.size()));
    }
    for (Eigen::Index e = 0; e < beta.size(); ++e) {
      if (!(std::isfinite(beta[e]) && beta[e] > 0.0)) {
        throw InvalidInput("latency model: slopes must be positive and finite");
      }
    }
  }
};

/// Blocks of the inverse KKT matrix [B R^T; R 0]^-1 = [Gamma Lambda; Lambda^T -S]
/// together with the data they were built from.
struct KktBlocks {
  Matrix Gamma;   // B^-1 - B^-1 R^T S R B^-1
  Matrix Lambda;  // B^-1 R^T S
  Matrix S;       // (R B^-1 R^T)^-1
  double gamma_norm = 0.0;
  Vector c;       // Lambda * eta: equilibrium flow at zero disturbance and toll
  Matrix R;
  Vector eta;
  Vector beta;

  Eigen::Index num_edges() const { return Gamma.rows(); }

  /// The full (|E| + |V| - 1) square inverse, assembled from the blocks.
  Matrix inverse() const {
    const Eigen::Index m = Gamma.rows();
    const Eigen::Index k = S.rows();
    Matrix out(m + k, m + k);
    out << Gamma, Lambda, Lambda.transpose(), -S;
    return out;
  }

  Matrix kkt_matrix() const {
    const Eigen::Index m = Gamma.rows();
    const Eigen::Index k = S.rows();
    Matrix out = Matrix::Zero(m + k, m + k);
    out.topLeftCorner(m, m) = beta.asDiagonal();
    out.topRightCorner(m, k) = R.transpose();
    out.bottomLeftCorner(k, m) = R;
    return out;
  }
};

inline KktBlocks kkt_blocks(const IncidenceData& inc, const LatencyModel& lat) {
  const Eigen::Index m = inc.num_edges();
  lat.check(m);
  if (inc.eta.size() != inc.R.rows()) {
    throw InvalidInput("kkt_blocks: eta does not match R");
  }
  if (m > kMaxDenseDimension) {
    throw InvalidInput("kkt_blocks: network exceeds the dense envelope");
  }
  const Vector binv = lat.beta.cwiseInverse();
  const Matrix RBinv = inc.R * binv.asDiagonal();
  const Matrix M = RBinv * inc.R.transpose();

  if (incidence_rank(inc) < inc.R.rows()) {
    throw NumericalDegeneracy("kkt_blocks: incidence matrix is rank deficient");
  }
  const Eigen::LLT<Matrix> llt(M);
  if (llt.info() != Eigen::Success) {
    throw NumericalDegeneracy("kkt_blocks: R B^-1 R^T is not positive definite");
  }

  KktBlocks k;
  k.S = llt.solve(Matrix::Identity(M.rows(), M.cols()));
  k.S = optim::symmetrized(k.S);
  k.Lambda = RBinv.transpose() * k.S;
  k.Gamma = Matrix(binv.asDiagonal()) - k.Lambda * RBinv;
  k.Gamma = optim::symmetrized(k.Gamma);
  k.gamma_norm = optim::spectral_norm(k.Gamma);
  // Every edge on a single path: Gamma vanishes and only roundoff is left.
  if (k.gamma_norm <= 1e-12 * binv.maxCoeff()) {
    k.Gamma.setZero();
    k.gamma_norm = 0.0;
  }
  k.c = k.Lambda * inc.eta;
  k.R = inc.R;
  k.eta = inc.eta;
  k.beta = lat.beta;
  return k;
}

enum class SolutionMethod { closed_form, potential_oracle };

inline const char* to_string(SolutionMethod m) {
  return m == SolutionMethod::closed_form ? "closed_form" : "potential_oracle";
}

struct NashSolution {
  Vector flow;
  Vector node_potentials;  // multipliers of R f = eta
  SolutionMethod source_method = SolutionMethod::closed_form;
  double kkt_residual = 0.0;
  int iterations = 0;
};

namespace detail {

inline void check_dims(Eigen::Index m, const Vector& alpha, const Vector& tau,
                       const char* who) {
  if (alpha.size() != m || tau.size() != m) {
    throw InvalidInput(std::string(who) + ": alpha and tau must have one entry per edge");
  }
}

inline double regime_tol(const KktBlocks& b) {
  return 1e-9 * (1.0 + (b.eta.size() ? b.eta.cwiseAbs().maxCoeff() : 0.0));
}

}  // namespace detail

/// Affine equilibrium flow -Gamma (alpha + tau) + c, valid while it stays
/// nonnegative. Throws OutOfRegime otherwise.
inline NashSolution nash_flow_closed_form(const KktBlocks& b, const Vector& alpha,
                                          const Vector& tau) {
  detail::check_dims(b.num_edges(), alpha, tau, "nash_flow_closed_form");
  const Vector load = alpha + tau;
  NashSolution sol;
  sol.flow = -b.Gamma * load + b.c;
  sol.node_potentials = -b.Lambda.transpose() * load - b.S * b.eta;
  sol.source_method = SolutionMethod::closed_form;
  const double min_flow = sol.flow.size() ? sol.flow.minCoeff() : 0.0;
  if (min_flow < -detail::regime_tol(b)) {
    throw OutOfRegime(
        "closed-form equilibrium has a negative edge flow (" +
            std::to_string(min_flow) +
            "); the affine formula does not apply, use the potential method",
        min_flow);
  }
  return sol;
}

/// Minimizes the Rosenthal potential sum_e (beta_e f_e^2 / 2 + (alpha_e +
/// tau_e) f_e) over feasible flows with an active-set QP. Works for any
/// disturbance and toll.
inline NashSolution nash_flow_potential(const IncidenceData& inc,
                                        const LatencyModel& lat,
                                        const Vector& alpha, const Vector& tau,
                                        const std::optional<Vector>& warm_start = {}) {
  const Eigen::Index m = inc.num_edges();
  lat.check(m);
  detail::check_dims(m, alpha, tau, "nash_flow_potential");

  optim::QpProblem qp;
  qp.H = lat.beta.asDiagonal();
  qp.h = alpha + tau;
  qp.A_eq = inc.R;
  qp.b_eq = inc.eta;
  qp.A_in = -Matrix::Identity(m, m);
  qp.b_in = Vector::Zero(m);

  Vector x0;
  if (warm_start && warm_start->size() == m && is_feasible_flow(inc, *warm_start, 1e-12)) {
    x0 = warm_start->cwiseMax(0.0);
  } else {
    Matrix A(2 * inc.R.rows(), m);
    A << inc.R, -inc.R;
    Vector bb(2 * inc.R.rows());
    bb << inc.eta, -inc.eta;
    const optim::LpSolution ph1 = optim::find_feasible_point(A, bb);
    if (ph1.report.status != optim::SolveStatus::optimal) {
      throw InvalidInput("nash_flow_potential: no feasible flow exists");
    }
    x0 = ph1.x;
  }

  optim::QpOptions opt;
  opt.max_iterations = static_cast<int>(10 * m + 20);
  const optim::QpSolution s = optim::solve_qp(qp, x0, opt);
  const double scale = 1.0 + qp.h.cwiseAbs().maxCoeff() +
                       (inc.eta.size() ? inc.eta.cwiseAbs().maxCoeff() : 0.0);
  if (s.report.status != optim::SolveStatus::optimal || s.kkt_residual > 1e-8 * scale) {
    throw NonConvergence("nash_flow_potential: active-set solve did not converge",
                         s.kkt_residual);
  }
  NashSolution sol;
  sol.flow = s.x;
  sol.node_potentials = s.eq_multipliers;
  sol.source_method = SolutionMethod::potential_oracle;
  sol.kkt_residual = s.kkt_residual;
  sol.iterations = s.report.iterations;
  return sol;
}

/// L(f; alpha) = sum_e f_e (beta_e f_e + alpha_e). Tolls are transfers and
/// do not appear.
inline double system_latency(const Vector& f, const LatencyModel& lat,
                             const Vector& alpha) {
  if (f.size() != lat.beta.size() || alpha.size() != f.size()) {
    throw InvalidInput("system_latency: dimension mismatch");
  }
  return f.dot(lat.beta.cwiseProduct(f) + alpha);
}

/// g(alpha, tau) = q^T alpha + q0 with q = Gamma tau + c and
/// q0 = tau^T Gamma tau + eta^T S eta.
struct LatencyDecomposition {
  Vector q;
  double q0 = 0.0;

  double at(const Vector& alpha) const { return q.dot(alpha) + q0; }
};

inline LatencyDecomposition latency_decomposition(const KktBlocks& b,
                                                  const Vector& tau) {
  if (tau.size() != b.num_edges()) {
    throw InvalidInput("latency_decomposition: tau has wrong dimension");
  }
  const Vector gt = b.Gamma * tau;
  return {gt + b.c, tau.dot(gt) + b.eta.dot(b.S * b.eta)};
}

/// Equilibrium system latency through the block-inverse quadratic form
/// [tau; eta]^T K^-1 [alpha + tau; -eta]. Throws OutOfRegime when the implied
/// closed-form flow is negative.
inline double equilibrium_latency_g(const KktBlocks& b, const Vector& alpha,
                                    const Vector& tau) {
  (void)nash_flow_closed_form(b, alpha, tau);
  const Vector load = alpha + tau;
  const Vector top = b.Gamma * load - b.Lambda * b.eta;
  const Vector bottom = b.Lambda.transpose() * load + b.S * b.eta;
  return tau.dot(top) + b.eta.dot(bottom);
}

}  // namespace drtoll
