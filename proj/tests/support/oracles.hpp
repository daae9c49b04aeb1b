#pragma once

// Reference computations for the tests. Each one reaches its answer by a
// route that shares no solver code with the library under test.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "drtoll/drtoll.hpp"

namespace oracle {

using drtoll::Matrix;
using drtoll::Vector;

#ifndef DRTOLL_TEST_DATA_DIR
#define DRTOLL_TEST_DATA_DIR "data"
#endif

inline std::string data_path(const std::string& name) {
  return std::string(DRTOLL_TEST_DATA_DIR) + "/" + name;
}

/// Full KKT matrix [[B, R^T], [R, 0]] inverted by LU.
inline Matrix dense_kkt_inverse(const Matrix& R, const Vector& beta) {
  const Eigen::Index m = beta.size();
  const Eigen::Index k = R.rows();
  Matrix K = Matrix::Zero(m + k, m + k);
  K.topLeftCorner(m, m) = beta.asDiagonal();
  K.topRightCorner(m, k) = R.transpose();
  K.bottomLeftCorner(k, m) = R;
  return K.fullPivLu().inverse();
}

/// Solves B f + alpha + tau + R^T nu = 0, R f = eta directly.
inline std::pair<Vector, Vector> kkt_solve(const Matrix& R, const Vector& beta,
                                           const Vector& eta, const Vector& load) {
  const Eigen::Index m = beta.size();
  const Eigen::Index k = R.rows();
  Matrix K = Matrix::Zero(m + k, m + k);
  K.topLeftCorner(m, m) = beta.asDiagonal();
  K.topRightCorner(m, k) = R.transpose();
  K.bottomLeftCorner(k, m) = R;
  Vector rhs(m + k);
  rhs << -load, eta;
  const Vector sol = K.fullPivLu().solve(rhs);
  return {sol.head(m), sol.tail(k)};
}

/// Wardrop check on a DAG by dynamic programming: every edge carrying flow
/// lies on a cheapest source-destination path under cost beta f + alpha + tau.
inline double wardrop_violation(const drtoll::Network& net, const Vector& cost,
                                const Vector& flow, double flow_tol) {
  const std::size_t n = static_cast<std::size_t>(net.num_nodes());
  const double inf = std::numeric_limits<double>::infinity();
  // Node order: repeated relaxation is fine for the small graphs used here.
  std::vector<double> from_s(n, inf), to_d(n, inf);
  from_s[static_cast<std::size_t>(net.source)] = 0.0;
  to_d[static_cast<std::size_t>(net.destination)] = 0.0;
  for (std::size_t pass = 0; pass < n; ++pass) {
    for (std::size_t k = 0; k < net.edges.size(); ++k) {
      const auto& e = net.edges[k];
      const auto t = static_cast<std::size_t>(e.tail);
      const auto h = static_cast<std::size_t>(e.head);
      const double c = cost[static_cast<Eigen::Index>(k)];
      from_s[h] = std::min(from_s[h], from_s[t] + c);
      to_d[t] = std::min(to_d[t], c + to_d[h]);
    }
  }
  const double best = to_d[static_cast<std::size_t>(net.source)];
  double worst = 0.0;
  for (std::size_t k = 0; k < net.edges.size(); ++k) {
    if (flow[static_cast<Eigen::Index>(k)] <= flow_tol) continue;
    const auto& e = net.edges[k];
    const double through = from_s[static_cast<std::size_t>(e.tail)] +
                           cost[static_cast<Eigen::Index>(k)] +
                           to_d[static_cast<std::size_t>(e.head)];
    worst = std::max(worst, through - best);
  }
  return worst;
}

/// Golden-section minimization of a unimodal function on [lo, hi].
inline double golden_section(const std::function<double(double)>& f, double lo, double hi,
                             int iterations = 200) {
  const double r = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double x1 = b - r * (b - a), x2 = a + r * (b - a);
  double f1 = f(x1), f2 = f(x2);
  for (int i = 0; i < iterations && b - a > 1e-13 * (1.0 + std::abs(a) + std::abs(b)); ++i) {
    if (f1 <= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - r * (b - a);
      f1 = f(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + r * (b - a);
      f2 = f(x2);
    }
  }
  const double x = 0.5 * (a + b);
  // The endpoints may be better for monotone objectives.
  double best = x;
  for (const double c : {lo, hi}) {
    if (f(c) < f(best)) best = c;
  }
  return best;
}

/// Two parallel edges: everything is a function of d = tau_1 - tau_2.
struct TwoEdge {
  double b1, b2, eta;
  Vector theta;  // nominal mean
  double delta;

  double a() const { return 1.0 / (b1 + b2); }
  Vector c() const { return Vector{{eta * b2 * a(), eta * b1 * a()}}; }
  double gamma_norm() const { return 2.0 * a(); }

  Vector q(double d) const { return a() * d * Vector{{1.0, -1.0}} + c(); }

  double objective(double eps, double d) const {
    return eps * q(d).norm() + a() * d * d + a() * d * (theta[0] - theta[1]);
  }

  /// Range of d allowed by the constraint set at tightening level `level`.
  std::pair<double, double> range(double level) const {
    const double shift = gamma_norm() * (level + delta);
    const double g = a() * (theta[0] - theta[1]);
    const double r1 = -shift - g + c()[0];
    const double r2 = -shift + g + c()[1];
    return {-r2 / a(), r1 / a()};
  }

  /// Largest level at which the range is nonempty.
  double eps_max() const {
    // r1 + r2 = c1 + c2 - 2 shift = eta - 2 gamma_norm (level + delta) >= 0
    return eta / (2.0 * gamma_norm()) - delta;
  }

  double optimal_d(double eps, double level) const {
    const auto [lo, hi] = range(level);
    return golden_section([&](double d) { return objective(eps, d); }, lo, hi);
  }

  drtoll::Network network() const {
    return drtoll::make_network(2, {{1, 2}, {1, 2}}, eta);
  }
  drtoll::LatencyModel latency() const { return {Vector{{b1, b2}}}; }
  drtoll::DisturbanceModel model() const { return {theta, Matrix::Zero(2, 2), delta}; }
};

/// Euclidean projection onto {x in R^2 : x >= 0, G x <= h} by enumerating
/// the candidate faces and vertices of the polygon.
inline Vector project_2d(const Vector& x, const Matrix& G, const Vector& h) {
  Matrix A(G.rows() + 2, 2);
  Vector b(G.rows() + 2);
  A << -Matrix::Identity(2, 2), G;
  b << 0.0, 0.0, h;
  auto feasible = [&](const Vector& p) {
    return ((A * p - b).array() <= 1e-9 * (1.0 + b.cwiseAbs().maxCoeff())).all();
  };
  std::vector<Vector> cands;
  cands.push_back(x);
  for (Eigen::Index i = 0; i < A.rows(); ++i) {
    const Vector a = A.row(i).transpose();
    const double nn = a.squaredNorm();
    if (nn < 1e-14) continue;
    cands.push_back(x - ((a.dot(x) - b[i]) / nn) * a);
    for (Eigen::Index j = i + 1; j < A.rows(); ++j) {
      Eigen::Matrix2d M;
      M.row(0) = A.row(i);
      M.row(1) = A.row(j);
      if (std::abs(M.determinant()) < 1e-12) continue;
      cands.push_back(M.inverse() * Eigen::Vector2d(b[i], b[j]));
    }
  }
  Vector best;
  double dist = std::numeric_limits<double>::infinity();
  for (const auto& p : cands) {
    if (!feasible(p)) continue;
    const double d = (p - x).norm();
    if (d < dist) {
      dist = d;
      best = p;
    }
  }
  return best;
}

/// Gelbrich distance for diagonal covariances.
inline double gelbrich_diagonal(const Vector& m1, const Vector& d1, const Vector& m2,
                                const Vector& d2) {
  double t = 0.0;
  for (Eigen::Index i = 0; i < d1.size(); ++i) {
    const double s = std::sqrt(d1[i]) - std::sqrt(d2[i]);
    t += s * s;
  }
  return std::sqrt((m1 - m2).squaredNorm() + t);
}

/// Randomized single-OD instance with a known interior equilibrium.
struct Instance {
  drtoll::Network net;
  drtoll::LatencyModel lat;
  drtoll::DisturbanceModel model;
  Vector f0;    // equilibrium flow at alpha = theta_hat, tau = tau0
  Vector tau0;  // nonnegative toll producing f0
  double budget = 0.0;  // eps + delta keeping every flow positive
};

/// Backbone path 1 -> ... -> n plus random forward chords. Every edge lies on
/// a source-destination path, so a positive path decomposition exists; the
/// toll tau0 = -B f0 - theta + R^T v makes f0 the equilibrium, and v is
/// steep enough that tau0 >= 0.
inline Instance random_instance(std::mt19937_64& rng, int min_nodes = 2, int max_nodes = 7) {
  std::uniform_int_distribution<int> nn(min_nodes, max_nodes);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const int n = nn(rng);
  std::vector<std::pair<int, int>> pairs;
  for (int i = 1; i < n; ++i) pairs.emplace_back(i, i + 1);
  const int extra = std::uniform_int_distribution<int>(n == 2 ? 1 : 0, n + 1)(rng);
  for (int k = 0; k < extra; ++k) {
    const int i = std::uniform_int_distribution<int>(1, n - 1)(rng);
    const int j = std::uniform_int_distribution<int>(i + 1, n)(rng);
    pairs.emplace_back(i, j);
  }
  const Eigen::Index m = static_cast<Eigen::Index>(pairs.size());

  // Flow: one unit-scaled path per edge (backbone prefix, edge, backbone suffix).
  Vector f0 = Vector::Zero(m);
  double demand = 0.0;
  for (Eigen::Index k = 0; k < m; ++k) {
    const double w = 0.5 + 4.5 * u01(rng);
    demand += w;
    const auto [i, j] = pairs[static_cast<std::size_t>(k)];
    f0[k] += w;
    for (int p = 1; p < i; ++p) f0[p - 1] += w;
    for (int p = j; p < n; ++p) f0[p - 1] += w;
  }

  Instance inst;
  inst.net = drtoll::make_network(n, pairs, demand);
  inst.lat.beta = Vector(m);
  for (Eigen::Index k = 0; k < m; ++k) inst.lat.beta[k] = 0.2 + 2.8 * u01(rng);
  Vector theta(m);
  for (Eigen::Index k = 0; k < m; ++k) theta[k] = 10.0 * u01(rng);

  const Vector bf = inst.lat.beta.cwiseProduct(f0);
  const double K = 1.0 + (bf + theta).maxCoeff();
  Vector rtv(m);
  for (Eigen::Index k = 0; k < m; ++k) {
    const auto [i, j] = pairs[static_cast<std::size_t>(k)];
    rtv[k] = K * (j - i);  // v_i = K (n - i), v_n = 0
  }
  inst.tau0 = -bf - theta + rtv;
  inst.f0 = f0;

  const drtoll::KktBlocks b = drtoll::kkt_blocks(drtoll::incidence(inst.net), inst.lat);
  // A single path has Gamma = 0 and no budget limit; keep the radius modest.
  inst.budget = b.gamma_norm > 0.0 ? 0.9 * f0.minCoeff() / b.gamma_norm : f0.minCoeff();
  const double delta = inst.budget * 0.3 * u01(rng);
  inst.model = {theta, Matrix::Zero(m, m), delta};
  return inst;
}

inline Vector random_unit(std::mt19937_64& rng, Eigen::Index n) {
  std::normal_distribution<double> nd;
  Vector v(n);
  do {
    for (Eigen::Index i = 0; i < n; ++i) v[i] = nd(rng);
  } while (v.norm() < 1e-8);
  return v / v.norm();
}

inline Matrix random_psd(std::mt19937_64& rng, Eigen::Index n, Eigen::Index rank = -1) {
  std::normal_distribution<double> nd;
  const Eigen::Index r = rank < 0 ? n : rank;
  Matrix A(n, r);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < r; ++j) A(i, j) = nd(rng);
  }
  return A * A.transpose();
}

}  // namespace oracle
