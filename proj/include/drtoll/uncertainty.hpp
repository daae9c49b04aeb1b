#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "drtoll/equilibrium.hpp"
#include "drtoll/error.hpp"
#include "drtoll/optim/linalg.hpp"
#include "drtoll/rng.hpp"
#include "drtoll/types.hpp"

namespace drtoll {

/// Observed (flow, latency) pairs, one per record.
struct SampleSet {
  std::vector<Vector> flows;
  std::vector<Vector> latencies;

  std::size_t size() const { return flows.size(); }
};

/// Nominal disturbance model: empirical mean and covariance plus the support
/// radius delta of the bounded-support class.
struct DisturbanceModel {
  Vector mean;
  Matrix cov;
  double support_radius = 0.0;

  void check(Eigen::Index num_edges) const {
    if (mean.size() != num_edges || cov.rows() != num_edges || cov.cols() != num_edges) {
      throw InvalidInput("disturbance model: mean/cov must match the edge count " +
                         std::to_string(num_edges));
    }
    if (!(std::isfinite(support_radius) && support_radius >= 0.0)) {
      throw InvalidInput("disturbance model: support radius must be >= 0");
    }
  }
};

struct GelbrichPoint {
  Vector mean;
  Matrix cov;
};

/// Residual mean and 1/N covariance of observed minus modelled latency.
inline DisturbanceModel estimate_nominal(const SampleSet& samples,
                                         const LatencyModel& lat, double delta) {
  const std::size_t n = samples.size();
  if (n < 2 || samples.latencies.size() != n) {
    throw InsufficientData("estimate_nominal: need at least 2 records, got " +
                           std::to_string(n));
  }
  if (!(delta >= 0.0)) throw InvalidInput("estimate_nominal: delta must be >= 0");
  const Eigen::Index m = lat.beta.size();
  std::vector<Vector> resid;
  resid.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (samples.flows[i].size() != m || samples.latencies[i].size() != m) {
      throw InvalidInput("estimate_nominal: record " + std::to_string(i) +
                         " has the wrong dimension");
    }
    resid.push_back(samples.latencies[i] - lat.beta.cwiseProduct(samples.flows[i]));
  }
  DisturbanceModel model;
  model.mean = Vector::Zero(m);
  for (const auto& r : resid) model.mean += r;
  model.mean /= static_cast<double>(n);
  model.cov = Matrix::Zero(m, m);
  for (const auto& r : resid) {
    const Vector d = r - model.mean;
    model.cov += d * d.transpose();
  }
  model.cov /= static_cast<double>(n);
  model.cov = optim::clamp_psd(model.cov);
  model.support_radius = delta;
  return model;
}

/// sqrt(||m_a - m_b||^2 + tr(S_a + S_b - 2 (S_b^1/2 S_a S_b^1/2)^1/2)).
inline double gelbrich_distance(const GelbrichPoint& a, const GelbrichPoint& b) {
  const Eigen::Index m = a.mean.size();
  if (b.mean.size() != m || a.cov.rows() != m || a.cov.cols() != m ||
      b.cov.rows() != m || b.cov.cols() != m) {
    throw InvalidInput("gelbrich_distance: dimension mismatch");
  }
  const Matrix ca = optim::clamp_psd(a.cov);
  const Matrix cb = optim::clamp_psd(b.cov);
  const Matrix rb = optim::psd_sqrt(cb);
  const Matrix cross = optim::psd_sqrt(optim::symmetrized(rb * ca * rb));
  const double trace_term = std::max(0.0, ca.trace() + cb.trace() - 2.0 * cross.trace());
  return std::sqrt((a.mean - b.mean).squaredNorm() + trace_term);
}

inline bool in_gelbrich_ball(const GelbrichPoint& p, const DisturbanceModel& model,
                             double eps) {
  return gelbrich_distance(p, {model.mean, model.cov}) <= eps + 1e-12;
}

struct WorstCaseShift {
  Vector mean;
  /// True when q(tau) vanishes and every direction is worst-case.
  bool degenerate = false;
};

/// Mean of the latency-maximizing distribution in the ambiguity set:
/// theta_hat + eps * q(tau) / ||q(tau)||.
inline WorstCaseShift worst_case_mean(const KktBlocks& b, const Vector& tau,
                                      const DisturbanceModel& model, double eps) {
  if (!(eps >= 0.0)) throw InvalidInput("worst_case_mean: eps must be >= 0");
  model.check(b.num_edges());
  const Vector q = latency_decomposition(b, tau).q;
  const double nq = q.norm();
  if (nq < 1e-12) return {model.mean, true};
  return {model.mean + (eps / nq) * q, false};
}

/// One draw from the uniform law on the ball, taken from the sub-stream keyed
/// by `index`; draws are independent of how many others are generated.
inline Vector uniform_ball_draw(const Vector& center, double radius,
                                std::uint64_t seed, std::uint64_t index) {
  const Eigen::Index n = center.size();
  if (radius == 0.0 || n == 0) return center;
  Stream rng(derive_seed(seed, {index}));
  Vector dir(n);
  double norm = 0.0;
  do {
    for (Eigen::Index i = 0; i < n; ++i) dir[i] = rng.normal();
    norm = dir.norm();
  } while (norm < 1e-300);
  const double r = radius * std::pow(rng.uniform(), 1.0 / static_cast<double>(n));
  return center + (r / norm) * dir;
}

inline std::vector<Vector> sample_uniform_ball(const Vector& center, double radius,
                                               std::size_t count, std::uint64_t seed) {
  if (!(radius >= 0.0)) throw InvalidInput("sample_uniform_ball: radius must be >= 0");
  if (count < 1) throw InvalidInput("sample_uniform_ball: count must be >= 1");
  std::vector<Vector> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    out.push_back(uniform_ball_draw(center, radius, seed, i));
  }
  return out;
}

/// True iff every sample lies within delta + tol of mean (vacuous if empty).
inline bool support_check(const std::vector<Vector>& samples, const Vector& mean,
                          double delta, double tol) {
  return std::all_of(samples.begin(), samples.end(), [&](const Vector& s) {
    return s.size() == mean.size() && (s - mean).norm() <= delta + tol;
  });
}

}  // namespace drtoll
