#pragma once

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "drtoll/error.hpp"
#include "drtoll/types.hpp"

namespace drtoll::optim {

/// Relative tolerance used when clamping slightly negative eigenvalues.
inline constexpr double kPsdRelTol = 1e-10;

inline bool is_symmetric(const Matrix& m, double rel_tol = 1e-10) {
  if (m.rows() != m.cols()) return false;
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  return (m - m.transpose()).cwiseAbs().maxCoeff() <= rel_tol * scale;
}

/// (M + M^T) / 2. Safe when the result is assigned back to `m`; the
/// in-place expression would alias.
inline Matrix symmetrized(const Matrix& m) {
  const Matrix t = m.transpose();
  return 0.5 * (m + t);
}

/// Largest absolute eigenvalue of a symmetric matrix.
inline double spectral_norm(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  if (!is_symmetric(m)) {
    throw InvalidInput("spectral_norm: matrix is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

/// Eigendecomposition of a symmetric matrix whose negative eigenvalues are
/// within kPsdRelTol * ||M||_2 of zero; those are clamped to zero.
struct PsdEigen {
  Vector values;
  Matrix vectors;
};

inline PsdEigen psd_eigen(const Matrix& m, const char* who) {
  if (!is_symmetric(m)) {
    std::ostringstream os;
    os << who << ": matrix is not symmetric";
    throw InvalidInput(os.str());
  }
  const Matrix sym = symmetrized(m);
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym);
  Vector values = es.eigenvalues();
  const double norm = values.size() ? values.cwiseAbs().maxCoeff() : 0.0;
  const double floor = -kPsdRelTol * norm;
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    if (values[i] < floor) {
      std::ostringstream os;
      os << who << ": matrix is indefinite (eigenvalue " << values[i]
         << ", norm " << norm << ")";
      throw InvalidInput(os.str());
    }
    values[i] = std::max(values[i], 0.0);
  }
  return {values, es.eigenvectors()};
}

/// Symmetric projection onto the PSD cone for nearly-PSD input.
inline Matrix clamp_psd(const Matrix& m) {
  if (m.size() == 0) return m;
  const PsdEigen e = psd_eigen(m, "clamp_psd");
  return e.vectors * e.values.asDiagonal() * e.vectors.transpose();
}

/// Unique PSD square root via the symmetric eigendecomposition.
inline Matrix psd_sqrt(const Matrix& m) {
  if (m.size() == 0) return m;
  const PsdEigen e = psd_eigen(m, "psd_sqrt");
  const Vector roots = e.values.cwiseSqrt();
  return e.vectors * roots.asDiagonal() * e.vectors.transpose();
}

}  // namespace drtoll::optim
