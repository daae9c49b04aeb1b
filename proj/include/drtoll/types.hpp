#pragma once

#include <Eigen/Dense>

namespace drtoll {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Largest problem size (number of edges) the dense kernels are meant for.
inline constexpr Eigen::Index kMaxDenseDimension = 512;

}  // namespace drtoll
