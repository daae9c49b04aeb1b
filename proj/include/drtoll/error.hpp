#pragma once

#include <limits>
#include <stdexcept>
#include <string>

namespace drtoll {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or out-of-contract input (dimension mismatch, bad network...).
class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// A matrix that should be invertible (e.g. R B^-1 R^T) is not.
class NumericalDegeneracy : public Error {
 public:
  using Error::Error;
};

/// The closed-form equilibrium produced a negative edge flow.
class OutOfRegime : public Error {
 public:
  OutOfRegime(const std::string& what, double min_flow)
      : Error(what), min_flow_(min_flow) {}
  double min_flow() const noexcept { return min_flow_; }

 private:
  double min_flow_;
};

/// An iterative solver hit its iteration cap.
class NonConvergence : public Error {
 public:
  NonConvergence(const std::string& what, double residual)
      : Error(what), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

/// Empty feasible set. Carries the robustness bound when one is known.
class Infeasible : public Error {
 public:
  explicit Infeasible(const std::string& what,
                      double eps_max = std::numeric_limits<double>::quiet_NaN())
      : Error(what), eps_max_(eps_max) {}
  double eps_max() const noexcept { return eps_max_; }

 private:
  double eps_max_;
};

class TooManyPaths : public Error {
 public:
  TooManyPaths(const std::string& what, std::size_t cap)
      : Error(what), cap_(cap) {}
  std::size_t cap() const noexcept { return cap_; }

 private:
  std::size_t cap_;
};

class InsufficientData : public Error {
 public:
  using Error::Error;
};

/// Unreadable or ill-formed input file.
class ParseError : public Error {
 public:
  using Error::Error;
};

}  // namespace drtoll
