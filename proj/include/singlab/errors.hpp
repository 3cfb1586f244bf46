#pragma once

#include <stdexcept>
#include <string>

namespace singlab {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A computation refused because a size guard (enumeration, table, etc.) was exceeded.
class GuardRefusal : public Error {
 public:
  using Error::Error;
};

/// The requested evidence engine does not support this model.
class UnsupportedEngine : public Error {
 public:
  using Error::Error;
};

/// Parameters on the boundary where scores or Fisher matrices are undefined.
class SingularPointError : public Error {
 public:
  using Error::Error;
};

/// The observable Fisher matrix is numerically singular.
class RegularityError : public Error {
 public:
  using Error::Error;
};

/// Analytic and finite-difference scores disagree.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Invalid or inconsistent experiment configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Adaptive quadrature hit its refinement budget before reaching the tolerance.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double best_estimate, double err_est)
      : Error(what), best_estimate_(best_estimate), err_est_(err_est) {}

  double best_estimate() const { return best_estimate_; }
  double err_est() const { return err_est_; }

 private:
  double best_estimate_;
  double err_est_;
};

}  // namespace singlab
