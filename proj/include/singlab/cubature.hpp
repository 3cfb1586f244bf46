#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <vector>

#include "singlab/data.hpp"
#include "singlab/model.hpp"
#include "singlab/regions.hpp"

namespace singlab {

/// One prior coordinate, reparametrised so the prior density times the Jacobian is
/// bounded. Beta(p, q) axes are split at x = 1/2; a half whose exponent is below one
/// is mapped by x = u^(1/p)/2 (resp. 1 - (2-u)^(1/q)/2), which removes the
/// endpoint singularity of the density.
class ParameterAxis {
 public:
  static ParameterAxis beta(double p, double q);
  /// N(0, scale^2) truncated and renormalised to [-bound, bound].
  static ParameterAxis truncated_normal(double scale, double bound);

  double u_lo() const { return u_lo_; }
  double u_hi() const { return u_hi_; }
  double to_x(double u) const;
  double to_u(double x) const;
  /// log prior density at x(u) plus log |dx/du|.
  double log_weight(double u) const;
  double log_density(double x) const;
  /// Breakpoints every partition must contain.
  std::vector<double> natural_breaks() const;

 private:
  enum class Kind { beta, normal };
  Kind kind_ = Kind::beta;
  double p_ = 1.0, q_ = 1.0;    // beta shapes
  double pw_ = 1.0, qw_ = 1.0;  // warping exponents (min(shape, 1))
  double log_norm_ = 0.0;
  double scale_ = 1.0, bound_ = 1.0;
  double u_lo_ = 0.0, u_hi_ = 2.0;
};

/// Settings of the adaptive tensor-product Gauss-Legendre engine.
struct QuadConfig {
  double tol = 1e-6;            // target relative error of Z (= absolute error of log Z)
  int order = 5;                // Gauss-Legendre nodes per axis per cell
  int init_a = 8;               // initial subdivisions of the weight axis
  int init_b = 16;              // initial subdivisions of each component axis
  std::size_t max_cells = 400000;
};

/// Integral of the two-component posterior kernel over the prior box.
struct CubatureResult {
  double log_z = 0.0;
  double err_est = 0.0;             // relative error estimate of Z
  std::array<double, 8> atoms{};    // posterior mass per region-membership pattern
  std::size_t cells = 0;
  std::size_t evaluations = 0;
};

/// Adaptive cubature of prod_i p(x_i|a,b1,b2) phi(a,b1,b2) for K = 2. Cells are
/// bisected along every axis (dyadic refinement) where the difference between a
/// cell's own rule and the sum over its eight children is largest, until the summed
/// differences fall below tol. When `regions` is given their edges are partition
/// breakpoints, so every cell lies entirely inside or outside each region.
CubatureResult integrate_two_component(const Dataset& data, const MixtureSpec& spec, const QuadConfig& config,
                                       const std::optional<RegionSet>& regions);

/// Axes of the (a, b1, b2) parametrisation for a spec.
std::array<ParameterAxis, 3> parameter_axes(const MixtureSpec& spec);

}  // namespace singlab
