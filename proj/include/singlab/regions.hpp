#pragma once

#include <array>

namespace singlab {

/// Axis-aligned neighbourhoods of the three branches of the true-parameter set of a
/// two-component learner fitted to a one-component truth, in coordinates (a, b1, b2)
/// with a the weight of component 1:
///   W1 = {|a - 1| <= da, |b1 - b*| <= db}
///   W2 = {|b1 - b*| <= db, |b2 - b*| <= db}
///   W3 = {a <= da, |b2 - b*| <= db}
/// The boxes overlap; intersections are reported separately.
struct RegionSet {
  double delta_a = 0.1;
  double delta_b = 0.1;
  double bstar = 0.5;

  void validate() const;

  bool in_w1(double a, double b1, double b2) const;
  bool in_w2(double a, double b1, double b2) const;
  bool in_w3(double a, double b1, double b2) const;
  /// bit 0: W1, bit 1: W2, bit 2: W3.
  unsigned membership(double a, double b1, double b2) const;
};

/// Posterior masses of the regions, their pairwise intersections and the complement.
struct RegionMasses {
  double w1 = 0.0;
  double w2 = 0.0;
  double w3 = 0.0;
  double w12 = 0.0;
  double w13 = 0.0;
  double w23 = 0.0;
  double w123 = 0.0;
  double rest = 0.0;
  double err_est = 0.0;

  double union_w1_w3() const { return w1 + w3 - w13; }
  double union_all() const { return w1 + w2 + w3 - w12 - w13 - w23 + w123; }

  /// Builds the reported masses from the eight membership atoms (indexed by bitmask).
  static RegionMasses from_atoms(const std::array<double, 8>& atoms, double err_est);
};

}  // namespace singlab
