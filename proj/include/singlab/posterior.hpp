#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "singlab/cubature.hpp"
#include "singlab/data.hpp"
#include "singlab/energy.hpp"
#include "singlab/latenterr.hpp"
#include "singlab/model.hpp"
#include "singlab/regions.hpp"

namespace singlab {

struct GridConfig {
  int panels_a = 20;  // composite panels on the weight axis before refinement
  int panels_b = 20;  // ... on each component axis
  int order = 5;      // Gauss-Legendre nodes per panel
  int refine_levels = 2;  // dyadic refinement of panels inside the region boxes
  std::optional<RegionSet> regions;
};

/// Posterior over (a, b1, b2) tabulated on a tensor product of composite
/// Gauss-Legendre nodes; `mass` sums to one.
struct GridPosterior {
  std::array<std::vector<double>, 3> nodes;    // parameter values per axis
  std::array<std::vector<double>, 3> weights;  // quadrature weights in parameter units
  std::vector<double> mass;                    // row-major (a, b1, b2)
  double log_z = 0.0;
  double err_est = 0.0;  // relative change of Z against a lower-order rule on the same panels
  std::vector<std::string> warnings;

  std::size_t index(std::size_t i, std::size_t j, std::size_t k) const {
    return (i * nodes[1].size() + j) * nodes[2].size() + k;
  }
  /// Posterior density (mass / product of weights) at a node.
  double density(std::size_t i, std::size_t j, std::size_t k) const;
  /// Marginal density of axis d at its nodes.
  std::vector<double> marginal_density(int d) const;
  std::array<double, 3> mean() const;
  std::array<double, 3> sd() const;
};

GridPosterior grid_posterior(const Dataset& data, const MixtureSpec& spec, const GridConfig& config = {});

RegionMasses grid_region_masses(const GridPosterior& grid, const RegionSet& regions);

struct MassPoint {
  std::int64_t n = 0;
  std::vector<RegionMasses> replicates;
  RegionMasses mean;  // err_est holds the largest replicate error
};

struct MassCurve {
  MixtureSpec spec;
  TrueModel truth;
  RegionSet regions;
  RunSettings settings;
  std::vector<MassPoint> points;
  std::vector<std::string> errors;

  std::vector<double> union_w1_w3() const;
  std::vector<double> w2() const;
  std::vector<double> rest() const;
};

/// Region masses from the adaptive cubature, averaged over replicates.
MassCurve mass_curve(const MixtureSpec& spec, const TrueModel& truth, const std::vector<std::int64_t>& n_grid, int R,
                     const RegionSet& regions, const RunSettings& settings);

/// True when the sequence is monotone in one direction apart from at most
/// `allowed` adjacent steps against that direction.
bool monotone_trend(const std::vector<double>& values, int allowed = 1);
bool increasing_trend(const std::vector<double>& values, int allowed = 1);

/// Family whose mass exceeds 1/2 at the largest n and did not decrease across the grid.
Phase detect_phase(const MassCurve& curve);

}  // namespace singlab
