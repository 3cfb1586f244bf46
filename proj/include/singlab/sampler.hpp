#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "singlab/data.hpp"
#include "singlab/evidence.hpp"
#include "singlab/model.hpp"
#include "singlab/regions.hpp"

namespace singlab {

struct ChainSettings {
  std::uint64_t iters = 200000;  // total iterations including burn-in
  std::uint64_t burnin = 20000;
  std::uint64_t thin = 10;
  std::uint64_t seed = 1;
  /// Count the kept label vectors (Gibbs only; needs K^n <= 2^20).
  bool label_histogram = false;
};

/// Kept parameter samples of a chain. Sample s has weights [s*K, (s+1)*K) and comps likewise.
struct ParamTrace {
  int components = 0;
  std::vector<std::uint64_t> iter;
  std::vector<double> weights;
  std::vector<double> comps;
  /// Counts of kept label vectors, indexed by sum_i (y_i - 1) K^i.
  std::vector<std::uint64_t> label_counts;
  ChainSettings settings;
  double acceptance_rate = 1.0;  // Metropolis chains; 1 for Gibbs

  std::size_t size() const { return iter.size(); }
  double weight(std::size_t s, int k) const { return weights[s * components + k]; }
  double comp(std::size_t s, int k) const { return comps[s * components + k]; }
  MixtureParams params(std::size_t s) const;
};

/// Alternates labels ~ p(Y | w, X) and w ~ p(w | X, Y). Components without members draw
/// their parameter from the prior. Gaussian means use the untruncated conjugate posterior.
ParamTrace gibbs_run(const Dataset& data, const MixtureSpec& spec, const ChainSettings& settings);

/// Random-walk Metropolis on p(w | X) for K = 2, in logit coordinates for the weight and
/// binomial components, with per-coordinate step sizes tuned during burn-in only and an
/// occasional label-swap proposal.
ParamTrace posterior_mh_run(const Dataset& data, const MixtureSpec& spec, const ChainSettings& settings);

/// Fractions of trace samples per region pattern, reported like posterior masses.
RegionMasses occupancy_stats(const ParamTrace& trace, const RegionSet& regions);

struct PYComparison {
  double log_mc = 0.0;
  double log_exact = 0.0;
  std::size_t nonzero_terms = 0;
};

/// log of the trace average of prod_i p(x_i, y_i | w) / p(x_i | w), against
/// log Z(X, Y) - log Z(X).
PYComparison compare_pY_estimates(const Dataset& data, std::span<const int> y_query, const ParamTrace& trace,
                                  const MixtureSpec& spec, Engine engine = Engine::dp);

/// Exact p(Y | X) for every Y in {1..K}^n, indexed like ParamTrace::label_counts.
std::vector<double> exact_label_posterior(const Dataset& data, const MixtureSpec& spec);

/// Total-variation distance between the kept label histogram and the exact p(Y | X).
double label_tv_distance(const ParamTrace& trace, const std::vector<double>& exact);

}  // namespace singlab
