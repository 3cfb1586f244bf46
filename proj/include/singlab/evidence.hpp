#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "singlab/cubature.hpp"
#include "singlab/data.hpp"
#include "singlab/model.hpp"
#include "singlab/numerics.hpp"
#include "singlab/regions.hpp"

namespace singlab {

enum class Engine { complete, brute, dp, quad };

std::string_view to_string(Engine engine);
Engine engine_from_string(std::string_view name);

struct EvidenceResult {
  double log_z = 0.0;
  Engine engine = Engine::complete;
  double err_est = 0.0;  // absolute error in log Z; zero for exact engines
};

/// Occupancies N_k and sufficient statistics s_k = sum of x over members of k.
struct LabelCounts {
  std::vector<std::int64_t> occupancy;
  std::vector<double> sums;

  static LabelCounts from_labels(const Dataset& data, std::span<const int> ys, int K);
};

/// Closed-form complete-data evidence with log-gamma tables sized for one dataset.
/// log Z(X, Y) = data_constant() + dirichlet_part(N) + sum_k component_part(N_k, s_k).
class CompleteEvidence {
 public:
  CompleteEvidence(const Dataset& data, const MixtureSpec& spec);

  /// Label-independent part: sum ln C(M, x_i) (binomial) or -n/2 ln 2pi - sum x^2 / 2 (Gaussian).
  double data_constant() const { return constant_; }
  double dirichlet_part(std::span<const std::int64_t> occupancy) const;
  /// Two-component shortcut for dirichlet_part.
  double dirichlet_part2(std::int64_t n1, std::int64_t n2) const;
  double component_part(std::int64_t count, double sum) const;
  double operator()(const LabelCounts& counts) const;

 private:
  MixtureSpec spec_;
  std::size_t n_ = 0;
  double constant_ = 0.0;
  double log_gamma_k_eta_ = 0.0;
  double log_gamma_eta_ = 0.0;
  LogGammaTable eta_plus_;      // lgamma(eta + N)
  LogGammaTable k_eta_plus_;    // lgamma(K eta + n)
  LogGammaTable alpha_plus_;    // lgamma(alpha + s)
  LogGammaTable beta_plus_;     // lgamma(beta + t)
  LogGammaTable ab_plus_;       // lgamma(alpha + beta + M N) indexed by M N
  double log_beta_prior_ = 0.0;
};

/// log Z(X, Y) for labels in {1..K}.
double log_evidence_complete(const Dataset& data, std::span<const int> ys, const MixtureSpec& spec);
/// Uses the dataset's own labels.
double log_evidence_complete(const Dataset& data, const MixtureSpec& spec);

inline constexpr std::uint64_t kEnumerationLimit = 1ull << 20;

/// Calls visit(ys, log Z(X, Y)) for every Y in {1..K}^n; refuses when K^n > 2^20.
void enumerate_assignments(const Dataset& data, const MixtureSpec& spec,
                           const std::function<void(std::span<const int>, double)>& visit);

double log_evidence_brute(const Dataset& data, const MixtureSpec& spec);

/// Coefficients of prod_m (1 + u v^m)^{c_m}: entry (N1, s1) counts the label assignments
/// (K = 2) placing N1 items with value sum s1 in component 1. Depends on the histogram only,
/// so one table serves every prior.
struct SplitCountTable {
  std::int64_t n = 0;
  std::int64_t total_sum = 0;
  int trials = 0;
  double log_choose_constant = 0.0;  // sum_m c_m ln C(M, m)
  std::vector<long double> coeff;    // row-major (N1, s1), stride total_sum + 1

  long double at(std::int64_t n1, std::int64_t s1) const { return coeff[n1 * (total_sum + 1) + s1]; }
};

inline constexpr std::size_t kSplitTableLimit = 40'000'000;

SplitCountTable build_split_counts(const Dataset& data, const MixtureSpec& spec);
double log_evidence_from_split_counts(const SplitCountTable& table, const MixtureSpec& spec);

/// Exact log Z(X) for binomial K = 2 by summation over (N1, s1).
double log_evidence_dp(const Dataset& data, const MixtureSpec& spec);

EvidenceResult log_evidence_quad(const Dataset& data, const MixtureSpec& spec, const QuadConfig& config = {});

/// Posterior masses of W1, W2, W3, their intersections and the complement.
RegionMasses posterior_region_mass(const Dataset& data, const MixtureSpec& spec, const RegionSet& regions,
                                   const QuadConfig& config = {});

/// Dispatches to the named engine; `complete` uses the dataset's labels.
EvidenceResult log_evidence(const Dataset& data, const MixtureSpec& spec, Engine engine,
                            const QuadConfig& config = {});

}  // namespace singlab
