#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <vector>

namespace singlab {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();
inline constexpr double kPosInf = std::numeric_limits<double>::infinity();

/// Reentrant log-gamma (std::lgamma writes the global signgam).
double log_gamma(double x);

double log_beta(double a, double b);

/// ln C(n, k) for integers 0 <= k <= n.
double log_choose(int n, int k);

double log_sum_exp(std::span<const double> values);
double log_sum_exp(double a, double b);

/// Incremental log-sum-exp accumulator.
class LogSumAccumulator {
 public:
  void add(double v);
  double value() const;
  bool empty() const { return max_ == kNegInf; }

 private:
  double max_ = kNegInf;
  double sum_ = 0.0;
};

/// lgamma(base + i) for i = 0..size-1.
class LogGammaTable {
 public:
  LogGammaTable() = default;
  LogGammaTable(double base, std::size_t size);
  double operator()(std::size_t i) const { return values_[i]; }
  double base() const { return base_; }
  std::size_t size() const { return values_.size(); }

 private:
  double base_ = 0.0;
  std::vector<double> values_;
};

/// Gauss-Legendre nodes/weights mapped to [0, 1].
struct QuadRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// Any order in 1..64; rules are cached.
const QuadRule& gauss_legendre_unit(int order);

/// Composite Gauss-Legendre integration of f over [lo, hi]; the panel count is doubled
/// until the relative change drops below rel_tol.
double integrate_line(const std::function<double(double)>& f, double lo, double hi,
                      double rel_tol = 1e-9, int order = 10, int max_doublings = 12);

/// Counter-based stream derivation: splitmix64 finalizer applied to the master seed mixed
/// with the golden-ratio-scaled task index.
std::uint64_t derive_stream_seed(std::uint64_t master_seed, std::uint64_t task);

}  // namespace singlab
