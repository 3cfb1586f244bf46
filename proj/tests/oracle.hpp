#pragma once

// Small independent reference computations shared by the unit tests.

#include <cmath>
#include <random>
#include <vector>

namespace oracle {

inline double binom_pmf(int m, int x, double b) {
  double c = 1.0;
  for (int i = 1; i <= x; ++i) c = c * (m - x + i) / i;
  return c * std::pow(b, x) * std::pow(1.0 - b, m - x);
}

inline double normal_pdf(double x, double mu) { return std::exp(-0.5 * (x - mu) * (x - mu)) / std::sqrt(2.0 * M_PI); }

// B(p, q) through gamma functions evaluated independently of the library.
inline double beta_fn(double p, double q) { return std::tgamma(p) * std::tgamma(q) / std::tgamma(p + q); }

inline double random_unit(std::mt19937_64& rng, double lo = 0.02, double hi = 0.98) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

}  // namespace oracle
