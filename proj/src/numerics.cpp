#include "singlab/numerics.hpp"

#include <algorithm>
#include <array>
#include <map>
#include <mutex>
#include <numbers>
#include <stdexcept>

#include "singlab/errors.hpp"

namespace singlab {

double log_gamma(double x) {
  int sign = 0;
  return ::lgamma_r(x, &sign);
}

double log_beta(double a, double b) { return log_gamma(a) + log_gamma(b) - log_gamma(a + b); }

double log_choose(int n, int k) {
  if (k < 0 || k > n) return kNegInf;
  return log_gamma(n + 1.0) - log_gamma(k + 1.0) - log_gamma(n - k + 1.0);
}

double log_sum_exp(std::span<const double> values) {
  LogSumAccumulator acc;
  for (double v : values) acc.add(v);
  return acc.value();
}

double log_sum_exp(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

void LogSumAccumulator::add(double v) {
  if (v == kNegInf) return;
  if (v <= max_) {
    sum_ += std::exp(v - max_);
  } else {
    sum_ = sum_ * std::exp(max_ - v) + 1.0;
    max_ = v;
  }
}

double LogSumAccumulator::value() const {
  if (max_ == kNegInf) return kNegInf;
  return max_ + std::log(sum_);
}

LogGammaTable::LogGammaTable(double base, std::size_t size) : base_(base), values_(size) {
  for (std::size_t i = 0; i < size; ++i) values_[i] = log_gamma(base + static_cast<double>(i));
}

namespace {

QuadRule make_gauss_legendre(int order) {
  QuadRule rule;
  rule.nodes.resize(order);
  rule.weights.resize(order);
  const int half = (order + 1) / 2;
  for (int i = 0; i < half; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (order + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = 0.0;
      for (int j = 1; j <= order; ++j) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j - 1.0) * z * p1 - (j - 1.0) * p2) / j;
      }
      dp = order * (z * p0 - p1) / (z * z - 1.0);
      const double dz = p0 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    // recompute derivative at the converged root
    double p0 = 1.0, p1 = 0.0;
    for (int j = 1; j <= order; ++j) {
      const double p2 = p1;
      p1 = p0;
      p0 = ((2.0 * j - 1.0) * z * p1 - (j - 1.0) * p2) / j;
    }
    dp = order * (z * p0 - p1) / (z * z - 1.0);
    const double w = 2.0 / ((1.0 - z * z) * dp * dp);
    // map [-1,1] -> [0,1]
    rule.nodes[i] = 0.5 * (1.0 - z);
    rule.nodes[order - 1 - i] = 0.5 * (1.0 + z);
    rule.weights[i] = 0.5 * w;
    rule.weights[order - 1 - i] = 0.5 * w;
  }
  return rule;
}

}  // namespace

const QuadRule& gauss_legendre_unit(int order) {
  if (order < 1 || order > 64) throw DomainError("Gauss-Legendre order must be in 1..64");
  static std::mutex mu;
  static std::map<int, QuadRule> cache;
  std::lock_guard lock(mu);
  auto it = cache.find(order);
  if (it == cache.end()) it = cache.emplace(order, make_gauss_legendre(order)).first;
  return it->second;
}

double integrate_line(const std::function<double(double)>& f, double lo, double hi, double rel_tol,
                      int order, int max_doublings) {
  const QuadRule& rule = gauss_legendre_unit(order);
  auto composite = [&](int panels) {
    const double h = (hi - lo) / panels;
    double total = 0.0;
    for (int p = 0; p < panels; ++p) {
      const double left = lo + p * h;
      double s = 0.0;
      for (std::size_t k = 0; k < rule.nodes.size(); ++k) s += rule.weights[k] * f(left + h * rule.nodes[k]);
      total += s * h;
    }
    return total;
  };
  int panels = 8;
  double prev = composite(panels);
  for (int level = 0; level < max_doublings; ++level) {
    panels *= 2;
    const double next = composite(panels);
    if (std::abs(next - prev) <= rel_tol * std::max(std::abs(next), 1e-300)) return next;
    prev = next;
  }
  return prev;
}

std::uint64_t derive_stream_seed(std::uint64_t master_seed, std::uint64_t task) {
  std::uint64_t z = master_seed ^ (task * 0x9E3779B97F4A7C15ULL + 0x632BE59BD9B4E019ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace singlab
