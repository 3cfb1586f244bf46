#include "singlab/evidence.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "singlab/errors.hpp"

namespace singlab {

std::string_view to_string(Engine engine) {
  switch (engine) {
    case Engine::complete: return "complete";
    case Engine::brute: return "brute";
    case Engine::dp: return "dp";
    case Engine::quad: return "quad";
  }
  return "unknown";
}

Engine engine_from_string(std::string_view name) {
  if (name == "complete") return Engine::complete;
  if (name == "brute") return Engine::brute;
  if (name == "dp") return Engine::dp;
  if (name == "quad") return Engine::quad;
  throw DomainError("unknown evidence engine '" + std::string(name) + "'");
}

LabelCounts LabelCounts::from_labels(const Dataset& data, std::span<const int> ys, int K) {
  if (ys.size() != data.n()) throw DomainError("label vector length does not match the dataset");
  LabelCounts c;
  c.occupancy.assign(K, 0);
  c.sums.assign(K, 0.0);
  for (std::size_t i = 0; i < ys.size(); ++i) {
    const int y = ys[i];
    if (y < 1 || y > K) throw DomainError("label " + std::to_string(y) + " outside 1.." + std::to_string(K));
    ++c.occupancy[y - 1];
    c.sums[y - 1] += data.xs[i];
  }
  return c;
}

// ---------------------------------------------------------------------------

CompleteEvidence::CompleteEvidence(const Dataset& data, const MixtureSpec& spec) : spec_(spec), n_(data.n()) {
  spec.validate();
  if (data.family != spec.family) throw DomainError("dataset family does not match the model");
  const double eta = spec.prior.eta1;
  const int K = spec.components;
  log_gamma_eta_ = log_gamma(eta);
  log_gamma_k_eta_ = log_gamma(K * eta);
  eta_plus_ = LogGammaTable(eta, n_ + 1);
  if (spec.family == Family::binomial) {
    const std::size_t top = static_cast<std::size_t>(spec.trials) * n_ + 1;
    alpha_plus_ = LogGammaTable(spec.prior.beta.alpha, top);
    beta_plus_ = LogGammaTable(spec.prior.beta.beta, top);
    ab_plus_ = LogGammaTable(spec.prior.beta.alpha + spec.prior.beta.beta, top);
    log_beta_prior_ = log_beta(spec.prior.beta.alpha, spec.prior.beta.beta);
    for (std::size_t m = 0; m < data.hist.size(); ++m)
      if (data.hist[m] > 0) constant_ += data.hist[m] * log_choose(spec.trials, static_cast<int>(m));
  } else {
    double sq = 0.0;
    for (double x : data.xs) sq += x * x;
    constant_ = -0.5 * std::log(2.0 * std::numbers::pi) * static_cast<double>(n_) - 0.5 * sq;
  }
}

double CompleteEvidence::dirichlet_part(std::span<const std::int64_t> occupancy) const {
  std::int64_t n = 0;
  double v = 0.0;
  for (std::int64_t c : occupancy) {
    v += eta_plus_(static_cast<std::size_t>(c)) - log_gamma_eta_;
    n += c;
  }
  return v + log_gamma_k_eta_ - log_gamma(spec_.components * spec_.prior.eta1 + static_cast<double>(n));
}

double CompleteEvidence::dirichlet_part2(std::int64_t n1, std::int64_t n2) const {
  return eta_plus_(static_cast<std::size_t>(n1)) + eta_plus_(static_cast<std::size_t>(n2)) - 2.0 * log_gamma_eta_ +
         log_gamma_k_eta_ - log_gamma(2.0 * spec_.prior.eta1 + static_cast<double>(n1 + n2));
}

double CompleteEvidence::component_part(std::int64_t count, double sum) const {
  if (spec_.family == Family::binomial) {
    const auto s = static_cast<std::int64_t>(std::llround(sum));
    const std::int64_t t = spec_.trials * count;
    return alpha_plus_(static_cast<std::size_t>(s)) + beta_plus_(static_cast<std::size_t>(t - s)) -
           ab_plus_(static_cast<std::size_t>(t)) - log_beta_prior_;
  }
  const double tau2 = spec_.prior.normal.scale * spec_.prior.normal.scale;
  const double denom = 1.0 + static_cast<double>(count) * tau2;
  return -0.5 * std::log(denom) + 0.5 * sum * sum * tau2 / denom;
}

double CompleteEvidence::operator()(const LabelCounts& counts) const {
  double v = constant_ + dirichlet_part(counts.occupancy);
  for (std::size_t k = 0; k < counts.occupancy.size(); ++k) v += component_part(counts.occupancy[k], counts.sums[k]);
  return v;
}

double log_evidence_complete(const Dataset& data, std::span<const int> ys, const MixtureSpec& spec) {
  const CompleteEvidence ev(data, spec);
  return ev(LabelCounts::from_labels(data, ys, spec.components));
}

double log_evidence_complete(const Dataset& data, const MixtureSpec& spec) {
  return log_evidence_complete(data, data.labels(), spec);
}

// ---------------------------------------------------------------------------

void enumerate_assignments(const Dataset& data, const MixtureSpec& spec,
                           const std::function<void(std::span<const int>, double)>& visit) {
  const int K = spec.components;
  const std::size_t n = data.n();
  if (static_cast<double>(n) * std::log2(static_cast<double>(K)) > 20.0 + 1e-12)
    throw GuardRefusal("enumeration of K^n = " + std::to_string(K) + "^" + std::to_string(n) +
                       " assignments exceeds the limit 2^20");
  const CompleteEvidence ev(data, spec);
  std::vector<int> ys(n, 1);
  LabelCounts counts = LabelCounts::from_labels(data, ys, K);
  while (true) {
    visit(ys, ev(counts));
    std::size_t i = 0;
    for (; i < n; ++i) {
      const int old = ys[i];
      const int next = old == K ? 1 : old + 1;
      ys[i] = next;
      --counts.occupancy[old - 1];
      counts.sums[old - 1] -= data.xs[i];
      ++counts.occupancy[next - 1];
      counts.sums[next - 1] += data.xs[i];
      if (next != 1) break;
    }
    if (i == n) break;
  }
}

double log_evidence_brute(const Dataset& data, const MixtureSpec& spec) {
  LogSumAccumulator acc;
  enumerate_assignments(data, spec, [&](std::span<const int>, double v) { acc.add(v); });
  return acc.value();
}

// ---------------------------------------------------------------------------

SplitCountTable build_split_counts(const Dataset& data, const MixtureSpec& spec) {
  if (spec.family != Family::binomial || spec.components != 2)
    throw UnsupportedEngine("dp engine requires the binomial family with K = 2");
  if (data.family != Family::binomial || data.hist.size() != static_cast<std::size_t>(spec.trials + 1))
    throw DomainError("dataset histogram does not match the model");
  SplitCountTable t;
  t.trials = spec.trials;
  t.n = static_cast<std::int64_t>(data.n());
  for (int m = 0; m <= spec.trials; ++m) {
    t.total_sum += m * data.hist[m];
    if (data.hist[m] > 0) t.log_choose_constant += data.hist[m] * log_choose(spec.trials, m);
  }
  // coefficients reach 2^n, the long double range ends near 2^16384
  if (t.n > 16000) throw GuardRefusal("dp engine supports n <= 16000");
  const std::size_t stride = static_cast<std::size_t>(t.total_sum + 1);
  const std::size_t cells = static_cast<std::size_t>(t.n + 1) * stride;
  if (cells > kSplitTableLimit)
    throw GuardRefusal("dp table of " + std::to_string(cells) + " entries exceeds the limit " +
                       std::to_string(kSplitTableLimit));
  t.coeff.assign(cells, 0.0L);
  t.coeff[0] = 1.0L;

  std::vector<int> order;
  for (int m = 0; m <= spec.trials; ++m)
    if (data.hist[m] > 0) order.push_back(m);
  std::stable_sort(order.begin(), order.end(), [&](int x, int y) { return data.hist[x] > data.hist[y]; });

  std::int64_t n_max = 0, s_max = 0;
  std::vector<long double> binom;
  for (int m : order) {
    const std::int64_t c = data.hist[m];
    binom.assign(c + 1, 1.0L);
    for (std::int64_t j = 1; j <= c; ++j) binom[j] = binom[j - 1] * static_cast<long double>(c - j + 1) / j;
    for (std::int64_t N = n_max; N >= 0; --N) {
      long double* row = t.coeff.data() + N * stride;
      for (std::int64_t s = s_max; s >= 0; --s) {
        const long double v = row[s];
        if (v == 0.0L) continue;
        long double* target = row + s;
        for (std::int64_t j = 1; j <= c; ++j) {
          target += stride + m;
          *target += v * binom[j];
        }
      }
    }
    n_max += c;
    s_max += c * m;
  }
  return t;
}

double log_evidence_from_split_counts(const SplitCountTable& table, const MixtureSpec& spec) {
  if (spec.family != Family::binomial || spec.components != 2 || spec.trials != table.trials)
    throw UnsupportedEngine("split-count table does not match the model");
  Dataset shell;
  shell.family = Family::binomial;
  shell.trials = spec.trials;
  shell.xs.assign(static_cast<std::size_t>(table.n), 0.0);
  shell.hist.assign(spec.trials + 1, 0);
  shell.hist[0] = table.n;
  const CompleteEvidence ev(shell, spec);  // tables only; data constant handled below
  LogSumAccumulator acc;
  const std::int64_t S = table.total_sum;
  for (std::int64_t n1 = 0; n1 <= table.n; ++n1) {
    const std::int64_t n2 = table.n - n1;
    const double dm = ev.dirichlet_part2(n1, n2);
    const std::int64_t lo = std::max<std::int64_t>(0, S - spec.trials * n2);
    const std::int64_t hi = std::min<std::int64_t>(S, spec.trials * n1);
    for (std::int64_t s1 = lo; s1 <= hi; ++s1) {
      const long double c = table.at(n1, s1);
      if (c == 0.0L) continue;
      acc.add(static_cast<double>(std::log(c)) + dm + ev.component_part(n1, static_cast<double>(s1)) +
              ev.component_part(n2, static_cast<double>(S - s1)));
    }
  }
  return acc.value() + table.log_choose_constant;
}

double log_evidence_dp(const Dataset& data, const MixtureSpec& spec) {
  spec.validate();
  if (data.n() == 0) {
    if (spec.family != Family::binomial || spec.components != 2)
      throw UnsupportedEngine("dp engine requires the binomial family with K = 2");
    return 0.0;
  }
  return log_evidence_from_split_counts(build_split_counts(data, spec), spec);
}

// ---------------------------------------------------------------------------

EvidenceResult log_evidence_quad(const Dataset& data, const MixtureSpec& spec, const QuadConfig& config) {
  const CubatureResult r = integrate_two_component(data, spec, config, std::nullopt);
  return {r.log_z, Engine::quad, r.err_est};
}

RegionMasses posterior_region_mass(const Dataset& data, const MixtureSpec& spec, const RegionSet& regions,
                                   const QuadConfig& config) {
  const CubatureResult r = integrate_two_component(data, spec, config, regions);
  return RegionMasses::from_atoms(r.atoms, r.err_est);
}

EvidenceResult log_evidence(const Dataset& data, const MixtureSpec& spec, Engine engine, const QuadConfig& config) {
  switch (engine) {
    case Engine::complete: return {log_evidence_complete(data, spec), engine, 0.0};
    case Engine::brute: return {log_evidence_brute(data, spec), engine, 0.0};
    case Engine::dp: return {log_evidence_dp(data, spec), engine, 0.0};
    case Engine::quad: return log_evidence_quad(data, spec, config);
  }
  throw DomainError("unknown evidence engine");
}

}  // namespace singlab
