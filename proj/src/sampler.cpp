#include "singlab/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include <boost/random/gamma_distribution.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_01.hpp>

#include "singlab/errors.hpp"
#include "singlab/numerics.hpp"

namespace singlab {

MixtureParams ParamTrace::params(std::size_t s) const {
  MixtureParams p;
  p.weights.assign(weights.begin() + s * components, weights.begin() + (s + 1) * components);
  p.comps.assign(comps.begin() + s * components, comps.begin() + (s + 1) * components);
  return p;
}

namespace {

using Rng = std::mt19937_64;

double uniform(Rng& rng) {
  boost::random::uniform_01<double> u;
  return u(rng);
}

/// log of a Gamma(shape, 1) draw; shapes below one use G(a) = G(a + 1) U^(1/a).
double log_gamma_draw(double shape, Rng& rng) {
  if (shape >= 1.0) {
    boost::random::gamma_distribution<double> g(shape);
    return std::log(g(rng));
  }
  boost::random::gamma_distribution<double> g(shape + 1.0);
  return std::log(g(rng)) + std::log(uniform(rng)) / shape;
}

std::vector<double> dirichlet_draw(const std::vector<double>& shapes, Rng& rng) {
  std::vector<double> lg(shapes.size());
  for (std::size_t k = 0; k < shapes.size(); ++k) lg[k] = log_gamma_draw(shapes[k], rng);
  const double lse = log_sum_exp(lg);
  for (double& v : lg) v = std::exp(v - lse);
  return lg;
}

double beta_draw(double p, double q, Rng& rng) {
  const double x = log_gamma_draw(p, rng), y = log_gamma_draw(q, rng);
  // x / (x + y) in the log domain
  return 1.0 / (1.0 + std::exp(y - x));
}

double component_draw(const MixtureSpec& spec, std::int64_t count, double sum, Rng& rng) {
  if (spec.family == Family::binomial)
    return beta_draw(spec.prior.beta.alpha + sum, spec.prior.beta.beta + spec.trials * count - sum, rng);
  const double tau2 = spec.prior.normal.scale * spec.prior.normal.scale;
  const double prec = 1.0 + static_cast<double>(count) * tau2;
  boost::random::normal_distribution<double> z(sum * tau2 / prec, std::sqrt(tau2 / prec));
  return z(rng);
}

std::uint64_t label_space(const MixtureSpec& spec, std::size_t n) {
  if (static_cast<double>(n) * std::log2(static_cast<double>(spec.components)) > 20.0 + 1e-12)
    throw GuardRefusal("label histogram needs K^n <= 2^20");
  std::uint64_t size = 1;
  for (std::size_t i = 0; i < n; ++i) size *= static_cast<std::uint64_t>(spec.components);
  return size;
}

}  // namespace

ParamTrace gibbs_run(const Dataset& data, const MixtureSpec& spec, const ChainSettings& settings) {
  spec.validate();
  if (data.family != spec.family) throw DomainError("dataset family does not match the model");
  if (settings.iters <= settings.burnin) throw DomainError("iters must exceed burnin");
  if (settings.thin < 1) throw DomainError("thin must be positive");
  const int K = spec.components;
  const std::size_t n = data.n();
  Rng rng(settings.seed);

  ParamTrace trace;
  trace.components = K;
  trace.settings = settings;
  if (settings.label_histogram) trace.label_counts.assign(label_space(spec, n), 0);

  std::vector<double> a = dirichlet_draw(std::vector<double>(K, spec.prior.eta1), rng);
  std::vector<double> b(K);
  for (int k = 0; k < K; ++k) b[k] = component_draw(spec, 0, 0.0, rng);

  std::vector<int> ys(n, 1);
  std::vector<std::int64_t> counts(K);
  std::vector<double> sums(K), probs(K);
  const bool discrete = spec.family == Family::binomial;
  const int support = spec.support_size();
  std::vector<double> class_probs(discrete ? support * K : 0);
  const std::size_t kept_estimate = (settings.iters - settings.burnin + settings.thin - 1) / settings.thin;
  trace.iter.reserve(kept_estimate);
  trace.weights.reserve(kept_estimate * K);
  trace.comps.reserve(kept_estimate * K);

  for (std::uint64_t t = 0; t < settings.iters; ++t) {
    // labels given w
    if (discrete) {
      for (int m = 0; m < support; ++m) {
        double total = 0.0;
        for (int k = 0; k < K; ++k) {
          const double v = a[k] * component_density(m, b[k], spec);
          class_probs[m * K + k] = v;
          total += v;
        }
        for (int k = 0; k < K; ++k) class_probs[m * K + k] /= total;
      }
    }
    std::fill(counts.begin(), counts.end(), 0);
    std::fill(sums.begin(), sums.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double* p;
      if (discrete) {
        p = class_probs.data() + static_cast<int>(data.xs[i]) * K;
      } else {
        double total = 0.0;
        for (int k = 0; k < K; ++k) {
          probs[k] = a[k] * component_density(data.xs[i], b[k], spec);
          total += probs[k];
        }
        for (int k = 0; k < K; ++k) probs[k] /= total;
        p = probs.data();
      }
      double u = uniform(rng);
      int y = 0;
      while (y < K - 1 && u >= p[y]) {
        u -= p[y];
        ++y;
      }
      ys[i] = y + 1;
      ++counts[y];
      sums[y] += data.xs[i];
    }
    // w given labels
    std::vector<double> shapes(K);
    for (int k = 0; k < K; ++k) shapes[k] = spec.prior.eta1 + static_cast<double>(counts[k]);
    a = dirichlet_draw(shapes, rng);
    for (int k = 0; k < K; ++k) b[k] = component_draw(spec, counts[k], sums[k], rng);

    if (t >= settings.burnin && (t - settings.burnin) % settings.thin == 0) {
      trace.iter.push_back(t);
      trace.weights.insert(trace.weights.end(), a.begin(), a.end());
      trace.comps.insert(trace.comps.end(), b.begin(), b.end());
      if (settings.label_histogram) {
        std::uint64_t code = 0;
        for (std::size_t i = n; i-- > 0;) code = code * K + static_cast<std::uint64_t>(ys[i] - 1);
        ++trace.label_counts[code];
      }
    }
  }
  return trace;
}

// ---------------------------------------------------------------------------

namespace {

/// Log posterior kernel of (a, b1, b2) in unconstrained coordinates z.
class MhTarget {
 public:
  MhTarget(const Dataset& data, const MixtureSpec& spec) : spec_(spec) {
    if (spec.family == Family::binomial) {
      for (int m = 0; m < static_cast<int>(data.hist.size()); ++m)
        if (data.hist[m] > 0) {
          classes_.push_back(m);
          counts_.push_back(static_cast<double>(data.hist[m]));
        }
    } else {
      xs_ = data.xs;
    }
  }

  // z -> (a, b1, b2)
  std::array<double, 3> to_w(const std::array<double, 3>& z) const {
    auto logistic = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
    if (spec_.family == Family::binomial) return {logistic(z[0]), logistic(z[1]), logistic(z[2])};
    return {logistic(z[0]), z[1], z[2]};
  }

  std::array<double, 3> to_z(const std::array<double, 3>& w) const {
    auto logit = [](double p) { return std::log(p) - std::log1p(-p); };
    if (spec_.family == Family::binomial) return {logit(w[0]), logit(w[1]), logit(w[2])};
    return {logit(w[0]), w[1], w[2]};
  }

  double log_target(const std::array<double, 3>& z) const {
    const auto w = to_w(z);
    const double a = w[0];
    if (!(a > 0.0 && a < 1.0)) return kNegInf;
    // log sigmoid pieces: ln a = -log1p(e^{-z}), ln(1-a) = -log1p(e^{z})
    auto log_sig = [](double v) { return v > 0 ? -std::log1p(std::exp(-v)) : v - std::log1p(std::exp(v)); };
    double lp = spec_.prior.eta1 * (log_sig(z[0]) + log_sig(-z[0]));  // Beta(eta, eta) density times Jacobian
    double ll = 0.0;
    if (spec_.family == Family::binomial) {
      const double al = spec_.prior.beta.alpha, be = spec_.prior.beta.beta;
      for (int d = 1; d <= 2; ++d) lp += al * log_sig(z[d]) + be * log_sig(-z[d]);
      const double b1 = w[1], b2 = w[2];
      if (!(b1 > 0.0 && b1 < 1.0 && b2 > 0.0 && b2 < 1.0)) return kNegInf;
      const double l1 = log_sig(z[1]), l1c = log_sig(-z[1]), l2 = log_sig(z[2]), l2c = log_sig(-z[2]);
      const double la = log_sig(z[0]), lac = log_sig(-z[0]);
      for (std::size_t c = 0; c < classes_.size(); ++c) {
        const int m = classes_[c];
        const int r = spec_.trials - m;
        ll += counts_[c] * log_sum_exp(la + m * l1 + r * l1c, lac + m * l2 + r * l2c);
      }
    } else {
      const double bound = spec_.prior.normal.bound, s = spec_.prior.normal.scale;
      if (std::abs(w[1]) > bound || std::abs(w[2]) > bound) return kNegInf;
      lp += -0.5 * (w[1] * w[1] + w[2] * w[2]) / (s * s);
      for (double x : xs_) {
        const double d1 = x - w[1], d2 = x - w[2];
        ll += std::log(a * std::exp(-0.5 * d1 * d1) + (1.0 - a) * std::exp(-0.5 * d2 * d2));
      }
    }
    return ll + lp;
  }

 private:
  const MixtureSpec& spec_;
  std::vector<int> classes_;
  std::vector<double> counts_;
  std::vector<double> xs_;
};

}  // namespace

ParamTrace posterior_mh_run(const Dataset& data, const MixtureSpec& spec, const ChainSettings& settings) {
  spec.validate();
  if (spec.components != 2) throw UnsupportedEngine("the Metropolis sampler supports K = 2 only");
  if (data.family != spec.family) throw DomainError("dataset family does not match the model");
  if (settings.iters <= settings.burnin) throw DomainError("iters must exceed burnin");
  if (settings.thin < 1) throw DomainError("thin must be positive");
  Rng rng(settings.seed);
  boost::random::normal_distribution<double> gauss;
  const MhTarget target(data, spec);

  // start from a prior draw, nudged off the boundary
  const std::vector<double> a0 = dirichlet_draw({spec.prior.eta1, spec.prior.eta1}, rng);
  std::array<double, 3> w{std::clamp(a0[0], 1e-6, 1.0 - 1e-6), component_draw(spec, 0, 0.0, rng),
                          component_draw(spec, 0, 0.0, rng)};
  if (spec.family == Family::binomial) {
    w[1] = std::clamp(w[1], 1e-6, 1.0 - 1e-6);
    w[2] = std::clamp(w[2], 1e-6, 1.0 - 1e-6);
  }
  std::array<double, 3> z = target.to_z(w);
  double current = target.log_target(z);

  const double n_scale = 1.0 / std::sqrt(std::max<double>(1.0, static_cast<double>(data.n())));
  std::array<double, 3> step{2.0 * n_scale + 0.1, 2.0 * n_scale + 0.1, 2.0 * n_scale + 0.1};
  std::array<std::uint64_t, 3> tried{}, accepted{};
  std::uint64_t kept_tried = 0, kept_accepted = 0;

  ParamTrace trace;
  trace.components = 2;
  trace.settings = settings;
  for (std::uint64_t t = 0; t < settings.iters; ++t) {
    for (int d = 0; d < 3; ++d) {
      std::array<double, 3> prop = z;
      prop[d] += step[d] * gauss(rng);
      const double lp = target.log_target(prop);
      const bool ok = std::log(uniform(rng)) < lp - current;
      if (ok) {
        z = prop;
        current = lp;
      }
      ++tried[d];
      accepted[d] += ok;
      if (t >= settings.burnin) {
        ++kept_tried;
        kept_accepted += ok;
      }
    }
    if (uniform(rng) < 0.1) {
      // exchange the two components
      std::array<double, 3> prop{-z[0], z[2], z[1]};
      const double lp = target.log_target(prop);
      if (std::log(uniform(rng)) < lp - current) {
        z = prop;
        current = lp;
      }
    }
    if (t < settings.burnin && (t + 1) % 200 == 0) {
      for (int d = 0; d < 3; ++d) {
        const double rate = static_cast<double>(accepted[d]) / static_cast<double>(tried[d]);
        step[d] *= std::exp(rate - 0.3);
        tried[d] = accepted[d] = 0;
      }
    }
    if (t >= settings.burnin && (t - settings.burnin) % settings.thin == 0) {
      const auto cur = target.to_w(z);
      trace.iter.push_back(t);
      trace.weights.push_back(cur[0]);
      trace.weights.push_back(1.0 - cur[0]);
      trace.comps.push_back(cur[1]);
      trace.comps.push_back(cur[2]);
    }
  }
  trace.acceptance_rate = kept_tried ? static_cast<double>(kept_accepted) / static_cast<double>(kept_tried) : 0.0;
  return trace;
}

// ---------------------------------------------------------------------------

RegionMasses occupancy_stats(const ParamTrace& trace, const RegionSet& regions) {
  regions.validate();
  if (trace.components != 2) throw UnsupportedEngine("region occupancy needs K = 2");
  if (trace.size() == 0) throw DomainError("empty trace");
  std::array<double, 8> atoms{};
  for (std::size_t s = 0; s < trace.size(); ++s)
    atoms[regions.membership(trace.weight(s, 0), trace.comp(s, 0), trace.comp(s, 1))] += 1.0;
  for (double& v : atoms) v /= static_cast<double>(trace.size());
  return RegionMasses::from_atoms(atoms, 0.0);
}

PYComparison compare_pY_estimates(const Dataset& data, std::span<const int> y_query, const ParamTrace& trace,
                                  const MixtureSpec& spec, Engine engine) {
  if (y_query.size() != data.n()) throw DomainError("query labels do not match the dataset");
  if (trace.size() == 0) throw DomainError("empty trace");
  for (int y : y_query)
    if (y < 1 || y > spec.components) throw DomainError("query label outside 1..K");
  PYComparison out;
  LogSumAccumulator acc;
  for (std::size_t s = 0; s < trace.size(); ++s) {
    const MixtureParams p = trace.params(s);
    double term = 0.0;
    for (std::size_t i = 0; i < data.n() && term > kNegInf; ++i) {
      const double a = p.weights[y_query[i] - 1];
      if (a <= 0.0) {
        term = kNegInf;
        break;
      }
      const double lj = std::log(a) + log_component_density(data.xs[i], p.comps[y_query[i] - 1], spec);
      double lm = kNegInf;
      for (int k = 0; k < spec.components; ++k)
        if (p.weights[k] > 0.0)
          lm = log_sum_exp(lm, std::log(p.weights[k]) + log_component_density(data.xs[i], p.comps[k], spec));
      term += lj - lm;
    }
    if (term > kNegInf) ++out.nonzero_terms;
    acc.add(term);
  }
  out.log_mc = acc.empty() ? kNegInf : acc.value() - std::log(static_cast<double>(trace.size()));
  out.log_exact = log_evidence_complete(data, y_query, spec) - log_evidence(data, spec, engine).log_z;
  return out;
}

std::vector<double> exact_label_posterior(const Dataset& data, const MixtureSpec& spec) {
  const std::uint64_t size = label_space(spec, data.n());
  std::vector<double> logs(size);
  const int K = spec.components;
  enumerate_assignments(data, spec, [&](std::span<const int> ys, double v) {
    std::uint64_t code = 0;
    for (std::size_t i = ys.size(); i-- > 0;) code = code * K + static_cast<std::uint64_t>(ys[i] - 1);
    logs[code] = v;
  });
  const double lse = log_sum_exp(logs);
  for (double& v : logs) v = std::exp(v - lse);
  return logs;
}

double label_tv_distance(const ParamTrace& trace, const std::vector<double>& exact) {
  if (trace.label_counts.size() != exact.size()) throw DomainError("label histogram was not recorded for this space");
  std::uint64_t total = 0;
  for (auto c : trace.label_counts) total += c;
  if (total == 0) throw DomainError("empty label histogram");
  double tv = 0.0;
  for (std::size_t i = 0; i < exact.size(); ++i)
    tv += std::abs(static_cast<double>(trace.label_counts[i]) / static_cast<double>(total) - exact[i]);
  return 0.5 * tv;
}

}  // namespace singlab
