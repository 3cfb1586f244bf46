#include "singlab/model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

#include "singlab/errors.hpp"
#include "singlab/numerics.hpp"

namespace singlab {

namespace {

constexpr double kSimplexTol = 1e-12;
const double kHalfLog2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

double xlogy(double x, double y) { return x == 0.0 ? 0.0 : x * std::log(y); }

bool is_support_point(double x, int trials) {
  return x >= 0.0 && x <= trials && std::floor(x) == x;
}

// Quadrature grid covering every component mean +- 8 for unit-variance integrals.
struct LineGrid {
  std::vector<double> nodes;
  std::vector<double> weights;
};

LineGrid gaussian_grid(std::initializer_list<const std::vector<double>*> means, int panels = 256,
                       int order = 10) {
  double lo = kPosInf, hi = kNegInf;
  for (const auto* v : means) {
    for (double b : *v) {
      lo = std::min(lo, b);
      hi = std::max(hi, b);
    }
  }
  lo -= 8.0;
  hi += 8.0;
  const QuadRule& rule = gauss_legendre_unit(order);
  LineGrid grid;
  const double h = (hi - lo) / panels;
  for (int p = 0; p < panels; ++p) {
    for (std::size_t k = 0; k < rule.nodes.size(); ++k) {
      grid.nodes.push_back(lo + h * (p + rule.nodes[k]));
      grid.weights.push_back(h * rule.weights[k]);
    }
  }
  return grid;
}

double log_mixture(double x, const std::vector<double>& weights, const std::vector<double>& comps,
                   const MixtureSpec& spec) {
  LogSumAccumulator acc;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    if (weights[k] <= 0.0) continue;
    acc.add(std::log(weights[k]) + log_component_density(x, comps[k], spec));
  }
  return acc.value();
}

// KL(f(.|b_true) || f(.|b)) between two components.
double component_kl(double b_true, double b, const MixtureSpec& spec) {
  if (spec.family == Family::gaussian) return 0.5 * (b_true - b) * (b_true - b);
  double kl = 0.0;
  for (int x = 0; x <= spec.trials; ++x) {
    const double lq = log_component_density(x, b_true, spec);
    if (lq == kNegInf) continue;
    const double lp = log_component_density(x, b, spec);
    if (lp == kNegInf) return kPosInf;
    kl += std::exp(lq) * (lq - lp);
  }
  return std::max(kl, 0.0);
}

double component_entropy(double b, const MixtureSpec& spec) {
  if (spec.family == Family::gaussian) return 0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e);
  double h = 0.0;
  for (int x = 0; x <= spec.trials; ++x) {
    const double lf = log_component_density(x, b, spec);
    if (lf != kNegInf) h -= std::exp(lf) * lf;
  }
  return h;
}

double dlog_component(double x, double b, const MixtureSpec& spec) {
  if (spec.family == Family::gaussian) return x - b;
  return x / b - (spec.trials - x) / (1.0 - b);
}

}  // namespace

std::string_view to_string(Family family) {
  return family == Family::binomial ? "binomial" : "gaussian";
}

Family family_from_string(std::string_view name) {
  if (name == "binomial") return Family::binomial;
  if (name == "gaussian") return Family::gaussian;
  throw DomainError("unknown family '" + std::string(name) + "'");
}

void MixtureSpec::validate() const {
  if (components < 1) throw DomainError("component count K must be >= 1");
  if (family == Family::binomial && trials < 1) throw DomainError("binomial trial count M must be >= 1");
  if (!(prior.eta1 > 0.0)) throw DomainError("Dirichlet concentration eta1 must be > 0");
  if (family == Family::binomial && !(prior.beta.alpha > 0.0 && prior.beta.beta > 0.0))
    throw DomainError("Beta prior parameters must be > 0");
  if (family == Family::gaussian && !(prior.normal.scale > 0.0 && prior.normal.bound > 0.0))
    throw DomainError("normal prior scale and truncation bound must be > 0");
}

void MixtureParams::validate(const MixtureSpec& spec) const {
  if (weights.size() != static_cast<std::size_t>(spec.components) || comps.size() != weights.size())
    throw DomainError("parameter vector sizes do not match K");
  double total = 0.0;
  for (double a : weights) {
    if (!(a >= -kSimplexTol)) throw DomainError("mixing weight below zero");
    total += a;
  }
  if (std::abs(total - 1.0) > kSimplexTol) throw DomainError("mixing weights do not sum to one");
  for (double b : comps) {
    if (!std::isfinite(b)) throw DomainError("component parameter not finite");
    if (spec.family == Family::binomial && (b < 0.0 || b > 1.0))
      throw DomainError("binomial success probability outside [0,1]");
  }
}

void TrueModel::validate(const MixtureSpec& spec) const {
  if (weights.empty() || weights.size() != comps.size())
    throw DomainError("true model weights and components must have equal nonzero length");
  double total = 0.0;
  for (double a : weights) {
    if (!(a > 0.0)) throw DomainError("true model violates minimality: zero weight");
    total += a;
  }
  if (std::abs(total - 1.0) > kSimplexTol) throw DomainError("true weights do not sum to one");
  for (std::size_t i = 0; i < comps.size(); ++i) {
    if (spec.family == Family::binomial && (comps[i] < 0.0 || comps[i] > 1.0))
      throw DomainError("true binomial parameter outside [0,1]");
    for (std::size_t j = 0; j < i; ++j)
      if (comps[i] == comps[j]) throw DomainError("true model violates minimality: repeated component");
  }
}

MixtureParams TrueModel::as_params(int K) const {
  if (K < components()) throw DomainError("learner has fewer components than the true model");
  MixtureParams p;
  p.weights.assign(K, 0.0);
  p.comps.assign(K, comps.front());
  for (int k = 0; k < components(); ++k) {
    p.weights[k] = weights[k];
    p.comps[k] = comps[k];
  }
  return p;
}

double log_component_density(double x, double b, const MixtureSpec& spec) {
  if (spec.family == Family::gaussian) return -kHalfLog2Pi - 0.5 * (x - b) * (x - b);
  if (!is_support_point(x, spec.trials))
    throw DomainError("observation " + std::to_string(x) + " outside binomial support {0.." +
                      std::to_string(spec.trials) + "}");
  const int m = static_cast<int>(x);
  const double v = log_choose(spec.trials, m) + xlogy(m, b) + xlogy(spec.trials - m, 1.0 - b);
  return std::isnan(v) ? kNegInf : v;
}

double component_density(double x, double b, const MixtureSpec& spec) {
  return std::exp(log_component_density(x, b, spec));
}

double mixture_density(double x, const MixtureParams& params, const MixtureSpec& spec) {
  if (spec.discrete() && !is_support_point(x, spec.trials))
    throw DomainError("observation outside binomial support");
  double p = 0.0;
  for (int k = 0; k < params.components(); ++k)
    if (params.weights[k] > 0.0) p += params.weights[k] * component_density(x, params.comps[k], spec);
  return p;
}

double complete_density(double x, int y, const MixtureParams& params, const MixtureSpec& spec) {
  if (y < 1 || y > params.components()) throw DomainError("label out of range 1..K");
  const double f = component_density(x, params.comps[y - 1], spec);
  return params.weights[y - 1] * f;
}

double true_density(double x, const TrueModel& truth, const MixtureSpec& spec) {
  double q = 0.0;
  for (int k = 0; k < truth.components(); ++k)
    q += truth.weights[k] * component_density(x, truth.comps[k], spec);
  return q;
}

double true_complete_density(double x, int y, const TrueModel& truth, const MixtureSpec& spec) {
  if (y < 1) throw DomainError("label out of range");
  if (y > truth.components()) return 0.0;
  return truth.weights[y - 1] * component_density(x, truth.comps[y - 1], spec);
}

double kl_incomplete(const MixtureParams& params, const TrueModel& truth, const MixtureSpec& spec) {
  params.validate(spec);
  if (spec.discrete()) {
    double kl = 0.0;
    for (int x = 0; x <= spec.trials; ++x) {
      const double lq = log_mixture(x, truth.weights, truth.comps, spec);
      if (lq == kNegInf) continue;
      const double lp = log_mixture(x, params.weights, params.comps, spec);
      if (lp == kNegInf) return kPosInf;
      kl += std::exp(lq) * (lq - lp);
    }
    return std::max(kl, 0.0);
  }
  const LineGrid grid = gaussian_grid({&params.comps, &truth.comps});
  auto integrand = [&](double x) {
    const double lq = log_mixture(x, truth.weights, truth.comps, spec);
    const double lp = log_mixture(x, params.weights, params.comps, spec);
    return std::exp(lq) * (lq - lp);
  };
  double kl = 0.0;
  for (std::size_t i = 0; i < grid.nodes.size(); ++i) kl += grid.weights[i] * integrand(grid.nodes[i]);
  if (!std::isfinite(kl)) return kPosInf;
  return std::max(kl, 0.0);
}

double kl_complete(const MixtureParams& params, const TrueModel& truth, const MixtureSpec& spec) {
  params.validate(spec);
  double kl = 0.0;
  for (int k = 0; k < truth.components(); ++k) {
    if (k >= params.components() || params.weights[k] <= 0.0) return kPosInf;
    const double ck = component_kl(truth.comps[k], params.comps[k], spec);
    if (!std::isfinite(ck)) return kPosInf;
    kl += truth.weights[k] * (std::log(truth.weights[k] / params.weights[k]) + ck);
  }
  return std::max(kl, 0.0);
}

TrueEntropy entropy_true(const TrueModel& truth, const MixtureSpec& spec) {
  truth.validate(spec);
  TrueEntropy h;
  if (spec.discrete()) {
    for (int x = 0; x <= spec.trials; ++x) {
      const double lq = log_mixture(x, truth.weights, truth.comps, spec);
      if (lq != kNegInf) h.s_x -= std::exp(lq) * lq;
    }
  } else if (truth.components() == 1) {
    h.s_x = component_entropy(truth.comps[0], spec);
  } else {
    const LineGrid grid = gaussian_grid({&truth.comps});
    for (std::size_t i = 0; i < grid.nodes.size(); ++i) {
      const double lq = log_mixture(grid.nodes[i], truth.weights, truth.comps, spec);
      h.s_x -= grid.weights[i] * std::exp(lq) * lq;
    }
  }
  if (truth.components() == 1) {
    h.s_xy = h.s_x;
    return h;
  }
  for (int k = 0; k < truth.components(); ++k) {
    const double a = truth.weights[k];
    h.s_xy += -a * std::log(a) + a * component_entropy(truth.comps[k], spec);
  }
  return h;
}

namespace {

// Scores at one observation: incomplete score of ln p(x|w) and per-label complete scores.
struct Scores {
  Eigen::VectorXd incomplete;
  std::vector<Eigen::VectorXd> complete;  // one per label
  std::vector<double> label_prob;         // a_k f(x|b_k)
  double density = 0.0;
};

Scores analytic_scores(double x, const MixtureParams& params, const MixtureSpec& spec) {
  const int K = params.components();
  const int d = spec.param_dim();
  Scores s;
  s.incomplete = Eigen::VectorXd::Zero(d);
  s.complete.assign(K, Eigen::VectorXd::Zero(d));
  s.label_prob.resize(K);
  std::vector<double> f(K), dlf(K);
  for (int k = 0; k < K; ++k) {
    f[k] = component_density(x, params.comps[k], spec);
    dlf[k] = dlog_component(x, params.comps[k], spec);
    s.label_prob[k] = params.weights[k] * f[k];
    s.density += s.label_prob[k];
  }
  for (int j = 1; j < K; ++j) {
    s.incomplete[j - 1] = (f[j] - f[0]) / s.density;
    s.complete[j][j - 1] += 1.0 / params.weights[j];
    s.complete[0][j - 1] -= 1.0 / params.weights[0];
  }
  for (int k = 0; k < K; ++k) {
    s.incomplete[K - 1 + k] = params.weights[k] * f[k] * dlf[k] / s.density;
    s.complete[k][K - 1 + k] = dlf[k];
  }
  return s;
}

MixtureParams params_from_vector(const Eigen::VectorXd& w, int K) {
  MixtureParams p;
  p.weights.resize(K);
  p.comps.resize(K);
  double rest = 0.0;
  for (int j = 1; j < K; ++j) {
    p.weights[j] = w[j - 1];
    rest += w[j - 1];
  }
  p.weights[0] = 1.0 - rest;
  for (int k = 0; k < K; ++k) p.comps[k] = w[K - 1 + k];
  return p;
}

Eigen::VectorXd params_to_vector(const MixtureParams& p) {
  const int K = p.components();
  Eigen::VectorXd w(K - 1 + K);
  for (int j = 1; j < K; ++j) w[j - 1] = p.weights[j];
  for (int k = 0; k < K; ++k) w[K - 1 + k] = p.comps[k];
  return w;
}

// Richardson-extrapolated central-difference scores used to cross-check the analytic ones.
void validate_scores_at(double x, const MixtureParams& params, const MixtureSpec& spec, const Scores& s,
                        double tol) {
  const int K = params.components();
  const Eigen::VectorXd w0 = params_to_vector(params);
  double margin = 1e-3;
  for (double a : params.weights) margin = std::min(margin, 0.25 * a);
  if (spec.family == Family::binomial)
    for (double b : params.comps) margin = std::min(margin, 0.25 * std::min(b, 1.0 - b));
  auto eval = [&](const Eigen::VectorXd& w, int label) {
    const MixtureParams p = params_from_vector(w, K);
    if (label == 0) return std::log(mixture_density(x, p, spec));
    return std::log(complete_density(x, label, p, spec));
  };
  for (int i = 0; i < w0.size(); ++i) {
    for (int label = 0; label <= K; ++label) {
      auto central = [&](double h) {
        Eigen::VectorXd wp = w0, wm = w0;
        wp[i] += h;
        wm[i] -= h;
        return (eval(wp, label) - eval(wm, label)) / (2.0 * h);
      };
      const double numeric = (4.0 * central(0.5 * margin) - central(margin)) / 3.0;
      const double analytic = label == 0 ? s.incomplete[i] : s.complete[label - 1][i];
      if (std::abs(numeric - analytic) > tol * std::max(1.0, std::abs(analytic)))
        throw ValidationError("analytic score disagrees with finite differences at x=" + std::to_string(x));
    }
  }
}

}  // namespace

FisherPair fisher_matrices(const MixtureParams& params, const MixtureSpec& spec, const FisherOptions& options) {
  spec.validate();
  params.validate(spec);
  for (double a : params.weights)
    if (!(a > 0.0)) throw SingularPointError("Fisher matrices need all mixing weights > 0");
  if (spec.family == Family::binomial)
    for (double b : params.comps)
      if (!(b > 0.0 && b < 1.0)) throw SingularPointError("Fisher matrices need 0 < b < 1");

  const int d = spec.param_dim();
  FisherPair fp{Eigen::MatrixXd::Zero(d, d), Eigen::MatrixXd::Zero(d, d)};
  auto accumulate = [&](double x, double weight, bool check) {
    const Scores s = analytic_scores(x, params, spec);
    if (check) validate_scores_at(x, params, spec, s, options.validation_tol);
    if (s.density > 0.0) fp.incomplete += weight * s.density * s.incomplete * s.incomplete.transpose();
    for (int k = 0; k < params.components(); ++k)
      if (s.label_prob[k] > 0.0)
        fp.complete += weight * s.label_prob[k] * s.complete[k] * s.complete[k].transpose();
  };
  if (spec.discrete()) {
    for (int x = 0; x <= spec.trials; ++x) accumulate(x, 1.0, options.validate_scores);
  } else {
    const LineGrid grid = gaussian_grid({&params.comps});
    const std::size_t stride = std::max<std::size_t>(1, grid.nodes.size() / 16);
    for (std::size_t i = 0; i < grid.nodes.size(); ++i)
      accumulate(grid.nodes[i], grid.weights[i], options.validate_scores && i % stride == stride / 2);
  }
  // symmetrize rounding
  fp.incomplete = 0.5 * (fp.incomplete + fp.incomplete.transpose()).eval();
  fp.complete = 0.5 * (fp.complete + fp.complete.transpose()).eval();
  return fp;
}

namespace {

void check_regular(const Eigen::MatrixXd& info) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(info);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  if (!(lo > 0.0) || hi / lo > 1e12)
    throw RegularityError("observable Fisher matrix is numerically singular (condition number > 1e12)");
}

}  // namespace

double reg_lv_coefficient(const MixtureParams& params, const MixtureSpec& spec) {
  const FisherPair fp = fisher_matrices(params, spec);
  check_regular(fp.incomplete);
  // Tr[I_XY I_X^{-1}] = Tr[I_X^{-1} I_XY]
  const Eigen::MatrixXd solved = fp.incomplete.ldlt().solve(fp.complete);
  return solved.trace();
}

double reg_lv_log_det(const MixtureParams& params, const MixtureSpec& spec) {
  const FisherPair fp = fisher_matrices(params, spec);
  check_regular(fp.incomplete);
  const double ld_xy = fp.complete.ldlt().vectorD().array().log().sum();
  const double ld_x = fp.incomplete.ldlt().vectorD().array().log().sum();
  return 0.5 * (ld_xy - ld_x);
}

}  // namespace singlab
