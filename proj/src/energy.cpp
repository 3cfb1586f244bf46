#include "singlab/energy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

#include <Eigen/Dense>
#include <boost/random/uniform_int_distribution.hpp>

#include "singlab/errors.hpp"
#include "singlab/parallel.hpp"

namespace singlab {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}

double ReplicateSeries::mean(std::size_t i) const {
  double sum = 0.0;
  std::size_t count = 0;
  for (double v : values[i])
    if (std::isfinite(v)) {
      sum += v;
      ++count;
    }
  return count ? sum / static_cast<double>(count) : kNaN;
}

double ReplicateSeries::se(std::size_t i) const {
  const double m = mean(i);
  double ss = 0.0;
  std::size_t count = 0;
  for (double v : values[i])
    if (std::isfinite(v)) {
      ss += (v - m) * (v - m);
      ++count;
    }
  if (count == 0) return kNaN;
  if (count == 1) return 0.0;
  return std::sqrt(ss / static_cast<double>(count - 1) / static_cast<double>(count));
}

bool ReplicateSeries::complete() const {
  for (const auto& row : values)
    for (double v : row)
      if (!std::isfinite(v)) return false;
  return true;
}

std::uint64_t replicate_task(std::int64_t n, int replicate) {
  return (static_cast<std::uint64_t>(n) << 24) + static_cast<std::uint64_t>(replicate);
}

double normalized_free_energy_x(const Dataset& data, const MixtureSpec& spec, const TrueModel& truth, Engine engine,
                                const QuadConfig& quad) {
  if (data.n() == 0) return 0.0;
  if (engine == Engine::complete) throw UnsupportedEngine("the complete engine does not compute Z(X)");
  return -log_evidence(data, spec, engine, quad).log_z + empirical_log_q_incomplete(data, truth, spec);
}

double normalized_free_energy_xy(const Dataset& data, const MixtureSpec& spec, const TrueModel& truth) {
  if (data.n() == 0) return 0.0;
  return -log_evidence_complete(data, spec) + empirical_log_q(data, truth, spec).complete;
}

EnergyCurve energy_curve(const MixtureSpec& spec, const TrueModel& truth, const std::vector<std::int64_t>& n_grid,
                         int R, const RunSettings& settings) {
  return energy_curve_sweep(spec, truth, {spec.prior.eta1}, n_grid, R, settings).front();
}

std::vector<EnergyCurve> energy_curve_sweep(const MixtureSpec& spec, const TrueModel& truth,
                                            const std::vector<double>& eta1_values,
                                            const std::vector<std::int64_t>& n_grid, int R,
                                            const RunSettings& settings) {
  spec.validate();
  truth.validate(spec);
  if (n_grid.size() < 4) throw DomainError("an energy curve needs at least 4 grid points");
  if (R < 1) throw DomainError("replicate count must be positive");
  if (eta1_values.empty()) throw DomainError("no Dirichlet concentration given");
  for (std::int64_t n : n_grid)
    if (n < 0) throw DomainError("sample sizes must be nonnegative");

  const std::size_t G = n_grid.size();
  const std::size_t E = eta1_values.size();
  std::vector<MixtureSpec> specs(E, spec);
  for (std::size_t e = 0; e < E; ++e) {
    specs[e].prior.eta1 = eta1_values[e];
    specs[e].validate();
  }

  std::vector<EnergyCurve> curves(E);
  for (std::size_t e = 0; e < E; ++e) {
    EnergyCurve& c = curves[e];
    c.spec = specs[e];
    c.truth = truth;
    c.replicates = R;
    c.settings = settings;
    c.x.n = c.xy.n = n_grid;
    c.x.values.assign(G, std::vector<double>(R, kNaN));
    c.xy.values.assign(G, std::vector<double>(R, kNaN));
    c.seeds.assign(G, std::vector<std::uint64_t>(R, 0));
  }
  // per-cell messages, merged in grid order afterwards
  std::vector<std::vector<std::string>> messages(G * R * E);

  const SeedSpec seed{settings.master_seed};
  parallel_for(G * R, settings.threads, [&](std::size_t cell) {
    const std::size_t g = cell / R;
    const int r = static_cast<int>(cell % R);
    const std::int64_t n = n_grid[g];
    const Dataset data = sample_dataset(truth, spec, static_cast<std::size_t>(n), seed, replicate_task(n, r));
    const EmpiricalLogQ lq = empirical_log_q(data, truth, spec);
    for (std::size_t e = 0; e < E; ++e) {
      curves[e].seeds[g][r] = SeedSpec{data.seed}.stream(data.task);
      curves[e].xy.values[g][r] = n == 0 ? 0.0 : -log_evidence_complete(data, specs[e]) + lq.complete;
    }
    auto fail = [&](std::size_t e, const std::string& what) {
      messages[cell * E + e].push_back("eta1=" + std::to_string(eta1_values[e]) + " n=" + std::to_string(n) +
                                       " replicate=" + std::to_string(r) + ": " + what);
    };
    if (settings.engine == Engine::complete) return;  // complete-data curve only
    if (settings.engine == Engine::dp && n > 0) {
      try {
        const SplitCountTable table = build_split_counts(data, spec);
        for (std::size_t e = 0; e < E; ++e)
          curves[e].x.values[g][r] = -log_evidence_from_split_counts(table, specs[e]) + lq.incomplete;
      } catch (const Error& err) {
        for (std::size_t e = 0; e < E; ++e) fail(e, err.what());
      }
      return;
    }
    for (std::size_t e = 0; e < E; ++e) {
      try {
        curves[e].x.values[g][r] = normalized_free_energy_x(data, specs[e], truth, settings.engine, settings.quad);
      } catch (const Error& err) {
        fail(e, err.what());
      }
    }
  });
  for (std::size_t cell = 0; cell < G * R; ++cell)
    for (std::size_t e = 0; e < E; ++e)
      for (auto& m : messages[cell * E + e]) curves[e].errors.push_back(std::move(m));
  return curves;
}

// ---------------------------------------------------------------------------

std::string_view to_string(FitModel model) { return model == FitModel::ln_only ? "ln_only" : "ln_plus_lnln"; }

FitModel fit_model_from_string(std::string_view name) {
  if (name == "ln_only") return FitModel::ln_only;
  if (name == "ln_plus_lnln") return FitModel::ln_plus_lnln;
  throw DomainError("unknown fit model '" + std::string(name) + "'");
}

namespace {

struct WlsResult {
  Eigen::VectorXd coef;
  Eigen::VectorXd residuals;
  bool weighted = true;
};

WlsResult weighted_fit(const std::vector<double>& n, const std::vector<double>& y, const std::vector<double>& se,
                       FitModel model) {
  const Eigen::Index p = static_cast<Eigen::Index>(n.size());
  const Eigen::Index k = model == FitModel::ln_only ? 2 : 3;
  Eigen::MatrixXd X(p, k);
  Eigen::VectorXd Y(p), w(p);
  bool weighted = true;
  for (double s : se)
    if (!(s > 0.0) || !std::isfinite(s)) weighted = false;
  for (Eigen::Index i = 0; i < p; ++i) {
    const double ln = std::log(n[i]);
    X(i, 0) = 1.0;
    X(i, 1) = ln;
    if (k == 3) X(i, 2) = -std::log(ln);
    Y(i) = y[i];
    w(i) = weighted ? 1.0 / se[i] : 1.0;
  }
  const Eigen::MatrixXd Xw = w.asDiagonal() * X;
  const Eigen::VectorXd Yw = w.asDiagonal() * Y;
  WlsResult out;
  out.coef = Xw.colPivHouseholderQr().solve(Yw);
  out.residuals = Y - X * out.coef;
  out.weighted = weighted;
  return out;
}

double percentile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace

LambdaFit fit_lambda(const ReplicateSeries& series, FitModel model, const FitOptions& options) {
  const std::size_t P = series.points();
  if (P < 4) throw DomainError("fit_lambda needs at least 4 grid points");
  std::vector<double> n(P), y(P), se(P);
  std::vector<std::vector<double>> finite(P);
  for (std::size_t i = 0; i < P; ++i) {
    if (series.n[i] < 2) throw DomainError("fit_lambda needs sample sizes of at least 2");
    for (double v : series.values[i])
      if (std::isfinite(v)) finite[i].push_back(v);
    if (finite[i].empty()) throw DomainError("grid point n=" + std::to_string(series.n[i]) + " has no values");
    n[i] = static_cast<double>(series.n[i]);
    y[i] = series.mean(i);
    se[i] = series.se(i);
  }
  const WlsResult base = weighted_fit(n, y, se, model);
  LambdaFit fit;
  fit.model = model;
  fit.n_points = P;
  fit.intercept = base.coef(0);
  fit.lambda_hat = base.coef(1);
  if (model == FitModel::ln_plus_lnln) fit.m_hat = base.coef(2) + 1.0;
  fit.weighted = base.weighted;
  fit.residuals.assign(base.residuals.data(), base.residuals.data() + base.residuals.size());

  std::mt19937_64 rng(options.seed);
  std::vector<double> slopes;
  slopes.reserve(options.bootstrap);
  std::vector<double> by(P);
  const std::vector<double> weights_se = base.weighted ? se : std::vector<double>(P, 0.0);
  for (int b = 0; b < options.bootstrap; ++b) {
    for (std::size_t i = 0; i < P; ++i) {
      const auto& vals = finite[i];
      boost::random::uniform_int_distribution<std::size_t> pick(0, vals.size() - 1);
      double sum = 0.0;
      for (std::size_t j = 0; j < vals.size(); ++j) sum += vals[pick(rng)];
      by[i] = sum / static_cast<double>(vals.size());
    }
    slopes.push_back(weighted_fit(n, by, weights_se, model).coef(1));
  }
  if (slopes.empty()) {
    fit.ci_lo = fit.ci_hi = fit.lambda_hat;
  } else {
    const double tail = 0.5 * (1.0 - options.level);
    fit.ci_lo = std::min(percentile(slopes, tail), fit.lambda_hat);
    fit.ci_hi = std::max(percentile(slopes, 1.0 - tail), fit.lambda_hat);
  }
  return fit;
}

std::vector<GeneralizationPoint> generalization_error_curve(const ReplicateSeries& curve_x) {
  const std::size_t P = curve_x.points();
  if (P < 3) throw DomainError("generalization error needs at least 3 grid points");
  std::vector<GeneralizationPoint> out;
  for (std::size_t i = 0; i + 1 < P; ++i) {
    const double n1 = static_cast<double>(curve_x.n[i]), n2 = static_cast<double>(curve_x.n[i + 1]);
    if (!(n2 > n1) || n1 <= 0.0) throw DomainError("grid must be strictly increasing and positive");
    GeneralizationPoint p;
    p.n_mid = (n2 - n1) / std::log(n2 / n1);
    p.g_hat = (curve_x.mean(i + 1) - curve_x.mean(i)) / (n2 - n1);
    const double s1 = curve_x.se(i), s2 = curve_x.se(i + 1);
    p.se = std::sqrt(s1 * s1 + s2 * s2) / (n2 - n1);
    out.push_back(p);
  }
  return out;
}

}  // namespace singlab
