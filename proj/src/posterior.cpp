#include "singlab/posterior.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "singlab/errors.hpp"
#include "singlab/evidence.hpp"
#include "singlab/numerics.hpp"
#include "singlab/parallel.hpp"

namespace singlab {

namespace {

struct AxisGrid {
  std::vector<double> u;
  std::vector<double> x;
  std::vector<double> log_w;  // log of quadrature weight times prior density, in u units
  std::vector<double> w_x;    // quadrature weight in parameter units
};

std::vector<std::pair<double, double>> axis_panels(const ParameterAxis& axis, int panels, int levels,
                                                   const std::vector<std::pair<double, double>>& refine_x) {
  std::vector<double> breaks = axis.natural_breaks();
  for (const auto& [lo, hi] : refine_x)
    for (double x : {lo, hi}) {
      const double u = axis.to_u(x);
      if (u > axis.u_lo() && u < axis.u_hi()) breaks.push_back(u);
    }
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end(), [](double a, double b) { return std::abs(a - b) < 1e-14; }),
               breaks.end());
  const double span = axis.u_hi() - axis.u_lo();
  std::vector<std::pair<double, double>> out;
  for (std::size_t s = 1; s < breaks.size(); ++s) {
    const double lo = breaks[s - 1], hi = breaks[s];
    const double mid_x = axis.to_x(0.5 * (lo + hi));
    bool inside = false;
    for (const auto& [rlo, rhi] : refine_x)
      if (mid_x > rlo && mid_x < rhi) inside = true;
    int k = std::max(1, static_cast<int>(std::lround(panels * (hi - lo) / span)));
    if (inside) k <<= levels;
    for (int j = 0; j < k; ++j) out.emplace_back(lo + (hi - lo) * j / k, lo + (hi - lo) * (j + 1) / k);
  }
  return out;
}

AxisGrid make_axis_grid(const ParameterAxis& axis, const std::vector<std::pair<double, double>>& panels, int order) {
  const QuadRule& rule = gauss_legendre_unit(order);
  AxisGrid g;
  for (const auto& [lo, hi] : panels) {
    const double h = hi - lo;
    for (std::size_t k = 0; k < rule.nodes.size(); ++k) {
      const double u = lo + h * rule.nodes[k];
      const double x = axis.to_x(u);
      const double lw = axis.log_weight(u) + std::log(rule.weights[k] * h);
      g.u.push_back(u);
      g.x.push_back(x);
      g.log_w.push_back(lw);
      g.w_x.push_back(std::exp(lw - axis.log_density(x)));
    }
  }
  return g;
}

// Log-likelihood on a tensor grid, without label-independent constants.
class GridLikelihood {
 public:
  GridLikelihood(const Dataset& data, const MixtureSpec& spec) : spec_(spec) {
    if (spec.family == Family::binomial) {
      for (int m = 0; m < static_cast<int>(data.hist.size()); ++m)
        if (data.hist[m] > 0) {
          classes_.push_back(m);
          counts_.push_back(static_cast<double>(data.hist[m]));
          constant_ += data.hist[m] * log_choose(spec.trials, m);
        }
    } else {
      xs_ = data.xs;
      constant_ = -0.5 * std::log(2.0 * std::numbers::pi) * static_cast<double>(xs_.size());
    }
  }

  double constant() const { return constant_; }
  std::size_t width() const { return spec_.family == Family::binomial ? classes_.size() : xs_.size(); }

  std::vector<double> table(const std::vector<double>& bs) const {
    const std::size_t w = width();
    std::vector<double> t(bs.size() * w);
    for (std::size_t j = 0; j < bs.size(); ++j) {
      const double b = bs[j];
      for (std::size_t c = 0; c < w; ++c) {
        if (spec_.family == Family::binomial) {
          const int m = classes_[c];
          t[j * w + c] = std::exp((m == 0 ? 0.0 : m * std::log(b)) +
                                  (spec_.trials == m ? 0.0 : (spec_.trials - m) * std::log1p(-b)));
        } else {
          const double z = xs_[c] - b;
          t[j * w + c] = std::exp(-0.5 * z * z);
        }
      }
    }
    return t;
  }

  double eval(double a, const double* r1, const double* r2) const {
    const std::size_t w = width();
    double ll = 0.0;
    if (spec_.family == Family::binomial) {
      for (std::size_t c = 0; c < w; ++c) ll += counts_[c] * std::log(a * r1[c] + (1.0 - a) * r2[c]);
    } else {
      for (std::size_t c = 0; c < w; ++c) ll += std::log(a * r1[c] + (1.0 - a) * r2[c]);
    }
    return ll;
  }

 private:
  const MixtureSpec& spec_;
  std::vector<int> classes_;
  std::vector<double> counts_;
  std::vector<double> xs_;
  double constant_ = 0.0;
};

// Fills log values (if out != nullptr) and returns log Z over the tensor grid.
double tensor_log_z(const GridLikelihood& like, const std::array<AxisGrid, 3>& g, std::vector<double>* out) {
  const std::size_t na = g[0].x.size(), nb1 = g[1].x.size(), nb2 = g[2].x.size();
  const std::vector<double> t1 = like.table(g[1].x);
  const std::vector<double> t2 = like.table(g[2].x);
  const std::size_t w = like.width();
  std::vector<double> local;
  std::vector<double>& v = out ? *out : local;
  v.resize(na * nb1 * nb2);
  double vmax = kNegInf;
  for (std::size_t i = 0; i < na; ++i)
    for (std::size_t j = 0; j < nb1; ++j)
      for (std::size_t k = 0; k < nb2; ++k) {
        const double val = like.eval(g[0].x[i], t1.data() + j * w, t2.data() + k * w) + g[0].log_w[i] +
                           g[1].log_w[j] + g[2].log_w[k];
        v[(i * nb1 + j) * nb2 + k] = val;
        vmax = std::max(vmax, val);
      }
  double sum = 0.0;
  for (double val : v) sum += std::exp(val - vmax);
  return vmax + std::log(sum) + like.constant();
}

}  // namespace

double GridPosterior::density(std::size_t i, std::size_t j, std::size_t k) const {
  return mass[index(i, j, k)] / (weights[0][i] * weights[1][j] * weights[2][k]);
}

std::vector<double> GridPosterior::marginal_density(int d) const {
  std::vector<double> out(nodes[d].size(), 0.0);
  for (std::size_t i = 0; i < nodes[0].size(); ++i)
    for (std::size_t j = 0; j < nodes[1].size(); ++j)
      for (std::size_t k = 0; k < nodes[2].size(); ++k) {
        const std::size_t at[3] = {i, j, k};
        out[at[d]] += mass[index(i, j, k)];
      }
  for (std::size_t i = 0; i < out.size(); ++i) out[i] /= weights[d][i];
  return out;
}

std::array<double, 3> GridPosterior::mean() const {
  std::array<double, 3> m{};
  for (std::size_t i = 0; i < nodes[0].size(); ++i)
    for (std::size_t j = 0; j < nodes[1].size(); ++j)
      for (std::size_t k = 0; k < nodes[2].size(); ++k) {
        const double p = mass[index(i, j, k)];
        m[0] += p * nodes[0][i];
        m[1] += p * nodes[1][j];
        m[2] += p * nodes[2][k];
      }
  return m;
}

std::array<double, 3> GridPosterior::sd() const {
  const std::array<double, 3> m = mean();
  std::array<double, 3> v{};
  for (std::size_t i = 0; i < nodes[0].size(); ++i)
    for (std::size_t j = 0; j < nodes[1].size(); ++j)
      for (std::size_t k = 0; k < nodes[2].size(); ++k) {
        const double p = mass[index(i, j, k)];
        v[0] += p * (nodes[0][i] - m[0]) * (nodes[0][i] - m[0]);
        v[1] += p * (nodes[1][j] - m[1]) * (nodes[1][j] - m[1]);
        v[2] += p * (nodes[2][k] - m[2]) * (nodes[2][k] - m[2]);
      }
  return {std::sqrt(v[0]), std::sqrt(v[1]), std::sqrt(v[2])};
}

GridPosterior grid_posterior(const Dataset& data, const MixtureSpec& spec, const GridConfig& config) {
  spec.validate();
  if (spec.components != 2) throw UnsupportedEngine("grid posterior supports K = 2 only");
  if (data.family != spec.family) throw DomainError("dataset family does not match the model");
  if (config.panels_a < 1 || config.panels_b < 1 || config.order < 3 || config.refine_levels < 0)
    throw DomainError("invalid grid configuration");
  if (config.regions) config.regions->validate();

  const auto axes = parameter_axes(spec);
  std::vector<std::pair<double, double>> ra, rb;
  if (config.regions) {
    const RegionSet& r = *config.regions;
    ra = {{0.0, r.delta_a}, {1.0 - r.delta_a, 1.0}};
    rb = {{r.bstar - r.delta_b, r.bstar + r.delta_b}};
  }
  const int levels = config.regions ? config.refine_levels : 0;
  const auto pa = axis_panels(axes[0], config.panels_a, levels, ra);
  const auto pb = axis_panels(axes[1], config.panels_b, levels, rb);
  const std::array<AxisGrid, 3> g = {make_axis_grid(axes[0], pa, config.order),
                                     make_axis_grid(axes[1], pb, config.order),
                                     make_axis_grid(axes[2], pb, config.order)};
  const GridLikelihood like(data, spec);

  GridPosterior out;
  std::vector<double> logv;
  out.log_z = tensor_log_z(like, g, &logv);
  const double shift = out.log_z - like.constant();
  out.mass.resize(logv.size());
  for (std::size_t i = 0; i < logv.size(); ++i) out.mass[i] = std::exp(logv[i] - shift);
  for (int d = 0; d < 3; ++d) {
    out.nodes[d] = g[d].x;
    out.weights[d] = g[d].w_x;
  }

  const std::array<AxisGrid, 3> low = {make_axis_grid(axes[0], pa, config.order - 2),
                                       make_axis_grid(axes[1], pb, config.order - 2),
                                       make_axis_grid(axes[2], pb, config.order - 2)};
  out.err_est = std::abs(std::expm1(tensor_log_z(like, low, nullptr) - out.log_z));

  const auto m = out.mean();
  const auto s = out.sd();
  static const char* names[3] = {"a", "b1", "b2"};
  for (int d = 0; d < 3; ++d) {
    const auto& x = out.nodes[d];
    const auto it = std::lower_bound(x.begin(), x.end(), m[d]);
    const std::size_t hi = std::clamp<std::size_t>(static_cast<std::size_t>(it - x.begin()), 1, x.size() - 1);
    const double step = x[hi] - x[hi - 1];
    if (s[d] < 2.0 * step)
      out.warnings.push_back(std::string("posterior sd of ") + names[d] + " (" + std::to_string(s[d]) +
                             ") is below two grid steps (" + std::to_string(step) + ")");
  }
  return out;
}

RegionMasses grid_region_masses(const GridPosterior& grid, const RegionSet& regions) {
  regions.validate();
  std::array<double, 8> atoms{};
  for (std::size_t i = 0; i < grid.nodes[0].size(); ++i)
    for (std::size_t j = 0; j < grid.nodes[1].size(); ++j)
      for (std::size_t k = 0; k < grid.nodes[2].size(); ++k)
        atoms[regions.membership(grid.nodes[0][i], grid.nodes[1][j], grid.nodes[2][k])] +=
            grid.mass[grid.index(i, j, k)];
  return RegionMasses::from_atoms(atoms, grid.err_est);
}

// ---------------------------------------------------------------------------

std::vector<double> MassCurve::union_w1_w3() const {
  std::vector<double> v;
  for (const auto& p : points) v.push_back(p.mean.union_w1_w3());
  return v;
}

std::vector<double> MassCurve::w2() const {
  std::vector<double> v;
  for (const auto& p : points) v.push_back(p.mean.w2);
  return v;
}

std::vector<double> MassCurve::rest() const {
  std::vector<double> v;
  for (const auto& p : points) v.push_back(p.mean.rest);
  return v;
}

MassCurve mass_curve(const MixtureSpec& spec, const TrueModel& truth, const std::vector<std::int64_t>& n_grid, int R,
                     const RegionSet& regions, const RunSettings& settings) {
  spec.validate();
  truth.validate(spec);
  regions.validate();
  if (R < 1) throw DomainError("replicate count must be positive");
  if (n_grid.empty()) throw DomainError("empty sample-size grid");
  const std::size_t G = n_grid.size();
  MassCurve curve;
  curve.spec = spec;
  curve.truth = truth;
  curve.regions = regions;
  curve.settings = settings;
  curve.points.resize(G);
  std::vector<std::optional<RegionMasses>> results(G * R);
  std::vector<std::string> messages(G * R);
  const SeedSpec seed{settings.master_seed};
  parallel_for(G * R, settings.threads, [&](std::size_t cell) {
    const std::size_t g = cell / R;
    const int r = static_cast<int>(cell % R);
    const std::int64_t n = n_grid[g];
    const Dataset data = sample_dataset(truth, spec, static_cast<std::size_t>(n), seed, replicate_task(n, r));
    try {
      results[cell] = posterior_region_mass(data, spec, regions, settings.quad);
    } catch (const Error& err) {
      messages[cell] = "n=" + std::to_string(n) + " replicate=" + std::to_string(r) + ": " + err.what();
    }
  });
  for (std::size_t g = 0; g < G; ++g) {
    MassPoint& p = curve.points[g];
    p.n = n_grid[g];
    std::array<double, 8> sums{};
    double err = 0.0;
    for (int r = 0; r < R; ++r) {
      const std::size_t cell = g * R + r;
      if (!messages[cell].empty()) curve.errors.push_back(messages[cell]);
      if (!results[cell]) continue;
      const RegionMasses& m = *results[cell];
      p.replicates.push_back(m);
      const double vals[8] = {m.w1, m.w2, m.w3, m.w12, m.w13, m.w23, m.w123, m.rest};
      for (int q = 0; q < 8; ++q) sums[q] += vals[q];
      err = std::max(err, m.err_est);
    }
    const double c = static_cast<double>(p.replicates.size());
    if (c > 0) {
      p.mean.w1 = sums[0] / c;
      p.mean.w2 = sums[1] / c;
      p.mean.w3 = sums[2] / c;
      p.mean.w12 = sums[3] / c;
      p.mean.w13 = sums[4] / c;
      p.mean.w23 = sums[5] / c;
      p.mean.w123 = sums[6] / c;
      p.mean.rest = sums[7] / c;
    } else {
      const double nan = std::numeric_limits<double>::quiet_NaN();
      p.mean = RegionMasses{nan, nan, nan, nan, nan, nan, nan, nan, nan};
    }
    p.mean.err_est = err;
  }
  return curve;
}

bool increasing_trend(const std::vector<double>& values, int allowed) {
  int against = 0;
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] < values[i - 1]) ++against;
  return against <= allowed;
}

bool monotone_trend(const std::vector<double>& values, int allowed) {
  int up = 0, down = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[i - 1]) ++up;
    if (values[i] < values[i - 1]) ++down;
  }
  return up <= allowed || down <= allowed;
}

Phase detect_phase(const MassCurve& curve) {
  if (curve.points.empty()) throw DomainError("empty mass curve");
  const std::vector<double> u13 = curve.union_w1_w3();
  const std::vector<double> u2 = curve.w2();
  auto dominant = [](const std::vector<double>& v) { return v.back() > 0.5 && v.back() >= v.front(); };
  const bool elim = dominant(u13);
  const bool all = dominant(u2);
  if (elim && !all) return Phase::eliminate;
  if (all && !elim) return Phase::use_all;
  return Phase::transition_ambiguous;
}

}  // namespace singlab
