#include "singlab/cubature.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <queue>
#include <stdexcept>

#include "singlab/errors.hpp"
#include "singlab/numerics.hpp"

namespace singlab {

void RegionSet::validate() const {
  if (!(delta_a > 0.0 && delta_a < 0.5) || !(delta_b > 0.0 && delta_b < 0.5))
    throw DomainError("region half-widths must lie in (0, 0.5)");
  if (!std::isfinite(bstar)) throw DomainError("region centre b* must be finite");
}

bool RegionSet::in_w1(double a, double b1, double) const {
  return std::abs(a - 1.0) <= delta_a && std::abs(b1 - bstar) <= delta_b;
}
bool RegionSet::in_w2(double, double b1, double b2) const {
  return std::abs(b1 - bstar) <= delta_b && std::abs(b2 - bstar) <= delta_b;
}
bool RegionSet::in_w3(double a, double, double b2) const {
  return a <= delta_a && std::abs(b2 - bstar) <= delta_b;
}
unsigned RegionSet::membership(double a, double b1, double b2) const {
  return (in_w1(a, b1, b2) ? 1u : 0u) | (in_w2(a, b1, b2) ? 2u : 0u) | (in_w3(a, b1, b2) ? 4u : 0u);
}

RegionMasses RegionMasses::from_atoms(const std::array<double, 8>& atoms, double err_est) {
  RegionMasses m;
  for (unsigned pattern = 0; pattern < 8; ++pattern) {
    const double v = atoms[pattern];
    const bool r1 = pattern & 1u, r2 = pattern & 2u, r3 = pattern & 4u;
    if (r1) m.w1 += v;
    if (r2) m.w2 += v;
    if (r3) m.w3 += v;
    if (r1 && r2) m.w12 += v;
    if (r1 && r3) m.w13 += v;
    if (r2 && r3) m.w23 += v;
    if (r1 && r2 && r3) m.w123 += v;
    if (pattern == 0) m.rest += v;
  }
  m.err_est = err_est;
  return m;
}

// ---------------------------------------------------------------------------
// ParameterAxis

ParameterAxis ParameterAxis::beta(double p, double q) {
  if (!(p > 0.0 && q > 0.0)) throw DomainError("beta axis shapes must be positive");
  ParameterAxis ax;
  ax.kind_ = Kind::beta;
  ax.p_ = p;
  ax.q_ = q;
  ax.pw_ = std::min(p, 1.0);
  ax.qw_ = std::min(q, 1.0);
  ax.log_norm_ = -log_beta(p, q);
  ax.u_lo_ = 0.0;
  ax.u_hi_ = 2.0;
  return ax;
}

ParameterAxis ParameterAxis::truncated_normal(double scale, double bound) {
  if (!(scale > 0.0 && bound > 0.0)) throw DomainError("normal axis needs positive scale and bound");
  ParameterAxis ax;
  ax.kind_ = Kind::normal;
  ax.scale_ = scale;
  ax.bound_ = bound;
  const double mass = std::erf(bound / (scale * std::numbers::sqrt2));
  ax.log_norm_ = -0.5 * std::log(2.0 * std::numbers::pi) - std::log(scale) - std::log(mass);
  ax.u_lo_ = -bound;
  ax.u_hi_ = bound;
  return ax;
}

double ParameterAxis::to_x(double u) const {
  if (kind_ == Kind::normal) return u;
  if (u <= 1.0) return 0.5 * (pw_ == 1.0 ? u : std::pow(u, 1.0 / pw_));
  const double v = 2.0 - u;
  return 1.0 - 0.5 * (qw_ == 1.0 ? v : std::pow(v, 1.0 / qw_));
}

double ParameterAxis::to_u(double x) const {
  if (kind_ == Kind::normal) return std::clamp(x, u_lo_, u_hi_);
  x = std::clamp(x, 0.0, 1.0);
  if (x <= 0.5) return std::pow(2.0 * x, pw_);
  return 2.0 - std::pow(2.0 * (1.0 - x), qw_);
}

double ParameterAxis::log_weight(double u) const {
  if (kind_ == Kind::normal) return log_norm_ - 0.5 * (u / scale_) * (u / scale_);
  if (u <= 1.0) {
    const double x = to_x(u);
    // (p-1) ln x + (1/pw - 1) ln u collapses to (p-1) ln(1/2) when pw = p
    const double singular = pw_ == p_ ? (p_ - 1.0) * std::log(0.5) : (p_ - 1.0) * std::log(x);
    return log_norm_ + singular + (q_ - 1.0) * std::log1p(-x) + std::log(0.5 / pw_);
  }
  const double y = 1.0 - to_x(u);
  const double singular = qw_ == q_ ? (q_ - 1.0) * std::log(0.5) : (q_ - 1.0) * std::log(y);
  return log_norm_ + singular + (p_ - 1.0) * std::log1p(-y) + std::log(0.5 / qw_);
}

double ParameterAxis::log_density(double x) const {
  if (kind_ == Kind::normal) return std::abs(x) > bound_ ? kNegInf : log_norm_ - 0.5 * (x / scale_) * (x / scale_);
  if (x < 0.0 || x > 1.0) return kNegInf;
  return log_norm_ + (p_ == 1.0 ? 0.0 : (p_ - 1.0) * std::log(x)) + (q_ == 1.0 ? 0.0 : (q_ - 1.0) * std::log1p(-x));
}

std::vector<double> ParameterAxis::natural_breaks() const {
  if (kind_ == Kind::normal) return {u_lo_, 0.0, u_hi_};
  return {0.0, 1.0, 2.0};
}

std::array<ParameterAxis, 3> parameter_axes(const MixtureSpec& spec) {
  const ParameterAxis a = ParameterAxis::beta(spec.prior.eta1, spec.prior.eta1);
  const ParameterAxis b = spec.family == Family::binomial
                              ? ParameterAxis::beta(spec.prior.beta.alpha, spec.prior.beta.beta)
                              : ParameterAxis::truncated_normal(spec.prior.normal.scale, spec.prior.normal.bound);
  return {a, b, b};
}

// ---------------------------------------------------------------------------
// Adaptive cubature

namespace {

struct Box {
  std::array<double, 3> lo;
  std::array<double, 3> hi;

  Box child(unsigned c) const {
    Box b = *this;
    for (int d = 0; d < 3; ++d) {
      const double mid = 0.5 * (lo[d] + hi[d]);
      if (c & (1u << d))
        b.lo[d] = mid;
      else
        b.hi[d] = mid;
    }
    return b;
  }
};

struct OffsetOverflow {
  double new_offset;
};

struct KernelVanished {};

// Evaluates tensor Gauss-Legendre sums of exp(log kernel - offset) over boxes.
class KernelEvaluator {
 public:
  KernelEvaluator(const Dataset& data, const MixtureSpec& spec, int order)
      : spec_(spec), rule_(gauss_legendre_unit(order)), axes_(parameter_axes(spec)) {
    if (spec.family == Family::binomial) {
      for (int m = 0; m < static_cast<int>(data.hist.size()); ++m) {
        if (data.hist[m] == 0) continue;
        classes_.push_back(m);
        counts_.push_back(static_cast<double>(data.hist[m]));
        constant_ += data.hist[m] * log_choose(spec.trials, m);
      }
    } else {
      xs_ = data.xs;
      constant_ = -0.5 * std::log(2.0 * std::numbers::pi) * static_cast<double>(xs_.size());
    }
  }

  const std::array<ParameterAxis, 3>& axes() const { return axes_; }
  double constant() const { return constant_; }
  double offset() const { return offset_; }
  void set_offset(double v) { offset_ = v; }
  std::size_t evaluations() const { return evaluations_; }

  /// Upper bound of the binomial log-likelihood (without binomial coefficients).
  double binomial_bound() const {
    double n = 0.0;
    for (double c : counts_) n += c;
    double bound = 0.0;
    for (std::size_t k = 0; k < counts_.size(); ++k) bound += counts_[k] * std::log(counts_[k] / n);
    return bound - constant_;
  }

  double sum(const Box& box, double* max_log = nullptr) {
    const int P = static_cast<int>(rule_.nodes.size());
    nodes_x_.resize(3 * P);
    nodes_lw_.resize(3 * P);
    for (int d = 0; d < 3; ++d) {
      const double h = box.hi[d] - box.lo[d];
      for (int k = 0; k < P; ++k) {
        const double u = box.lo[d] + h * rule_.nodes[k];
        nodes_x_[d * P + k] = axes_[d].to_x(u);
        nodes_lw_[d * P + k] = axes_[d].log_weight(u) + std::log(rule_.weights[k] * h);
      }
    }
    fill_component_tables(P);
    double total = 0.0;
    double vmax = kNegInf;
    for (int ia = 0; ia < P; ++ia) {
      const double a = nodes_x_[ia];
      const double lwa = nodes_lw_[ia];
      for (int i1 = 0; i1 < P; ++i1) {
        const double lw1 = nodes_lw_[P + i1];
        for (int i2 = 0; i2 < P; ++i2) {
          const double v = log_likelihood(a, i1, i2) + lwa + lw1 + nodes_lw_[2 * P + i2] - offset_;
          vmax = std::max(vmax, v);
          total += std::exp(v);
        }
      }
    }
    evaluations_ += static_cast<std::size_t>(P) * P * P;
    if (vmax > 600.0) throw OffsetOverflow{offset_ + vmax};
    if (max_log) *max_log = vmax + offset_;
    return total;
  }

 private:
  // Component values on the b nodes of the current box: table_[axis][node][class or datum].
  void fill_component_tables(int P) {
    const std::size_t width = spec_.family == Family::binomial ? classes_.size() : xs_.size();
    for (int axis = 0; axis < 2; ++axis) {
      table_[axis].resize(static_cast<std::size_t>(P) * width);
      for (int k = 0; k < P; ++k) {
        const double b = nodes_x_[(axis + 1) * P + k];
        double* row = table_[axis].data() + k * width;
        if (spec_.family == Family::binomial) {
          const double lb = std::log(b), l1b = std::log1p(-b);
          for (std::size_t c = 0; c < width; ++c) {
            const int m = classes_[c];
            const double lv = (m == 0 ? 0.0 : m * lb) + (spec_.trials - m == 0 ? 0.0 : (spec_.trials - m) * l1b);
            row[c] = std::exp(lv);
          }
        } else {
          for (std::size_t i = 0; i < width; ++i) {
            const double z = xs_[i] - b;
            row[i] = std::exp(-0.5 * z * z);
          }
        }
      }
    }
  }

  double log_likelihood(double a, int i1, int i2) const {
    const double ab = 1.0 - a;
    if (spec_.family == Family::binomial) {
      const std::size_t width = classes_.size();
      const double* r1 = table_[0].data() + i1 * width;
      const double* r2 = table_[1].data() + i2 * width;
      double ll = 0.0;
      for (std::size_t c = 0; c < width; ++c) ll += counts_[c] * std::log(a * r1[c] + ab * r2[c]);
      return ll;
    }
    const std::size_t width = xs_.size();
    const double* r1 = table_[0].data() + i1 * width;
    const double* r2 = table_[1].data() + i2 * width;
    double ll = 0.0;
    for (std::size_t i = 0; i < width; ++i) ll += std::log(a * r1[i] + ab * r2[i]);
    return ll;
  }

  const MixtureSpec& spec_;
  const QuadRule& rule_;
  std::array<ParameterAxis, 3> axes_;
  std::vector<int> classes_;
  std::vector<double> counts_;
  std::vector<double> xs_;
  double constant_ = 0.0;
  double offset_ = 0.0;
  std::size_t evaluations_ = 0;
  std::vector<double> nodes_x_, nodes_lw_;
  std::array<std::vector<double>, 2> table_;
};

std::vector<double> axis_partition(const ParameterAxis& axis, std::vector<double> extra, int pieces) {
  std::vector<double> breaks = axis.natural_breaks();
  for (double u : extra)
    if (u > axis.u_lo() && u < axis.u_hi()) breaks.push_back(u);
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end(),
                           [](double x, double y) { return std::abs(x - y) < 1e-14; }),
               breaks.end());
  const double span = axis.u_hi() - axis.u_lo();
  std::vector<double> out{breaks.front()};
  for (std::size_t s = 1; s < breaks.size(); ++s) {
    const double len = breaks[s] - breaks[s - 1];
    const int k = std::max(1, static_cast<int>(std::lround(pieces * len / span)));
    for (int j = 1; j <= k; ++j) out.push_back(breaks[s - 1] + len * j / k);
  }
  return out;
}

struct CellRecord {
  Box box;
  double coarse = 0.0;
  double fine = 0.0;
  std::array<double, 8> children{};
  unsigned atom = 0;
  bool active = true;
  double err() const { return std::abs(fine - coarse); }
};

CubatureResult run_cubature(KernelEvaluator& kernel, const std::vector<Box>& initial,
                            const std::optional<RegionSet>& regions, const QuadConfig& config) {
  std::vector<CellRecord> cells;
  cells.reserve(initial.size() * 4);
  using Entry = std::pair<double, std::size_t>;
  std::priority_queue<Entry> queue;
  double total = 0.0, err_total = 0.0;

  auto atom_of = [&](const Box& box) -> unsigned {
    if (!regions) return 0;
    const auto& ax = kernel.axes();
    return regions->membership(ax[0].to_x(0.5 * (box.lo[0] + box.hi[0])),
                               ax[1].to_x(0.5 * (box.lo[1] + box.hi[1])),
                               ax[2].to_x(0.5 * (box.lo[2] + box.hi[2])));
  };
  auto add_cell = [&](const Box& box, double coarse) {
    CellRecord rec;
    rec.box = box;
    rec.coarse = coarse;
    for (unsigned c = 0; c < 8; ++c) {
      rec.children[c] = kernel.sum(box.child(c));
      rec.fine += rec.children[c];
    }
    rec.atom = atom_of(box);
    total += rec.fine;
    err_total += rec.err();
    cells.push_back(rec);
    queue.emplace(rec.err(), cells.size() - 1);
  };

  for (const Box& box : initial) add_cell(box, kernel.sum(box));

  std::size_t active = cells.size();
  std::size_t since_resum = 0;
  while (err_total > config.tol * total && !queue.empty()) {
    if (active + 7 > config.max_cells) {
      throw ConvergenceError("quadrature did not reach tolerance within the cell budget",
                             std::log(total) + kernel.offset() + kernel.constant(),
                             total > 0.0 ? err_total / total : kPosInf);
    }
    const std::size_t idx = queue.top().second;
    queue.pop();
    if (!cells[idx].active) continue;
    cells[idx].active = false;
    total -= cells[idx].fine;
    err_total -= cells[idx].err();
    const Box parent = cells[idx].box;
    const std::array<double, 8> child_values = cells[idx].children;
    for (unsigned c = 0; c < 8; ++c) add_cell(parent.child(c), child_values[c]);
    active += 7;
    if (++since_resum == 4096) {
      // guard against drift of the running sums
      total = err_total = 0.0;
      for (const auto& rec : cells)
        if (rec.active) {
          total += rec.fine;
          err_total += rec.err();
        }
      since_resum = 0;
    }
  }

  CubatureResult out;
  total = err_total = 0.0;
  for (const auto& rec : cells) {
    if (!rec.active) continue;
    total += rec.fine;
    err_total += rec.err();
    out.atoms[rec.atom] += rec.fine;
  }
  if (!(total > 0.0)) throw KernelVanished{};
  for (double& v : out.atoms) v /= total;
  out.log_z = std::log(total) + kernel.offset() + kernel.constant();
  out.err_est = err_total / total;
  out.cells = active;
  out.evaluations = kernel.evaluations();
  return out;
}

}  // namespace

CubatureResult integrate_two_component(const Dataset& data, const MixtureSpec& spec, const QuadConfig& config,
                                       const std::optional<RegionSet>& regions) {
  spec.validate();
  if (spec.components != 2) throw UnsupportedEngine("quadrature engine supports K = 2 only");
  if (data.family != spec.family) throw DomainError("dataset family does not match the model");
  if (regions) regions->validate();
  if (!(config.tol > 0.0) || config.order < 1 || config.init_a < 1 || config.init_b < 1)
    throw DomainError("invalid quadrature configuration");

  KernelEvaluator kernel(data, spec, config.order);
  const auto& axes = kernel.axes();
  std::vector<double> extra_a, extra_b;
  if (regions) {
    extra_a = {axes[0].to_u(regions->delta_a), axes[0].to_u(1.0 - regions->delta_a)};
    extra_b = {axes[1].to_u(regions->bstar - regions->delta_b), axes[1].to_u(regions->bstar + regions->delta_b)};
  }
  const std::vector<double> pa = axis_partition(axes[0], extra_a, config.init_a);
  const std::vector<double> pb = axis_partition(axes[1], extra_b, config.init_b);
  std::vector<Box> initial;
  for (std::size_t i = 0; i + 1 < pa.size(); ++i)
    for (std::size_t j = 0; j + 1 < pb.size(); ++j)
      for (std::size_t k = 0; k + 1 < pb.size(); ++k)
        initial.push_back(Box{{pa[i], pb[j], pb[k]}, {pa[i + 1], pb[j + 1], pb[k + 1]}});

  auto scan_offset = [&] {
    double best = kNegInf;
    kernel.set_offset(0.0);
    for (const Box& box : initial) {
      double m = kNegInf;
      try {
        kernel.sum(box, &m);
      } catch (const OffsetOverflow& o) {
        m = o.new_offset;
      }
      best = std::max(best, m);
    }
    kernel.set_offset(best);
  };

  // Binomial likelihoods are bounded by the multinomial maximum, which is a safe
  // offset unless the fitted likelihood is far below it.
  bool scanned = false;
  if (spec.family == Family::binomial && data.n() > 0) {
    kernel.set_offset(kernel.binomial_bound());
  } else {
    scan_offset();
    scanned = true;
  }
  for (int attempt = 0; attempt < 6; ++attempt) {
    try {
      return run_cubature(kernel, initial, regions, config);
    } catch (const OffsetOverflow& o) {
      kernel.set_offset(o.new_offset);
    } catch (const KernelVanished&) {
      if (scanned) break;
      scan_offset();
      scanned = true;
    }
  }
  throw ConvergenceError("quadrature could not find a stable scaling offset", kNegInf, kPosInf);
}

}  // namespace singlab
