#include "singlab/latenterr.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <boost/random/uniform_int_distribution.hpp>

#include "singlab/errors.hpp"
#include "singlab/numerics.hpp"
#include "singlab/parallel.hpp"

namespace singlab {

std::string_view to_string(EffectiveArea area) {
  switch (area) {
    case EffectiveArea::w1_w3: return "W1_union_W3";
    case EffectiveArea::intersections: return "W1W2_union_W3W2";
    case EffectiveArea::w2: return "W2";
  }
  return "unknown";
}

std::string_view to_string(Phase phase) {
  switch (phase) {
    case Phase::eliminate: return "eliminate";
    case Phase::use_all: return "use_all";
    case Phase::transition_ambiguous: return "transition_ambiguous";
  }
  return "unknown";
}

Phase phase_from_string(std::string_view name) {
  if (name == "eliminate") return Phase::eliminate;
  if (name == "use_all") return Phase::use_all;
  if (name == "transition_ambiguous") return Phase::transition_ambiguous;
  throw DomainError("unknown phase '" + std::string(name) + "'");
}

TheoryPrediction theory_predictions(int K, int Kstar, int d_c, double eta1, Family family,
                                    std::optional<int> trials) {
  if (Kstar < 1 || K < Kstar) throw DomainError("theory needs K >= K* >= 1");
  if (d_c < 1) throw DomainError("component dimension must be at least 1");
  if (!(eta1 > 0.0) || !std::isfinite(eta1)) throw DomainError("eta1 must be positive");
  if (family == Family::binomial && trials && !(K < *trials))
    throw DomainError("binomial theory values need K < M (K=" + std::to_string(K) + ", M=" +
                      std::to_string(*trials) + ")");
  const double base = (Kstar - 1 + Kstar * d_c) / 2.0;
  const int redundant = K - Kstar;
  TheoryPrediction t;
  t.lambda_xy = base + redundant * eta1;
  t.lambda_x_lower = base;
  t.lambda_x_upper = base + redundant * (eta1 <= d_c ? eta1 : static_cast<double>(d_c)) / 2.0;
  t.dn_slope_lower = redundant * eta1 / 2.0;
  if (redundant == 0) {
    t.lambda_x_exact = base;
    t.m_x_exact = 1;
    t.dn_slope_exact = 0.0;
  } else if (family == Family::binomial && K == 2 && Kstar == 1 && d_c == 1) {
    t.lambda_x_exact = eta1 <= 0.5 ? (1.0 + eta1) / 2.0 : 0.75;
    t.m_x_exact = eta1 == 0.5 ? 2 : 1;
    t.dn_slope_exact = t.lambda_xy - *t.lambda_x_exact;
    t.effective_area = eta1 < 0.5 ? EffectiveArea::w1_w3 : eta1 == 0.5 ? EffectiveArea::intersections
                                                                         : EffectiveArea::w2;
    t.phase = eta1 <= 0.5 ? Phase::eliminate : Phase::use_all;
  }
  return t;
}

nlohmann::json to_json(const TheoryPrediction& t) {
  nlohmann::json j;
  j["lambda_xy"] = t.lambda_xy;
  j["m_xy"] = t.m_xy;
  j["lambda_x_exact"] = t.lambda_x_exact ? nlohmann::json(*t.lambda_x_exact) : nlohmann::json(nullptr);
  j["m_x_exact"] = t.m_x_exact ? nlohmann::json(*t.m_x_exact) : nlohmann::json(nullptr);
  j["lambda_x_upper"] = t.lambda_x_upper;
  j["lambda_x_lower"] = t.lambda_x_lower;
  j["dn_slope_exact"] = t.dn_slope_exact ? nlohmann::json(*t.dn_slope_exact) : nlohmann::json(nullptr);
  j["dn_slope_lower"] = t.dn_slope_lower;
  j["effective_area"] =
      t.effective_area ? nlohmann::json(std::string(to_string(*t.effective_area))) : nlohmann::json(nullptr);
  j["phase"] = t.phase ? nlohmann::json(std::string(to_string(*t.phase))) : nlohmann::json(nullptr);
  return j;
}

// ---------------------------------------------------------------------------

namespace {

std::vector<MixtureSpec> specs_for(const MixtureSpec& spec, const std::vector<double>& eta1_values) {
  std::vector<MixtureSpec> out(eta1_values.size(), spec);
  for (std::size_t e = 0; e < out.size(); ++e) {
    out[e].prior.eta1 = eta1_values[e];
    out[e].validate();
  }
  return out;
}

std::vector<double> log_z_sweep(const Dataset& data, const std::vector<MixtureSpec>& specs, Engine engine,
                                const QuadConfig& quad) {
  std::vector<double> out(specs.size());
  if (engine == Engine::dp) {
    const SplitCountTable table = build_split_counts(data, specs.front());
    for (std::size_t e = 0; e < specs.size(); ++e) out[e] = log_evidence_from_split_counts(table, specs[e]);
    return out;
  }
  if (engine == Engine::complete) throw UnsupportedEngine("the complete engine does not compute Z(X)");
  for (std::size_t e = 0; e < specs.size(); ++e) out[e] = log_evidence(data, specs[e], engine, quad).log_z;
  return out;
}

/// q(y | x_i) for y = 1..K*, row-major by item.
std::vector<double> true_label_posterior(const Dataset& data, const TrueModel& truth, const MixtureSpec& spec) {
  const int Ks = truth.components();
  std::vector<double> out(data.n() * Ks);
  for (std::size_t i = 0; i < data.n(); ++i) {
    double total = 0.0;
    for (int y = 0; y < Ks; ++y) {
      out[i * Ks + y] = true_complete_density(data.xs[i], y + 1, truth, spec);
      total += out[i * Ks + y];
    }
    for (int y = 0; y < Ks; ++y) out[i * Ks + y] /= total;
  }
  return out;
}

double xlogx(double p) { return p > 0.0 ? p * std::log(p) : 0.0; }

// E_q[log Z(X, Y)] by enumeration of {1..K*}^n.
std::vector<double> expected_complete_enumerate(const Dataset& data, const std::vector<MixtureSpec>& specs,
                                                const std::vector<double>& post, int Ks) {
  const std::size_t n = data.n();
  if (static_cast<double>(n) * std::log2(static_cast<double>(Ks)) > 20.0 + 1e-12)
    throw GuardRefusal("enumeration of K*^n = " + std::to_string(Ks) + "^" + std::to_string(n) +
                       " true-label assignments exceeds the limit 2^20");
  const int K = specs.front().components;
  std::vector<CompleteEvidence> evs;
  for (const auto& s : specs) evs.emplace_back(data, s);
  std::vector<int> ys(n, 1);
  LabelCounts counts = LabelCounts::from_labels(data, ys, K);
  std::vector<double> acc(specs.size(), 0.0);
  double mass = 0.0;
  while (true) {
    double logq = 0.0;
    for (std::size_t i = 0; i < n; ++i) logq += std::log(post[i * Ks + ys[i] - 1]);
    const double w = std::exp(logq);
    mass += w;
    if (w > 0.0)
      for (std::size_t e = 0; e < evs.size(); ++e) acc[e] += w * evs[e](counts);
    std::size_t i = 0;
    for (; i < n; ++i) {
      const int old = ys[i];
      const int next = old == Ks ? 1 : old + 1;
      ys[i] = next;
      --counts.occupancy[old - 1];
      counts.sums[old - 1] -= data.xs[i];
      ++counts.occupancy[next - 1];
      counts.sums[next - 1] += data.xs[i];
      if (next != 1) break;
    }
    if (i == n) break;
  }
  for (double& v : acc) v /= mass;
  return acc;
}

// E_q[log Z(X, Y)] for binomial K = K* = 2: j_m ~ Bin(c_m, pi_m) items of value m go to
// component 1, independently over m; the distribution of (N1, s1) is built by convolution.
std::vector<double> expected_complete_dp(const Dataset& data, const std::vector<MixtureSpec>& specs,
                                         const std::vector<double>& post) {
  const MixtureSpec& spec = specs.front();
  if (spec.family != Family::binomial || spec.components != 2)
    throw UnsupportedEngine("latent-error dp route requires binomial K = 2");
  const int M = spec.trials;
  const std::int64_t n = static_cast<std::int64_t>(data.n());
  std::int64_t S = 0;
  std::vector<double> pi(M + 1, 0.0);
  for (std::size_t i = 0; i < data.n(); ++i) {
    const int m = static_cast<int>(std::lround(data.xs[i]));
    pi[m] = post[i * 2];
  }
  for (int m = 0; m <= M; ++m) S += m * data.hist[m];
  const std::size_t stride = static_cast<std::size_t>(S + 1);
  const std::size_t cells = static_cast<std::size_t>(n + 1) * stride;
  if (cells > kSplitTableLimit) throw GuardRefusal("latent-error dp table exceeds " + std::to_string(kSplitTableLimit));
  std::vector<double> T(cells, 0.0);
  T[0] = 1.0;
  std::int64_t n_max = 0, s_max = 0;
  constexpr double kPrune = 1e-18;
  std::vector<double> pmf;
  for (int m = 0; m <= M; ++m) {
    const std::int64_t c = data.hist[m];
    if (c == 0) continue;
    pmf.assign(c + 1, 0.0);
    double pmax = 0.0;
    for (std::int64_t j = 0; j <= c; ++j) {
      double lp = log_choose(static_cast<int>(c), static_cast<int>(j));
      lp += j == 0 ? 0.0 : j * std::log(pi[m]);
      lp += j == c ? 0.0 : (c - j) * std::log1p(-pi[m]);
      pmf[j] = std::exp(lp);
      pmax = std::max(pmax, pmf[j]);
    }
    std::int64_t jlo = 0, jhi = c;
    while (pmf[jlo] < kPrune * pmax) ++jlo;
    while (pmf[jhi] < kPrune * pmax) --jhi;
    double tmax = 0.0;
    for (std::int64_t N = n_max; N >= 0; --N) {
      double* row = T.data() + N * stride;
      for (std::int64_t s = s_max; s >= 0; --s) {
        const double v = row[s];
        if (v == 0.0) continue;
        row[s] = jlo == 0 ? v * pmf[0] : 0.0;
        double* target = row + s + std::max<std::int64_t>(jlo, 1) * static_cast<std::int64_t>(stride + m);
        for (std::int64_t j = std::max<std::int64_t>(jlo, 1); j <= jhi; ++j) {
          *target += v * pmf[j];
          target += stride + m;
        }
      }
    }
    n_max += jhi;
    s_max += jhi * m;
    for (std::int64_t N = 0; N <= n_max; ++N)
      for (std::int64_t s = 0; s <= s_max; ++s) tmax = std::max(tmax, T[N * stride + s]);
    for (std::int64_t N = 0; N <= n_max; ++N)
      for (std::int64_t s = 0; s <= s_max; ++s)
        if (T[N * stride + s] < kPrune * tmax) T[N * stride + s] = 0.0;
  }
  std::vector<double> acc(specs.size(), 0.0);
  double mass = 0.0;
  std::vector<CompleteEvidence> evs;
  for (const auto& s : specs) evs.emplace_back(data, s);
  for (std::int64_t N = 0; N <= n_max; ++N)
    for (std::int64_t s = 0; s <= s_max; ++s) {
      const double p = T[N * stride + s];
      if (p == 0.0) continue;
      mass += p;
      for (std::size_t e = 0; e < evs.size(); ++e)
        acc[e] += p * (evs[e].dirichlet_part2(N, n - N) + evs[e].component_part(N, static_cast<double>(s)) +
                       evs[e].component_part(n - N, static_cast<double>(S - s)));
    }
  for (std::size_t e = 0; e < evs.size(); ++e) acc[e] = acc[e] / mass + evs[e].data_constant();
  return acc;
}

}  // namespace

std::vector<double> dataset_latent_error_sweep(const Dataset& data, const MixtureSpec& spec,
                                               const TrueModel& truth, const std::vector<double>& eta1_values,
                                               Engine engine, LatentRoute route, const QuadConfig& quad) {
  spec.validate();
  truth.validate(spec);
  if (truth.components() > spec.components) throw DomainError("latent error needs K >= K*");
  if (eta1_values.empty()) return {};
  if (data.n() == 0) return std::vector<double>(eta1_values.size(), 0.0);
  const std::vector<MixtureSpec> specs = specs_for(spec, eta1_values);
  const int Ks = truth.components();

  if (Ks == 1) {
    const std::vector<double> lz = log_z_sweep(data, specs, engine, quad);
    const std::vector<int> ones(data.n(), 1);
    std::vector<double> out(specs.size());
    for (std::size_t e = 0; e < specs.size(); ++e) out[e] = lz[e] - log_evidence_complete(data, ones, specs[e]);
    return out;
  }

  if (route == LatentRoute::automatic)
    route = spec.family == Family::binomial && spec.components == 2 && Ks == 2 ? LatentRoute::dp
                                                                               : LatentRoute::enumerate;
  const std::vector<double> post = true_label_posterior(data, truth, spec);
  double entropy_term = 0.0;
  for (double p : post) entropy_term += xlogx(p);
  const std::vector<double> expected = route == LatentRoute::dp ? expected_complete_dp(data, specs, post)
                                                                : expected_complete_enumerate(data, specs, post, Ks);
  const std::vector<double> lz = log_z_sweep(data, specs, engine, quad);
  std::vector<double> out(specs.size());
  for (std::size_t e = 0; e < specs.size(); ++e) out[e] = entropy_term - expected[e] + lz[e];
  return out;
}

double dataset_latent_error(const Dataset& data, const MixtureSpec& spec, const TrueModel& truth, Engine engine,
                            LatentRoute route, const QuadConfig& quad) {
  return dataset_latent_error_sweep(data, spec, truth, {spec.prior.eta1}, engine, route, quad).front();
}

// ---------------------------------------------------------------------------

std::vector<DnCurve> dn_curve_sweep(const MixtureSpec& spec, const TrueModel& truth,
                                    const std::vector<double>& eta1_values, const std::vector<std::int64_t>& n_grid,
                                    int R, const RunSettings& settings, const FitOptions& fit) {
  spec.validate();
  truth.validate(spec);
  if (n_grid.size() < 4) throw DomainError("a D(n) curve needs at least 4 grid points");
  if (R < 1) throw DomainError("replicate count must be positive");
  const std::size_t G = n_grid.size(), E = eta1_values.size();
  const std::vector<MixtureSpec> specs = specs_for(spec, eta1_values);
  std::vector<DnCurve> curves(E);
  for (std::size_t e = 0; e < E; ++e) {
    curves[e].spec = specs[e];
    curves[e].truth = truth;
    curves[e].replicates = R;
    curves[e].settings = settings;
    curves[e].contributions.n = n_grid;
    curves[e].contributions.values.assign(G, std::vector<double>(R, std::numeric_limits<double>::quiet_NaN()));
    curves[e].seeds.assign(G, std::vector<std::uint64_t>(R, 0));
  }
  std::vector<std::string> messages(G * R);
  const SeedSpec seed{settings.master_seed};
  parallel_for(G * R, settings.threads, [&](std::size_t cell) {
    const std::size_t g = cell / R;
    const int r = static_cast<int>(cell % R);
    const std::int64_t n = n_grid[g];
    const Dataset data = sample_dataset(truth, spec, static_cast<std::size_t>(n), seed, replicate_task(n, r));
    for (std::size_t e = 0; e < E; ++e) curves[e].seeds[g][r] = SeedSpec{data.seed}.stream(data.task);
    try {
      const std::vector<double> v =
          dataset_latent_error_sweep(data, spec, truth, eta1_values, settings.engine, LatentRoute::automatic,
                                     settings.quad);
      for (std::size_t e = 0; e < E; ++e) curves[e].contributions.values[g][r] = v[e];
    } catch (const Error& err) {
      messages[cell] = "n=" + std::to_string(n) + " replicate=" + std::to_string(r) + ": " + err.what();
    }
  });
  for (std::size_t e = 0; e < E; ++e) {
    DnCurve& c = curves[e];
    for (const auto& m : messages)
      if (!m.empty()) c.errors.push_back(m);
    bool fittable = true;
    for (std::size_t g = 0; g < G; ++g)
      if (!std::isfinite(c.contributions.mean(g)) || n_grid[g] < 2) fittable = false;
    if (fittable) c.fit = fit_lambda(c.contributions, FitModel::ln_only, fit);
    try {
      const TheoryPrediction t = theory_predictions(spec.components, truth.components(), spec.component_dim(),
                                                    eta1_values[e], spec.family,
                                                    spec.family == Family::binomial ? std::optional<int>(spec.trials)
                                                                                    : std::nullopt);
      if (t.dn_slope_exact) {
        c.theory_slope = *t.dn_slope_exact;
        c.theory_source = "exact";
      } else {
        c.theory_slope = t.dn_slope_lower;
        c.theory_source = "lower_bound";
      }
    } catch (const DomainError&) {
    }
  }
  return curves;
}

DnCurve dn_curve(const MixtureSpec& spec, const TrueModel& truth, const std::vector<std::int64_t>& n_grid, int R,
                 const RunSettings& settings, const FitOptions& fit) {
  return dn_curve_sweep(spec, truth, {spec.prior.eta1}, n_grid, R, settings, fit).front();
}

// ---------------------------------------------------------------------------

PeakMethod peak_method_from_string(std::string_view name) {
  if (name == "exhaustive") return PeakMethod::exhaustive;
  if (name == "icm_restarts" || name == "icm") return PeakMethod::icm_restarts;
  throw DomainError("unknown peak method '" + std::string(name) + "'");
}

namespace {

int count_used(const std::vector<std::int64_t>& occupancy) {
  return static_cast<int>(std::count_if(occupancy.begin(), occupancy.end(), [](std::int64_t c) { return c > 0; }));
}

}  // namespace

PeakResult peak_assignment(const Dataset& data, const MixtureSpec& spec, PeakMethod method, int restarts,
                           std::uint64_t seed) {
  spec.validate();
  const int K = spec.components;
  const std::size_t n = data.n();
  PeakResult best;
  best.log_z = kNegInf;
  if (method == PeakMethod::exhaustive) {
    enumerate_assignments(data, spec, [&](std::span<const int> ys, double v) {
      if (v > best.log_z) {
        best.log_z = v;
        best.ys.assign(ys.begin(), ys.end());
      }
    });
    best.labels_used = count_used(LabelCounts::from_labels(data, best.ys, K).occupancy);
    return best;
  }

  if (restarts < 1) throw DomainError("icm needs at least one restart");
  const CompleteEvidence ev(data, spec);
  for (int r = 0; r < restarts; ++r) {
    std::mt19937_64 rng(derive_stream_seed(seed, static_cast<std::uint64_t>(r)));
    boost::random::uniform_int_distribution<int> pick(1, K);
    std::vector<int> ys(n);
    for (auto& y : ys) y = pick(rng);
    LabelCounts c = LabelCounts::from_labels(data, ys, K);
    std::vector<double> comp(K);
    for (int k = 0; k < K; ++k) comp[k] = ev.component_part(c.occupancy[k], c.sums[k]);
    double dm = ev.dirichlet_part(c.occupancy);
    bool changed = true;
    while (changed) {
      changed = false;
      for (std::size_t i = 0; i < n; ++i) {
        const int from = ys[i] - 1;
        const double x = data.xs[i];
        const double current = dm + comp[from];
        int best_k = from;
        double best_gain = 0.0;
        double best_dm = dm, best_from = comp[from], best_to = 0.0;
        // remove item i
        --c.occupancy[from];
        c.sums[from] -= x;
        const double from_removed = ev.component_part(c.occupancy[from], c.sums[from]);
        for (int k = 0; k < K; ++k) {
          if (k == from) continue;
          ++c.occupancy[k];
          c.sums[k] += x;
          const double to_added = ev.component_part(c.occupancy[k], c.sums[k]);
          const double dm_new = ev.dirichlet_part(c.occupancy);
          --c.occupancy[k];
          c.sums[k] -= x;
          const double gain = dm_new + from_removed + to_added - comp[k] - current;
          if (gain > best_gain + 1e-12) {
            best_gain = gain;
            best_k = k;
            best_dm = dm_new;
            best_from = from_removed;
            best_to = to_added;
          }
        }
        if (best_k == from) {
          ++c.occupancy[from];
          c.sums[from] += x;
          continue;
        }
        ++c.occupancy[best_k];
        c.sums[best_k] += x;
        comp[from] = best_from;
        comp[best_k] = best_to;
        dm = best_dm;
        ys[i] = best_k + 1;
        changed = true;
      }
    }
    const double score = ev(c);
    if (score > best.log_z) {
      best.log_z = score;
      best.ys = ys;
      best.labels_used = count_used(c.occupancy);
    }
  }
  return best;
}

}  // namespace singlab
