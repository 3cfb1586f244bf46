#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "singlab/data.hpp"
#include "singlab/energy.hpp"
#include "singlab/evidence.hpp"
#include "singlab/model.hpp"

namespace singlab {

enum class EffectiveArea { w1_w3, intersections, w2 };
enum class Phase { eliminate, use_all, transition_ambiguous };

std::string_view to_string(EffectiveArea area);
std::string_view to_string(Phase phase);
Phase phase_from_string(std::string_view name);

struct TheoryPrediction {
  double lambda_xy = 0.0;
  int m_xy = 1;
  std::optional<double> lambda_x_exact;
  std::optional<int> m_x_exact;
  double lambda_x_upper = 0.0;
  double lambda_x_lower = 0.0;
  std::optional<double> dn_slope_exact;
  double dn_slope_lower = 0.0;
  std::optional<EffectiveArea> effective_area;
  std::optional<Phase> phase;
};

/// Learning coefficients of the complete and incomplete free energies and of D(n).
/// Exact incomplete values are known for the two-component binomial mixture with a
/// one-component truth (and for K = K*, where the model is regular); `trials`, when
/// given, is checked against K < M for the binomial family.
TheoryPrediction theory_predictions(int K, int Kstar, int d_c, double eta1, Family family,
                                    std::optional<int> trials = std::nullopt);

nlohmann::json to_json(const TheoryPrediction& t);

enum class LatentRoute { automatic, enumerate, dp };

/// E_{Y|X ~ q}[ln q(Y|X) - ln p(Y|X)] for one dataset, the per-dataset contribution to nD(n).
/// K* = 1: log Z(X) - log Z(X, 1^n). Otherwise the expectation over the true conditional is
/// enumerated (K*^n <= 2^20) or, for binomial K = K* = 2, summed exactly over (N1, s1).
double dataset_latent_error(const Dataset& data, const MixtureSpec& spec, const TrueModel& truth,
                            Engine engine = Engine::dp, LatentRoute route = LatentRoute::automatic,
                            const QuadConfig& quad = {});

/// Same quantity for several Dirichlet concentrations; label-independent work is shared.
std::vector<double> dataset_latent_error_sweep(const Dataset& data, const MixtureSpec& spec,
                                               const TrueModel& truth, const std::vector<double>& eta1_values,
                                               Engine engine = Engine::dp,
                                               LatentRoute route = LatentRoute::automatic,
                                               const QuadConfig& quad = {});

struct DnCurve {
  MixtureSpec spec;
  TrueModel truth;
  int replicates = 0;
  RunSettings settings;
  ReplicateSeries contributions;
  std::vector<std::vector<std::uint64_t>> seeds;
  std::vector<std::string> errors;
  LambdaFit fit;  // slope of the mean contribution against ln n
  std::optional<double> theory_slope;
  std::string theory_source;  // "exact", "lower_bound" or empty

  bool complete() const { return errors.empty(); }
};

DnCurve dn_curve(const MixtureSpec& spec, const TrueModel& truth, const std::vector<std::int64_t>& n_grid, int R,
                 const RunSettings& settings, const FitOptions& fit = {});

std::vector<DnCurve> dn_curve_sweep(const MixtureSpec& spec, const TrueModel& truth,
                                    const std::vector<double>& eta1_values, const std::vector<std::int64_t>& n_grid,
                                    int R, const RunSettings& settings, const FitOptions& fit = {});

enum class PeakMethod { exhaustive, icm_restarts };
PeakMethod peak_method_from_string(std::string_view name);

struct PeakResult {
  std::vector<int> ys;
  int labels_used = 0;
  double log_z = 0.0;
};

/// argmax_Y log Z(X, Y). ICM visits items in order and moves an item only for a strict
/// gain, trying labels lowest first; restart r starts from labels drawn with
/// derive_stream_seed(seed, r).
PeakResult peak_assignment(const Dataset& data, const MixtureSpec& spec, PeakMethod method, int restarts = 10,
                           std::uint64_t seed = 0);

}  // namespace singlab
