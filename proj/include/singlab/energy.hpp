#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "singlab/data.hpp"
#include "singlab/evidence.hpp"
#include "singlab/model.hpp"

namespace singlab {

/// Replicated values over a grid of sample sizes; NaN marks a failed cell.
struct ReplicateSeries {
  std::vector<std::int64_t> n;
  std::vector<std::vector<double>> values;  // [grid point][replicate]

  std::size_t points() const { return n.size(); }
  double mean(std::size_t i) const;
  /// Standard error of the mean over the finite replicates.
  double se(std::size_t i) const;
  bool complete() const;
};

/// Seed stream index of replicate r at sample size n; shared by every experiment so
/// that curves at different hyperparameters see identical datasets.
std::uint64_t replicate_task(std::int64_t n, int replicate);

struct RunSettings {
  std::uint64_t master_seed = 20240521;
  Engine engine = Engine::dp;
  QuadConfig quad;
  int threads = 1;
};

/// F~_X = -log Z(X) + sum_i ln q(x_i).
double normalized_free_energy_x(const Dataset& data, const MixtureSpec& spec, const TrueModel& truth, Engine engine,
                                const QuadConfig& quad = {});
/// F~_XY = -log Z(X, Y) + sum_i ln q(x_i, y_i) with the dataset's true labels.
double normalized_free_energy_xy(const Dataset& data, const MixtureSpec& spec, const TrueModel& truth);

struct EnergyCurve {
  MixtureSpec spec;
  TrueModel truth;
  int replicates = 0;
  RunSettings settings;
  ReplicateSeries x;   // F~_X
  ReplicateSeries xy;  // F~_XY
  std::vector<std::vector<std::uint64_t>> seeds;  // derived per-dataset stream seeds [grid point][replicate]
  std::vector<std::string> errors;

  bool complete() const { return errors.empty(); }
};

EnergyCurve energy_curve(const MixtureSpec& spec, const TrueModel& truth, const std::vector<std::int64_t>& n_grid,
                         int R, const RunSettings& settings);

/// One curve per Dirichlet concentration over the same datasets; with the dp engine each
/// dataset's split-count table is built once and reused for every concentration. The
/// complete engine fills only the F~_XY series.
std::vector<EnergyCurve> energy_curve_sweep(const MixtureSpec& spec, const TrueModel& truth,
                                            const std::vector<double>& eta1_values,
                                            const std::vector<std::int64_t>& n_grid, int R,
                                            const RunSettings& settings);

enum class FitModel { ln_only, ln_plus_lnln };
std::string_view to_string(FitModel model);
FitModel fit_model_from_string(std::string_view name);

struct LambdaFit {
  double lambda_hat = 0.0;
  double intercept = 0.0;
  std::optional<double> m_hat;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  std::size_t n_points = 0;
  FitModel model = FitModel::ln_only;
  bool weighted = true;
  std::vector<double> residuals;
};

struct FitOptions {
  int bootstrap = 1000;
  double level = 0.95;
  std::uint64_t seed = 1;
};

/// Weighted least squares of the mean curve on ln n (and -lnln n), with a
/// percentile bootstrap over replicates for the slope.
LambdaFit fit_lambda(const ReplicateSeries& series, FitModel model, const FitOptions& options = {});

struct GeneralizationPoint {
  double n_mid = 0.0;  // logarithmic mean of the two grid points
  double g_hat = 0.0;
  double se = 0.0;
};

/// Difference quotients of the mean F~_X between adjacent grid points.
std::vector<GeneralizationPoint> generalization_error_curve(const ReplicateSeries& curve_x);

}  // namespace singlab
