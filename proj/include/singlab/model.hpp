#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace singlab {

enum class Family { binomial, gaussian };

std::string_view to_string(Family family);
Family family_from_string(std::string_view name);

struct BetaHyper {
  double alpha = 1.0;
  double beta = 1.0;
};

/// Mean-zero normal prior on Gaussian component means; `bound` truncates the
/// parameter box used by the quadrature engine.
struct NormalHyper {
  double scale = 3.0;
  double bound = 10.0;
};

struct PriorHyper {
  double eta1 = 1.0;  // symmetric Dirichlet concentration
  BetaHyper beta;
  NormalHyper normal;
};

/// Learning-model family: K components of either Binomial(M, b) or N(b, 1).
struct MixtureSpec {
  Family family = Family::binomial;
  int trials = 3;      // M (binomial only)
  int components = 2;  // K
  PriorHyper prior;

  void validate() const;
  int component_dim() const { return 1; }
  int param_dim() const { return components - 1 + components * component_dim(); }
  bool discrete() const { return family == Family::binomial; }
  /// Number of support points {0..M}; zero for continuous families.
  int support_size() const { return discrete() ? trials + 1 : 0; }
};

/// Mixing weights on the simplex and one scalar parameter per component.
struct MixtureParams {
  std::vector<double> weights;
  std::vector<double> comps;

  int components() const { return static_cast<int>(weights.size()); }
  void validate(const MixtureSpec& spec) const;
};

/// True data-generating mixture. Minimality: all weights positive, all comps distinct.
struct TrueModel {
  std::vector<double> weights;
  std::vector<double> comps;

  int components() const { return static_cast<int>(weights.size()); }
  void validate(const MixtureSpec& spec) const;
  /// Embeds the true model into a K-component learner; true component k maps to label k.
  MixtureParams as_params(int K) const;
};

double log_component_density(double x, double b, const MixtureSpec& spec);
double component_density(double x, double b, const MixtureSpec& spec);

double mixture_density(double x, const MixtureParams& params, const MixtureSpec& spec);
/// a_y f(x|b_y), labels are 1-based.
double complete_density(double x, int y, const MixtureParams& params, const MixtureSpec& spec);

double true_density(double x, const TrueModel& truth, const MixtureSpec& spec);
/// q(x, y) with q(x, y) = 0 for y > K*.
double true_complete_density(double x, int y, const TrueModel& truth, const MixtureSpec& spec);

/// H_X(w) = KL(q(x) || p(x|w)); +infinity when p vanishes where q does not.
double kl_incomplete(const MixtureParams& params, const TrueModel& truth, const MixtureSpec& spec);
/// H_XY(w) under the identity label injection.
double kl_complete(const MixtureParams& params, const TrueModel& truth, const MixtureSpec& spec);

struct TrueEntropy {
  double s_x = 0.0;
  double s_xy = 0.0;
};
TrueEntropy entropy_true(const TrueModel& truth, const MixtureSpec& spec);

/// Fisher matrices in the coordinates w = (a_2..a_K, b_1..b_K), a_1 = 1 - sum a_k.
struct FisherPair {
  Eigen::MatrixXd complete;    // I_XY
  Eigen::MatrixXd incomplete;  // I_X
};

struct FisherOptions {
  /// Cross-check analytic scores against Richardson-extrapolated central differences.
  bool validate_scores = true;
  double validation_tol = 1e-4;
};

FisherPair fisher_matrices(const MixtureParams& params, const MixtureSpec& spec,
                           const FisherOptions& options = {});

/// Tr[I_XY I_X^{-1}]; throws RegularityError when cond(I_X) > 1e12.
double reg_lv_coefficient(const MixtureParams& params, const MixtureSpec& spec);

/// (1/2) ln det[I_XY I_X^{-1}], the constant of the complete-minus-incomplete free
/// energy difference under a quadratic (regular) posterior.
double reg_lv_log_det(const MixtureParams& params, const MixtureSpec& spec);

}  // namespace singlab
