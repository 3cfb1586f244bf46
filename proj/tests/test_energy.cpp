#include <doctest.h>

#include <boost/math/distributions/fisher_f.hpp>
#include <cmath>

#include "singlab/energy.hpp"
#include "singlab/evidence.hpp"

using namespace singlab;

namespace {

MixtureSpec binomial(int M, double eta1) {
  MixtureSpec s;
  s.trials = M;
  s.prior.eta1 = eta1;
  return s;
}

ReplicateSeries synthetic(const std::vector<std::int64_t>& grid, double (*f)(double)) {
  ReplicateSeries s;
  s.n = grid;
  for (auto n : grid) {
    const double v = f(static_cast<double>(n));
    s.values.push_back({v - 1e-3, v + 1e-3, v - 2e-3, v + 2e-3});
  }
  return s;
}

}  // namespace

TEST_SUITE("energy") {
  TEST_CASE("empty data has zero energy") {
    const MixtureSpec s = binomial(3, 1.0);
    const TrueModel truth{{1.0}, {0.5}};
    const Dataset d = make_dataset({}, std::vector<int>{}, s);
    CHECK(normalized_free_energy_x(d, s, truth, Engine::dp) == 0.0);
    CHECK(normalized_free_energy_xy(d, s, truth) == 0.0);
  }

  TEST_CASE("brute and dp engines give the same energy") {
    const MixtureSpec s = binomial(3, 0.5);
    const TrueModel truth{{1.0}, {0.5}};
    const Dataset d = sample_dataset(truth, s, 10, SeedSpec{4}, 0);
    CHECK(normalized_free_energy_x(d, s, truth, Engine::brute) ==
          doctest::Approx(normalized_free_energy_x(d, s, truth, Engine::dp)).epsilon(1e-12));
  }

  TEST_CASE("exact expectation over all coin datasets") {
    // M = 1: F~_X depends on the data only through the count of ones.
    const int n = 10;
    const MixtureSpec s = binomial(1, 1.0);
    const TrueModel truth{{1.0}, {0.5}};
    double exact = 0;
    double c = 1;
    for (int k = 0; k <= n; ++k) {
      std::vector<double> xs(n, 0.0);
      for (int i = 0; i < k; ++i) xs[i] = 1.0;
      const Dataset d = make_dataset(xs, std::nullopt, s);
      exact += c * std::pow(0.5, n) * (-log_evidence_brute(d, s) + n * std::log(0.5));
      c = c * (n - k) / (k + 1);
    }
    const int R = 4000;
    double sum = 0, sum2 = 0;
    for (int r = 0; r < R; ++r) {
      const double v = normalized_free_energy_x(sample_dataset(truth, s, n, SeedSpec{99}, r), s, truth, Engine::dp);
      sum += v;
      sum2 += v * v;
    }
    const double mean = sum / R;
    const double se = std::sqrt((sum2 / R - mean * mean) / (R - 1));
    CHECK(std::abs(mean - exact) <= 3 * se);
  }

  TEST_CASE("curve determinism and parallel purity") {
    const MixtureSpec s = binomial(3, 0.5);
    const TrueModel truth{{1.0}, {0.5}};
    RunSettings rs;
    const std::vector<std::int64_t> grid{20, 40, 80, 160};
    const EnergyCurve a = energy_curve(s, truth, grid, 6, rs);
    const EnergyCurve b = energy_curve(s, truth, grid, 6, rs);
    rs.threads = 3;
    const EnergyCurve c = energy_curve(s, truth, grid, 6, rs);
    CHECK(a.complete());
    CHECK(a.x.values == b.x.values);
    CHECK(a.xy.values == b.xy.values);
    CHECK(a.x.values == c.x.values);
    CHECK(a.seeds == c.seeds);
    for (std::size_t g = 0; g < grid.size(); ++g) {
      CHECK(a.x.values[g].size() == 6);
      CHECK(std::isfinite(a.x.se(g)));
    }
  }

  TEST_CASE("sweep equals separate curves") {
    const MixtureSpec s = binomial(3, 1.0);
    const TrueModel truth{{1.0}, {0.5}};
    const std::vector<std::int64_t> grid{20, 40, 80, 160};
    const auto sweep = energy_curve_sweep(s, truth, {0.25, 2.0}, grid, 4, {});
    MixtureSpec s2 = s;
    s2.prior.eta1 = 2.0;
    const EnergyCurve single = energy_curve(s2, truth, grid, 4, {});
    for (std::size_t g = 0; g < grid.size(); ++g)
      for (int r = 0; r < 4; ++r) {
        CHECK(sweep[1].x.values[g][r] == doctest::Approx(single.x.values[g][r]).epsilon(1e-12));
        CHECK(sweep[1].xy.values[g][r] == doctest::Approx(single.xy.values[g][r]).epsilon(1e-12));
      }
  }

  TEST_CASE("complete energy dominates on average") {
    const MixtureSpec s = binomial(3, 1.0);
    const EnergyCurve c = energy_curve(s, {{1.0}, {0.5}}, {25, 50, 100, 200}, 20, {});
    for (std::size_t g = 0; g < c.x.points(); ++g) CHECK(c.xy.mean(g) >= c.x.mean(g));
  }

  TEST_CASE("standard errors shrink with more replicates") {
    const MixtureSpec s = binomial(3, 1.0);
    const TrueModel truth{{1.0}, {0.5}};
    const std::vector<std::int64_t> grid{30, 60, 120, 240};
    const EnergyCurve small = energy_curve(s, truth, grid, 50, {});
    const EnergyCurve large = energy_curve(s, truth, grid, 200, {});
    double ratio = 0;
    for (std::size_t g = 0; g < grid.size(); ++g) ratio += small.x.se(g) / large.x.se(g) / grid.size();
    CHECK(ratio >= 1.4);
    CHECK(ratio <= 2.6);
  }

  TEST_CASE("replicate variance does not grow with n") {
    const MixtureSpec s = binomial(3, 1.0);
    const TrueModel truth{{1.0}, {0.5}};
    const int R = 30;
    std::vector<double> lo, hi;
    for (int r = 0; r < R; ++r) {
      lo.push_back(normalized_free_energy_x(sample_dataset(truth, s, 100, SeedSpec{20240521}, replicate_task(100, r)),
                                            s, truth, Engine::dp));
      hi.push_back(normalized_free_energy_x(
          sample_dataset(truth, s, 1600, SeedSpec{20240521}, replicate_task(1600, r)), s, truth, Engine::dp));
    }
    auto var = [](const std::vector<double>& v) {
      double m = 0, q = 0;
      for (double x : v) m += x;
      m /= v.size();
      for (double x : v) q += (x - m) * (x - m);
      return q / (v.size() - 1);
    };
    const boost::math::fisher_f f(R - 1, R - 1);
    CHECK(var(hi) / var(lo) <= boost::math::quantile(f, 0.99));
  }

  TEST_CASE("synthetic fits") {
    const std::vector<std::int64_t> grid{100, 200, 400, 800, 1600};
    const LambdaFit a = fit_lambda(synthetic(grid, [](double n) { return 0.75 * std::log(n) + 2.0; }),
                                   FitModel::ln_only);
    CHECK(a.lambda_hat == doctest::Approx(0.75).epsilon(1e-9));
    CHECK(a.intercept == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(a.ci_lo <= a.lambda_hat);
    CHECK(a.ci_hi >= a.lambda_hat);
    CHECK(a.n_points == 5);
    CHECK_FALSE(a.m_hat.has_value());
    const LambdaFit b = fit_lambda(
        synthetic(grid, [](double n) { return 0.9 * std::log(n) - std::log(std::log(n)) + 1.5; }),
        FitModel::ln_plus_lnln);
    CHECK(b.lambda_hat == doctest::Approx(0.9).epsilon(1e-8));
    REQUIRE(b.m_hat.has_value());
    CHECK(*b.m_hat == doctest::Approx(2.0).epsilon(1e-7));
  }

  TEST_CASE("generalization error of a synthetic curve") {
    const std::vector<std::int64_t> grid{100, 200, 400, 800};
    const auto g = generalization_error_curve(synthetic(grid, [](double n) { return 0.75 * std::log(n); }));
    REQUIRE(g.size() == 3);
    for (const auto& p : g) {
      CHECK(p.g_hat == doctest::Approx(0.75 / p.n_mid).epsilon(1e-9));
      CHECK(p.g_hat >= 0.0);
    }
  }

  TEST_CASE("replicate tasks do not collide") {
    CHECK(replicate_task(100, 0) != replicate_task(200, 0));
    CHECK(replicate_task(100, 1) != replicate_task(100, 0));
  }
}
