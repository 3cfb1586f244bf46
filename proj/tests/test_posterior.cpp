#include <doctest.h>

#include <cmath>
#include <random>

#include "oracle.hpp"
#include "singlab/evidence.hpp"
#include "singlab/posterior.hpp"

using namespace singlab;

namespace {

MixtureSpec binomial(int M, double eta1) {
  MixtureSpec s;
  s.trials = M;
  s.prior.eta1 = eta1;
  return s;
}

double log_likelihood(const Dataset& d, double a, double b1, double b2, int M) {
  double v = 0;
  for (double x : d.xs) {
    const int k = static_cast<int>(x);
    v += std::log(a * oracle::binom_pmf(M, k, b1) + (1 - a) * oracle::binom_pmf(M, k, b2));
  }
  return v;
}

MassCurve synthetic_curve(const std::vector<double>& u13, const std::vector<double>& w2) {
  MassCurve c;
  for (std::size_t i = 0; i < u13.size(); ++i) {
    MassPoint p;
    p.n = 100 << i;
    p.mean.w1 = u13[i] / 2;
    p.mean.w3 = u13[i] / 2;
    p.mean.w2 = w2[i];
    p.mean.rest = 1 - u13[i] - w2[i];
    c.points.push_back(p);
  }
  return c;
}

}  // namespace

TEST_SUITE("posterior") {
  TEST_CASE("prior is restored without data") {
    for (double eta : {0.5, 1.0, 2.0}) {
      const MixtureSpec s = binomial(3, eta);
      const GridPosterior g = grid_posterior(make_dataset({}, std::nullopt, s), s);
      double total = 0;
      for (double m : g.mass) total += m;
      CHECK(std::abs(total - 1.0) <= 1e-10);
      const auto marginal = g.marginal_density(0);
      for (std::size_t i = 0; i < g.nodes[0].size(); ++i) {
        const double a = g.nodes[0][i];
        const double dens = std::pow(a * (1 - a), eta - 1) / oracle::beta_fn(eta, eta);
        CHECK(std::abs(marginal[i] - dens) <= 1e-8 * std::max(1.0, dens));
      }
    }
  }

  TEST_CASE("mass table sums to one and the mode has the largest likelihood") {
    const MixtureSpec s = binomial(3, 1.0);
    const Dataset d = sample_dataset({{0.4, 0.6}, {0.2, 0.7}}, s, 150, SeedSpec{6}, 0);
    const GridPosterior g = grid_posterior(d, s);
    double total = 0;
    std::size_t best = 0;
    double best_density = -1;
    for (std::size_t i = 0; i < g.nodes[0].size(); ++i)
      for (std::size_t j = 0; j < g.nodes[1].size(); ++j)
        for (std::size_t k = 0; k < g.nodes[2].size(); ++k) {
          total += g.mass[g.index(i, j, k)];
          if (g.density(i, j, k) > best_density) {
            best_density = g.density(i, j, k);
            best = g.index(i, j, k);
          }
        }
    CHECK(std::abs(total - 1.0) <= 1e-10);
    const std::size_t nb = g.nodes[1].size(), nc = g.nodes[2].size();
    const double top = log_likelihood(d, g.nodes[0][best / (nb * nc)], g.nodes[1][(best / nc) % nb],
                                      g.nodes[2][best % nc], 3);
    std::mt19937_64 rng(1);
    for (int t = 0; t < 100; ++t) {
      const double other = log_likelihood(d, g.nodes[0][rng() % g.nodes[0].size()],
                                          g.nodes[1][rng() % nb], g.nodes[2][rng() % nc], 3);
      CHECK(top >= other - 1e-9);
    }
    CHECK(g.log_z == doctest::Approx(log_evidence_dp(d, s)).epsilon(1e-4));
  }

  TEST_CASE("grid masses agree with the adaptive cubature") {
    const MixtureSpec s = binomial(3, 2.0);
    const RegionSet regions{0.1, 0.1, 0.5};
    const Dataset d = sample_dataset({{1.0}, {0.5}}, s, 400, SeedSpec{10}, 0);
    GridConfig cfg;
    cfg.regions = regions;
    const RegionMasses g = grid_region_masses(grid_posterior(d, s, cfg), regions);
    const RegionMasses c = posterior_region_mass(d, s, regions);
    CHECK(g.w1 == doctest::Approx(c.w1).epsilon(1e-3));
    CHECK(g.w2 == doctest::Approx(c.w2).epsilon(1e-3));
    CHECK(g.w3 == doctest::Approx(c.w3).epsilon(1e-3));
    CHECK(g.rest == doctest::Approx(c.rest).epsilon(1e-3));
    CHECK(g.w1 == doctest::Approx(g.w3).epsilon(1e-10));
  }

  TEST_CASE("trend checks") {
    CHECK(monotone_trend({0.5, 0.4, 0.3, 0.35, 0.2}));
    CHECK_FALSE(monotone_trend({0.5, 0.6, 0.3, 0.35, 0.2}));
    CHECK(increasing_trend({0.1, 0.2, 0.3}));
    CHECK_FALSE(increasing_trend({0.3, 0.2, 0.1}));
  }

  TEST_CASE("phase detection on synthetic curves") {
    CHECK(detect_phase(synthetic_curve({0.6, 0.7, 0.8}, {0.2, 0.1, 0.05})) == Phase::eliminate);
    CHECK(detect_phase(synthetic_curve({0.3, 0.2, 0.1}, {0.4, 0.6, 0.8})) == Phase::use_all);
    CHECK(detect_phase(synthetic_curve({0.4, 0.4, 0.4}, {0.4, 0.4, 0.4})) == Phase::transition_ambiguous);
  }

  TEST_CASE("mass curve fields") {
    const MixtureSpec s = binomial(3, 0.25);
    const MassCurve c = mass_curve(s, {{1.0}, {0.5}}, {50, 100}, 2, {0.1, 0.1, 0.5}, {});
    REQUIRE(c.points.size() == 2);
    CHECK(c.errors.empty());
    for (const auto& p : c.points) {
      CHECK(p.replicates.size() == 2);
      CHECK(std::abs(p.mean.union_all() + p.mean.rest - 1.0) <= 1e-8);
      CHECK(p.mean.w1 == doctest::Approx(p.mean.w3).epsilon(1e-8));
    }
  }
}
