#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "oracle.hpp"
#include "singlab/errors.hpp"
#include "singlab/evidence.hpp"

using namespace singlab;

namespace {

MixtureSpec binomial(int M, double eta1 = 1.0) {
  MixtureSpec s;
  s.trials = M;
  s.components = 2;
  s.prior.eta1 = eta1;
  return s;
}

Dataset random_binomial(std::mt19937_64& rng, int M, int n) {
  std::vector<double> xs;
  for (int i = 0; i < n; ++i) xs.push_back(static_cast<double>(rng() % (M + 1)));
  return make_dataset(xs, std::nullopt, binomial(M));
}

}  // namespace

TEST_SUITE("evidence") {
  TEST_CASE("complete evidence examples") {
    const MixtureSpec s = binomial(2);
    const Dataset empty = make_dataset({}, std::vector<int>{}, s);
    CHECK(log_evidence_complete(empty, s) == 0.0);
    const Dataset one = make_dataset({1}, std::vector<int>{1}, s);
    CHECK(log_evidence_complete(one, s) == doctest::Approx(std::log(1.0 / 6.0)).epsilon(1e-14));
    CHECK(std::log(1.0 / 6.0) == doctest::Approx(-1.791759).epsilon(1e-6));
  }

  TEST_CASE("complete evidence by closed products") {
    // Dirichlet-multinomial times Beta-binomial, written out with gamma functions.
    const MixtureSpec s = binomial(3, 0.7);
    const std::vector<double> xs{0, 3, 1, 2, 2, 1};
    const std::vector<int> ys{1, 2, 1, 2, 2, 1};
    const Dataset d = make_dataset(xs, ys, s);
    int n1 = 0, s1 = 0, s2 = 0;
    double choose = 1;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      choose *= oracle::binom_pmf(3, static_cast<int>(xs[i]), 0.5) * 8;
      if (ys[i] == 1) {
        ++n1;
        s1 += static_cast<int>(xs[i]);
      } else {
        s2 += static_cast<int>(xs[i]);
      }
    }
    const int n2 = 6 - n1;
    const double eta = 0.7;
    const double dir = std::tgamma(2 * eta) / (std::tgamma(eta) * std::tgamma(eta)) * std::tgamma(eta + n1) *
                       std::tgamma(eta + n2) / std::tgamma(2 * eta + 6);
    const double comp = oracle::beta_fn(1 + s1, 1 + 3 * n1 - s1) * oracle::beta_fn(1 + s2, 1 + 3 * n2 - s2);
    CHECK(log_evidence_complete(d, s) == doctest::Approx(std::log(choose * dir * comp)).epsilon(1e-12));
  }

  TEST_CASE("complete Gaussian evidence") {
    MixtureSpec g;
    g.family = Family::gaussian;
    g.prior.normal.scale = 2.0;
    const Dataset d = make_dataset({0.8}, std::vector<int>{1}, g);
    const double var = 1 + 4.0;
    const double marginal = std::exp(-0.5 * 0.64 / var) / std::sqrt(2 * M_PI * var);
    CHECK(log_evidence_complete(d, g) == doctest::Approx(std::log(0.5 * marginal)).epsilon(1e-12));
  }

  TEST_CASE("permutation invariance") {
    const MixtureSpec s = binomial(4, 0.4);
    std::vector<double> xs{0, 1, 4, 3, 2, 2, 1, 0};
    std::vector<int> ys{1, 1, 2, 2, 1, 2, 1, 2};
    const double base = log_evidence_complete(make_dataset(xs, ys, s), s);
    const double base_x = log_evidence_brute(make_dataset(xs, std::nullopt, s), s);
    std::mt19937_64 rng(1);
    std::vector<std::size_t> perm(xs.size());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<double> px;
    std::vector<int> py;
    for (auto i : perm) {
      px.push_back(xs[i]);
      py.push_back(ys[i]);
    }
    CHECK(log_evidence_complete(make_dataset(px, py, s), s) == doctest::Approx(base).epsilon(1e-13));
    CHECK(log_evidence_brute(make_dataset(px, std::nullopt, s), s) == doctest::Approx(base_x).epsilon(1e-13));
  }

  TEST_CASE("brute-force evidence examples") {
    const MixtureSpec s = binomial(2);
    CHECK(log_evidence_brute(make_dataset({}, std::nullopt, s), s) == 0.0);
    CHECK(log_evidence_brute(make_dataset({1}, std::nullopt, s), s) ==
          doctest::Approx(std::log(1.0 / 3.0)).epsilon(1e-14));
  }

  TEST_CASE("label posterior normalizes") {
    std::mt19937_64 rng(4);
    for (int n = 1; n <= 8; ++n) {
      const Dataset d = random_binomial(rng, 3, n);
      const MixtureSpec s = binomial(3, 0.25 + 0.25 * n);
      const double z = log_evidence_brute(d, s);
      double total = 0;
      enumerate_assignments(d, s, [&](std::span<const int> ys, double logz) {
        total += std::exp(logz - z);
        CHECK(logz == doctest::Approx(log_evidence_complete(d, ys, s)).epsilon(1e-12));
      });
      CHECK(std::abs(total - 1.0) <= 1e-12);
    }
  }

  TEST_CASE("enumeration guard") {
    std::mt19937_64 rng(4);
    CHECK_THROWS_AS(log_evidence_brute(random_binomial(rng, 3, 25), binomial(3)), GuardRefusal);
  }

  TEST_CASE("dynamic programming matches brute force") {
    std::mt19937_64 rng(9);
    for (int t = 0; t < 40; ++t) {
      const int n = static_cast<int>(rng() % 11);
      const int M = 1 + static_cast<int>(rng() % 6);
      MixtureSpec s = binomial(M, 0.1 + 3.0 * oracle::random_unit(rng));
      s.prior.beta = {0.5 + 2 * oracle::random_unit(rng), 0.5 + 2 * oracle::random_unit(rng)};
      const Dataset d = random_binomial(rng, M, n);
      CHECK(std::abs(log_evidence_dp(d, s) - log_evidence_brute(d, s)) <= 1e-9);
    }
    CHECK(log_evidence_dp(make_dataset({}, std::nullopt, binomial(3)), binomial(3)) == 0.0);
  }

  TEST_CASE("identical observations collapse to one sum") {
    const int n = 7, M = 4, m = 3;
    const double eta = 0.6;
    const MixtureSpec s = binomial(M, eta);
    const Dataset d = make_dataset(std::vector<double>(n, m), std::nullopt, s);
    double z = 0;
    const double cm = oracle::binom_pmf(M, m, 0.5) * std::pow(2.0, M);
    for (int j = 0; j <= n; ++j) {
      double c = 1;
      for (int i = 1; i <= j; ++i) c = c * (n - j + i) / i;
      const double dir = std::tgamma(2 * eta) / (std::tgamma(eta) * std::tgamma(eta)) * std::tgamma(eta + j) *
                         std::tgamma(eta + n - j) / std::tgamma(2 * eta + n);
      z += c * dir * oracle::beta_fn(1 + m * j, 1 + (M - m) * j) *
           oracle::beta_fn(1 + m * (n - j), 1 + (M - m) * (n - j));
    }
    z *= std::pow(cm, n);
    CHECK(log_evidence_dp(d, s) == doctest::Approx(std::log(z)).epsilon(1e-12));
  }

  TEST_CASE("split-count table is reusable across concentrations") {
    std::mt19937_64 rng(2);
    const Dataset d = random_binomial(rng, 3, 60);
    const SplitCountTable table = build_split_counts(d, binomial(3));
    for (double eta : {0.25, 0.5, 2.0}) {
      const MixtureSpec s = binomial(3, eta);
      CHECK(log_evidence_from_split_counts(table, s) == doctest::Approx(log_evidence_dp(d, s)).epsilon(1e-14));
    }
  }

  TEST_CASE("quadrature matches dynamic programming") {
    std::mt19937_64 rng(21);
    for (int t = 0; t < 20; ++t) {
      const int n = std::vector<int>{10, 100, 500}[t % 3];
      const MixtureSpec s = binomial(3, std::vector<double>{0.25, 1.0, 2.0}[t % 3]);
      const TrueModel truth = t % 2 ? TrueModel{{1.0}, {0.5}} : TrueModel{{0.4, 0.6}, {0.2, 0.7}};
      const Dataset d = sample_dataset(truth, s, n, SeedSpec{rng()}, t);
      const EvidenceResult q = log_evidence_quad(d, s);
      CHECK(std::abs(q.log_z - log_evidence_dp(d, s)) <= 1e-4);
      CHECK(q.err_est > 0.0);
      CHECK(q.engine == Engine::quad);
    }
  }

  TEST_CASE("quadrature on the prior alone") {
    CHECK(std::abs(log_evidence_quad(make_dataset({}, std::nullopt, binomial(3)), binomial(3)).log_z) <= 1e-10);
    MixtureSpec g;
    g.family = Family::gaussian;
    CHECK(std::abs(log_evidence_quad(make_dataset({}, std::nullopt, g), g).log_z) <= 1e-10);
  }

  TEST_CASE("tighter tolerance shrinks the quadrature error") {
    const MixtureSpec s = binomial(3, 0.5);
    const Dataset d = sample_dataset({{1.0}, {0.5}}, s, 200, SeedSpec{77}, 0);
    const double exact = log_evidence_dp(d, s);
    QuadConfig loose, tight;
    loose.tol = 1e-3;
    tight.tol = 1e-7;
    const double e_loose = std::abs(log_evidence_quad(d, s, loose).log_z - exact);
    const double e_tight = std::abs(log_evidence_quad(d, s, tight).log_z - exact);
    CHECK(e_tight <= std::max(e_loose, 1e-12));
    CHECK(e_tight <= 1e-7);
  }

  TEST_CASE("Gaussian quadrature agrees with a brute-force sum over labels") {
    // The truncation box at +-10 carries negligible prior mass for scale 1.
    MixtureSpec g;
    g.family = Family::gaussian;
    g.prior.normal.scale = 1.0;
    const Dataset d = make_dataset({-0.4, 1.3, 0.2, 2.1, -1.0}, std::nullopt, g);
    CHECK(std::abs(log_evidence_quad(d, g).log_z - log_evidence_brute(d, g)) <= 1e-5);
  }

  TEST_CASE("region masses") {
    const MixtureSpec s = binomial(3, 1.0);
    const RegionSet regions{0.1, 0.1, 0.5};
    const RegionMasses prior = posterior_region_mass(make_dataset({}, std::nullopt, s), s, regions);
    CHECK(prior.w1 == doctest::Approx(0.1 * 0.2).epsilon(1e-8));
    CHECK(prior.w2 == doctest::Approx(0.2 * 0.2).epsilon(1e-8));
    CHECK(prior.w3 == doctest::Approx(0.1 * 0.2).epsilon(1e-8));
    CHECK(prior.w12 == doctest::Approx(0.1 * 0.2 * 0.2).epsilon(1e-8));
    CHECK(prior.w13 == 0.0);

    // Beta(2, 2) tail of the weight: 1 - F(0.9) with F(a) = 3a^2 - 2a^3.
    const MixtureSpec s2 = binomial(3, 2.0);
    const RegionMasses p2 = posterior_region_mass(make_dataset({}, std::nullopt, s2), s2, regions);
    CHECK(p2.w1 == doctest::Approx((1 - (3 * 0.81 - 2 * 0.729)) * 0.2).epsilon(1e-8));

    const Dataset d = sample_dataset({{1.0}, {0.5}}, s, 200, SeedSpec{3}, 0);
    const RegionMasses m = posterior_region_mass(d, s, regions);
    for (double v : {m.w1, m.w2, m.w3, m.w12, m.w13, m.w23, m.rest}) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
    CHECK(std::abs(m.union_all() + m.rest - 1.0) <= 1e-9 + 2 * m.err_est);
    CHECK(m.w1 == doctest::Approx(m.w3).epsilon(1e-8));
  }

  TEST_CASE("engine dispatch") {
    const MixtureSpec s = binomial(3);
    const Dataset d = make_dataset({0, 1, 2, 3}, std::nullopt, s);
    CHECK(log_evidence(d, s, Engine::brute).err_est == 0.0);
    CHECK(log_evidence(d, s, Engine::dp).log_z == doctest::Approx(log_evidence(d, s, Engine::brute).log_z));
    CHECK_THROWS_AS(log_evidence(d, s, Engine::complete), Error);
    CHECK_THROWS(engine_from_string("mcmc"));
    CHECK(engine_from_string("quad") == Engine::quad);
  }
}
