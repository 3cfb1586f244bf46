#include <doctest.h>

#include <cmath>
#include <random>

#include "oracle.hpp"
#include "singlab/errors.hpp"
#include "singlab/model.hpp"

using namespace singlab;

namespace {

MixtureSpec binomial(int M, int K = 2) {
  MixtureSpec s;
  s.family = Family::binomial;
  s.trials = M;
  s.components = K;
  return s;
}

MixtureParams random_params(std::mt19937_64& rng, int K) {
  MixtureParams p;
  double total = 0;
  for (int k = 0; k < K; ++k) {
    p.weights.push_back(oracle::random_unit(rng, 0.05, 1.0));
    total += p.weights.back();
    p.comps.push_back(oracle::random_unit(rng));
  }
  for (auto& w : p.weights) w /= total;
  return p;
}

}  // namespace

TEST_SUITE("model") {
  TEST_CASE("mixture density examples") {
    const MixtureSpec s2 = binomial(2);
    CHECK(mixture_density(1, {{0.5, 0.5}, {0.5, 0.5}}, s2) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(mixture_density(2, {{1.0, 0.0}, {0.3, 0.9}}, s2) == doctest::Approx(0.09).epsilon(1e-14));
    const MixtureSpec s5 = binomial(5);
    const double hand = 0.3 * oracle::binom_pmf(5, 4, 0.2) + 0.7 * oracle::binom_pmf(5, 4, 0.9);
    CHECK(mixture_density(4, {{0.3, 0.7}, {0.2, 0.9}}, s5) == doctest::Approx(hand).epsilon(1e-14));
  }

  TEST_CASE("complete density examples and marginalization") {
    const MixtureSpec s2 = binomial(2);
    CHECK(complete_density(1, 1, {{0.5, 0.5}, {0.5, 0.5}}, s2) == doctest::Approx(0.25));
    CHECK(complete_density(1, 2, {{1.0, 0.0}, {0.5, 0.3}}, s2) == 0.0);
    std::mt19937_64 rng(7);
    for (int t = 0; t < 100; ++t) {
      const int K = 2 + t % 3;
      const MixtureSpec s = binomial(6, K);
      const MixtureParams p = random_params(rng, K);
      const int x = static_cast<int>(rng() % 7);
      double sum = 0;
      for (int y = 1; y <= K; ++y) sum += complete_density(x, y, p, s);
      CHECK(std::abs(sum - mixture_density(x, p, s)) <= 1e-14);
    }
    MixtureSpec g;
    g.family = Family::gaussian;
    const MixtureParams p{{0.4, 0.6}, {-1.0, 2.0}};
    const double x = 0.3;
    CHECK(mixture_density(x, p, g) ==
          doctest::Approx(0.4 * oracle::normal_pdf(x, -1.0) + 0.6 * oracle::normal_pdf(x, 2.0)).epsilon(1e-14));
  }

  TEST_CASE("normalization over the discrete support") {
    std::mt19937_64 rng(11);
    for (int t = 0; t < 100; ++t) {
      const MixtureSpec s = binomial(1 + t % 9, 2 + t % 2);
      const MixtureParams p = random_params(rng, s.components);
      double sum = 0;
      for (int x = 0; x <= s.trials; ++x) sum += mixture_density(x, p, s);
      CHECK(std::abs(sum - 1.0) <= 1e-12);
    }
  }

  TEST_CASE("incomplete KL examples") {
    const MixtureSpec s = binomial(3);
    const TrueModel truth{{1.0}, {0.5}};
    CHECK(kl_incomplete({{1.0, 0.0}, {0.5, 0.8}}, truth, s) == doctest::Approx(0.0));
    CHECK(std::abs(kl_incomplete({{0.3, 0.7}, {0.5, 0.5}}, truth, s)) <= 1e-15);
    double hand = 0;
    for (int x = 0; x <= 3; ++x) {
      const double q = oracle::binom_pmf(3, x, 0.5);
      hand += q * std::log(q / oracle::binom_pmf(3, x, 0.25));
    }
    CHECK(kl_incomplete({{1.0, 0.0}, {0.25, 0.6}}, truth, s) == doctest::Approx(hand).epsilon(1e-13));
  }

  TEST_CASE("complete KL examples and dominance") {
    const MixtureSpec s = binomial(3);
    const TrueModel truth{{1.0}, {0.5}};
    CHECK(kl_complete({{1.0, 0.0}, {0.5, 0.2}}, truth, s) == doctest::Approx(0.0));
    CHECK(kl_complete({{0.5, 0.5}, {0.5, 0.2}}, truth, s) == doctest::Approx(std::log(2.0)).epsilon(1e-14));
    std::mt19937_64 rng(3);
    const TrueModel truth2{{0.4, 0.6}, {0.3, 0.7}};
    for (int t = 0; t < 200; ++t) {
      const MixtureParams p = random_params(rng, 2);
      CHECK(kl_complete(p, truth2, s) >= kl_incomplete(p, truth2, s) - 1e-14);
    }
  }

  TEST_CASE("zero sets of the redundant two-component model") {
    const MixtureSpec s = binomial(3);
    const TrueModel truth{{1.0}, {0.5}};
    std::mt19937_64 rng(5);
    for (int t = 0; t < 20; ++t) {
      const double u = oracle::random_unit(rng), v = oracle::random_unit(rng);
      const MixtureParams w1{{1.0, 0.0}, {0.5, v}};
      const MixtureParams w2{{u, 1.0 - u}, {0.5, 0.5}};
      const MixtureParams w3{{0.0, 1.0}, {v, 0.5}};
      CHECK(std::abs(kl_incomplete(w1, truth, s)) <= 1e-14);
      CHECK(std::abs(kl_incomplete(w2, truth, s)) <= 1e-14);
      CHECK(std::abs(kl_incomplete(w3, truth, s)) <= 1e-14);
      CHECK(std::abs(kl_complete(w1, truth, s)) <= 1e-14);
      CHECK(kl_complete(w2, truth, s) > 1e-3);
      CHECK(kl_complete(w3, truth, s) > 1e-3);
    }
  }

  TEST_CASE("true entropies") {
    const TrueEntropy coin = entropy_true({{1.0}, {0.5}}, binomial(1, 1));
    CHECK(coin.s_x == doctest::Approx(std::log(2.0)).epsilon(1e-14));
    CHECK(coin.s_xy == doctest::Approx(coin.s_x).epsilon(1e-14));
    const MixtureSpec s5 = binomial(5);
    double hand = 0;
    for (int x = 0; x <= 5; ++x) {
      const double q = 0.5 * oracle::binom_pmf(5, x, 0.2) + 0.5 * oracle::binom_pmf(5, x, 0.8);
      hand -= q * std::log(q);
    }
    CHECK(entropy_true({{0.5, 0.5}, {0.2, 0.8}}, s5).s_x == doctest::Approx(hand).epsilon(1e-13));
    MixtureSpec g;
    g.family = Family::gaussian;
    g.components = 1;
    const double gauss = 0.5 * std::log(2 * M_PI * M_E);
    CHECK(entropy_true({{1.0}, {0.7}}, g).s_x == doctest::Approx(gauss).epsilon(1e-8));
  }

  TEST_CASE("Fisher matrices") {
    const MixtureSpec s1 = binomial(4, 1);
    const FisherPair one = fisher_matrices({{1.0}, {0.3}}, s1);
    REQUIRE(one.complete.rows() == 1);
    CHECK(one.complete(0, 0) == doctest::Approx(4.0 / (0.3 * 0.7)).epsilon(1e-12));
    CHECK(one.incomplete(0, 0) == doctest::Approx(one.complete(0, 0)).epsilon(1e-12));
    CHECK(reg_lv_coefficient({{1.0}, {0.3}}, s1) == doctest::Approx(1.0).epsilon(1e-12));

    // Finite-difference oracle: Fisher information as the Hessian of the expected negative log
    // likelihood at the true parameter, with Richardson extrapolation over a step sweep.
    const MixtureSpec s = binomial(8);
    const std::vector<double> w0{0.7, 0.2, 0.8};  // (a2, b1, b2)
    auto expected_nll = [&](const std::vector<double>& w) {
      double v = 0;
      for (int x = 0; x <= 8; ++x) {
        const double q = 0.3 * oracle::binom_pmf(8, x, 0.2) + 0.7 * oracle::binom_pmf(8, x, 0.8);
        const double p = (1 - w[0]) * oracle::binom_pmf(8, x, w[1]) + w[0] * oracle::binom_pmf(8, x, w[2]);
        v -= q * std::log(p);
      }
      return v;
    };
    auto hessian = [&](double h, int i, int j) {
      auto at = [&](double di, double dj) {
        std::vector<double> w = w0;
        w[i] += di;
        w[j] += dj;
        return expected_nll(w);
      };
      return (at(h, h) - at(h, -h) - at(-h, h) + at(-h, -h)) / (4 * h * h);
    };
    const FisherPair fp = fisher_matrices({{0.3, 0.7}, {0.2, 0.8}}, s);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        double best = 1e9;
        for (double h : {1e-3, 5e-4, 2.5e-4}) {
          const double rich = (4 * hessian(h / 2, i, j) - hessian(h, i, j)) / 3;
          best = std::min(best, std::abs(rich - fp.incomplete(i, j)));
        }
        CHECK(best <= 1e-5 * std::max(1.0, std::abs(fp.incomplete(i, j))));
      }
  }

  TEST_CASE("score has mean zero") {
    std::mt19937_64 rng(13);
    const MixtureSpec s = binomial(5);
    for (int t = 0; t < 20; ++t) {
      const MixtureParams p = random_params(rng, 2);
      auto lp = [&](int x, double a2, double b1, double b2) {
        return std::log((1 - a2) * oracle::binom_pmf(5, x, b1) + a2 * oracle::binom_pmf(5, x, b2));
      };
      const double h = 1e-6;
      for (int c = 0; c < 3; ++c) {
        double mean = 0;
        for (int x = 0; x <= 5; ++x) {
          double w[3] = {p.weights[1], p.comps[0], p.comps[1]};
          double wp[3] = {w[0], w[1], w[2]}, wm[3] = {w[0], w[1], w[2]};
          wp[c] += h;
          wm[c] -= h;
          const double score = (lp(x, wp[0], wp[1], wp[2]) - lp(x, wm[0], wm[1], wm[2])) / (2 * h);
          mean += mixture_density(x, p, s) * score;
        }
        CHECK(std::abs(mean) <= 1e-8);
      }
    }
  }

  TEST_CASE("regular coefficient symmetry and singular refusal") {
    const MixtureSpec s = binomial(8);
    const double t1 = reg_lv_coefficient({{0.3, 0.7}, {0.2, 0.8}}, s);
    const double t2 = reg_lv_coefficient({{0.7, 0.3}, {0.8, 0.2}}, s);
    CHECK(t1 == doctest::Approx(t2).epsilon(1e-10));
    CHECK(t1 > 3.0);  // d = 3 plus the latent contribution
    CHECK_THROWS_AS(reg_lv_coefficient({{0.5, 0.5}, {0.5, 0.5}}, s), RegularityError);
  }

  TEST_CASE("spec validation") {
    MixtureSpec s = binomial(3);
    s.prior.eta1 = 0;
    CHECK_THROWS_AS(s.validate(), DomainError);
    CHECK_THROWS_AS((TrueModel{{0.5, 0.5}, {0.3, 0.3}}.validate(binomial(3))), DomainError);
    CHECK_THROWS_AS((TrueModel{{0.6, 0.6}, {0.3, 0.4}}.validate(binomial(3))), DomainError);
  }
}
