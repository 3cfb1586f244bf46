#include <doctest.h>

#include <cmath>
#include <numeric>

#include "singlab/errors.hpp"
#include "singlab/evidence.hpp"
#include "singlab/latenterr.hpp"
#include "singlab/sampler.hpp"

using namespace singlab;

namespace {

MixtureSpec binomial(int M, double eta1) {
  MixtureSpec s;
  s.trials = M;
  s.prior.eta1 = eta1;
  return s;
}

}  // namespace

TEST_SUITE("sampler") {
  TEST_CASE("same seed gives the same trace") {
    const MixtureSpec s = binomial(3, 1.0);
    const Dataset d = sample_dataset({{1.0}, {0.5}}, s, 80, SeedSpec{1}, 0);
    ChainSettings cs;
    cs.iters = 3000;
    cs.burnin = 500;
    cs.thin = 5;
    cs.seed = 9;
    const ParamTrace a = gibbs_run(d, s, cs);
    const ParamTrace b = gibbs_run(d, s, cs);
    CHECK(a.size() == 500);
    CHECK(a.weights == b.weights);
    CHECK(a.comps == b.comps);
    cs.seed = 10;
    CHECK(gibbs_run(d, s, cs).comps != a.comps);
    const ParamTrace m1 = posterior_mh_run(d, s, cs);
    const ParamTrace m2 = posterior_mh_run(d, s, cs);
    CHECK(m1.comps == m2.comps);
    CHECK(m1.acceptance_rate > 0.05);
    CHECK(m1.acceptance_rate < 0.95);
  }

  TEST_CASE("trace values lie in the parameter domain") {
    const MixtureSpec s = binomial(3, 0.25);
    const Dataset d = sample_dataset({{1.0}, {0.5}}, s, 50, SeedSpec{2}, 0);
    ChainSettings cs;
    cs.iters = 5000;
    cs.burnin = 0;
    cs.thin = 1;
    const ParamTrace t = gibbs_run(d, s, cs);
    for (std::size_t i = 0; i < t.size(); ++i) {
      CHECK(t.weight(i, 0) + t.weight(i, 1) == doctest::Approx(1.0).epsilon(1e-12));
      CHECK(t.weight(i, 0) >= 0.0);
      CHECK(t.comp(i, 0) > 0.0);
      CHECK(t.comp(i, 1) < 1.0);
    }
  }

  TEST_CASE("occupancy fractions and their complement") {
    const MixtureSpec s = binomial(3, 2.0);
    const Dataset d = sample_dataset({{1.0}, {0.5}}, s, 200, SeedSpec{3}, 0);
    ChainSettings cs;
    cs.iters = 20000;
    cs.burnin = 2000;
    const RegionMasses occ = occupancy_stats(gibbs_run(d, s, cs), {0.1, 0.1, 0.5});
    CHECK(occ.union_all() + occ.rest == doctest::Approx(1.0).epsilon(1e-12));
    for (double v : {occ.w1, occ.w2, occ.w3, occ.rest}) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  }

  TEST_CASE("exact label posterior normalizes") {
    for (int n = 1; n <= 8; ++n) {
      const MixtureSpec s = binomial(3, 0.5);
      const Dataset d = sample_dataset({{0.5, 0.5}, {0.2, 0.8}}, s, n, SeedSpec{4}, n);
      const auto p = exact_label_posterior(d, s);
      CHECK(p.size() == (1u << n));
      CHECK(std::accumulate(p.begin(), p.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));
    }
  }

  TEST_CASE("one observation from a symmetric posterior labels each side half the time") {
    const MixtureSpec s = binomial(2, 1.0);
    const Dataset d = make_dataset({1}, std::nullopt, s);
    const auto p = exact_label_posterior(d, s);
    CHECK(p[0] == doctest::Approx(0.5).epsilon(1e-14));
    ChainSettings cs;
    cs.iters = 200000;
    cs.burnin = 1000;
    cs.thin = 1;
    cs.label_histogram = true;
    const ParamTrace t = gibbs_run(d, s, cs);
    CHECK(label_tv_distance(t, p) <= 0.01);
  }

  TEST_CASE("label histogram matches the exact posterior") {
    const MixtureSpec s = binomial(3, 0.5);
    const Dataset d = sample_dataset({{1.0}, {0.5}}, s, 5, SeedSpec{5}, 0);
    ChainSettings cs;
    cs.iters = 300000;
    cs.burnin = 1000;
    cs.thin = 1;
    cs.label_histogram = true;
    const ParamTrace t = gibbs_run(d, s, cs);
    CHECK(std::accumulate(t.label_counts.begin(), t.label_counts.end(), std::uint64_t{0}) == t.size());
    CHECK(label_tv_distance(t, exact_label_posterior(d, s)) <= 0.05);
  }

  TEST_CASE("label probability estimate on a small instance") {
    const MixtureSpec s = binomial(3, 0.25);
    const Dataset d = sample_dataset({{1.0}, {0.5}}, s, 6, SeedSpec{6}, 0);
    ChainSettings cs;
    cs.iters = 1100000;
    cs.burnin = 100000;
    cs.thin = 10;
    const ParamTrace t = posterior_mh_run(d, s, cs);
    const PeakResult peak = peak_assignment(d, s, PeakMethod::exhaustive);
    const PYComparison c = compare_pY_estimates(d, peak.ys, t, s);
    CHECK(c.log_exact == doctest::Approx(log_evidence_complete(d, peak.ys, s) - log_evidence_brute(d, s)));
    CHECK(std::abs(c.log_mc - c.log_exact) <= 0.2);
  }

  TEST_CASE("Metropolis chain needs two components") {
    MixtureSpec s = binomial(3, 1.0);
    s.components = 3;
    const Dataset d = make_dataset({1, 2}, std::nullopt, s);
    CHECK_THROWS_AS(posterior_mh_run(d, s, {}), Error);
  }
}
