#include <doctest.h>

#include <cmath>

#include "singlab/data.hpp"
#include "singlab/errors.hpp"

using namespace singlab;

namespace {

MixtureSpec binomial(int M, int K = 2) {
  MixtureSpec s;
  s.trials = M;
  s.components = K;
  return s;
}

}  // namespace

TEST_SUITE("data") {
  TEST_CASE("empty dataset") {
    const Dataset d = sample_dataset({{1.0}, {0.5}}, binomial(3), 0, SeedSpec{1}, 0);
    CHECK(d.n() == 0);
    std::int64_t total = 0;
    for (auto c : d.hist) total += c;
    CHECK(total == 0);
  }

  TEST_CASE("one-component truth labels everything 1") {
    const Dataset d = sample_dataset({{1.0}, {0.5}}, binomial(3), 500, SeedSpec{2}, 4);
    REQUIRE(d.has_labels());
    for (int y : d.labels()) CHECK(y == 1);
  }

  TEST_CASE("histogram and label invariants") {
    const Dataset d = sample_dataset({{0.3, 0.7}, {0.2, 0.9}}, binomial(5), 2000, SeedSpec{3}, 1);
    std::int64_t total = 0;
    for (auto c : d.hist) total += c;
    CHECK(total == 2000);
    CHECK(d.labels().size() == d.n());
    for (int y : d.labels()) CHECK((y == 1 || y == 2));
  }

  TEST_CASE("sample mean within three standard deviations") {
    const std::size_t n = 100000;
    const Dataset d = sample_dataset({{1.0}, {0.5}}, binomial(3), n, SeedSpec{20240521}, 9);
    double mean = 0;
    for (double x : d.xs) mean += x;
    mean /= n;
    const double sigma = std::sqrt(3 * 0.25 / n);
    CHECK(std::abs(mean - 1.5) <= 3 * sigma);
  }

  TEST_CASE("determinism and stream independence") {
    const TrueModel truth{{0.4, 0.6}, {0.3, 0.7}};
    const Dataset a = sample_dataset(truth, binomial(3), 300, SeedSpec{42}, 17);
    const Dataset b = sample_dataset(truth, binomial(3), 300, SeedSpec{42}, 17);
    const Dataset c = sample_dataset(truth, binomial(3), 300, SeedSpec{42}, 18);
    CHECK(a.xs == b.xs);
    CHECK(a.labels() == b.labels());
    CHECK(a.xs != c.xs);
    CHECK(dataset_to_json(a).dump() == dataset_to_json(b).dump());
  }

  TEST_CASE("json round trip") {
    const Dataset a = sample_dataset({{0.4, 0.6}, {0.3, 0.7}}, binomial(3), 50, SeedSpec{5}, 2);
    const Dataset b = dataset_from_json(dataset_to_json(a), binomial(3));
    CHECK(a.xs == b.xs);
    CHECK(a.labels() == b.labels());
    CHECK(a.hist == b.hist);
    CHECK(b.seed == a.seed);
    CHECK(b.task == a.task);
    nlohmann::json bad = dataset_to_json(a);
    bad["xs"][0] = 7;
    CHECK_THROWS_AS(dataset_from_json(bad, binomial(3)), DomainError);
    CHECK_THROWS_AS(dataset_from_json(nlohmann::json{{"family", "binomial"}}, binomial(3)), DomainError);
  }

  TEST_CASE("support checks") {
    CHECK_THROWS_AS(make_dataset({0, 4}, std::nullopt, binomial(3)), DomainError);
    CHECK_THROWS_AS(make_dataset({0.5}, std::nullopt, binomial(3)), DomainError);
    CHECK_THROWS_AS(make_dataset({1, 2}, std::vector<int>{1}, binomial(3)), DomainError);
  }

  TEST_CASE("empirical log-likelihood of the truth") {
    const MixtureSpec s = binomial(2);
    const Dataset empty = make_dataset({}, std::vector<int>{}, s);
    const EmpiricalLogQ e0 = empirical_log_q(empty, {{1.0}, {0.5}}, s);
    CHECK(e0.incomplete == 0.0);
    CHECK(e0.complete == 0.0);
    const Dataset one = make_dataset({1}, std::vector<int>{1}, s);
    CHECK(empirical_log_q(one, {{1.0}, {0.5}}, s).incomplete == doctest::Approx(std::log(0.5)));
    const Dataset d = sample_dataset({{1.0}, {0.4}}, binomial(3), 100, SeedSpec{8}, 0);
    const EmpiricalLogQ e = empirical_log_q(d, {{1.0}, {0.4}}, binomial(3));
    CHECK(e.complete == doctest::Approx(e.incomplete).epsilon(1e-14));
    CHECK(empirical_log_q_incomplete(d, {{1.0}, {0.4}}, binomial(3)) == doctest::Approx(e.incomplete));
  }
}
