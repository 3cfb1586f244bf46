#include "singlab/data.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include <boost/random/binomial_distribution.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_01.hpp>

#include "singlab/errors.hpp"
#include "singlab/numerics.hpp"

namespace singlab {

std::uint64_t SeedSpec::stream(std::uint64_t task) const { return derive_stream_seed(master_seed, task); }

const std::vector<int>& Dataset::labels() const {
  if (!ys) throw DomainError("dataset carries no latent labels");
  return *ys;
}

void Dataset::rebuild_histogram() {
  hist.clear();
  if (family != Family::binomial) return;
  hist.assign(trials + 1, 0);
  for (double x : xs) {
    if (!(x >= 0.0 && x <= trials && std::floor(x) == x))
      throw DomainError("observation " + std::to_string(x) + " outside binomial support");
    ++hist[static_cast<std::size_t>(x)];
  }
}

Dataset make_dataset(std::vector<double> xs, std::optional<std::vector<int>> ys, const MixtureSpec& spec,
                     int max_label) {
  Dataset d;
  d.family = spec.family;
  d.trials = spec.discrete() ? spec.trials : 0;
  d.xs = std::move(xs);
  if (ys) {
    if (ys->size() != d.xs.size()) throw DomainError("label vector length differs from observations");
    const int hi = max_label > 0 ? max_label : spec.components;
    for (int y : *ys)
      if (y < 1 || y > hi) throw DomainError("label out of range 1.." + std::to_string(hi));
  }
  d.ys = std::move(ys);
  d.rebuild_histogram();
  return d;
}

Dataset sample_dataset(const TrueModel& truth, const MixtureSpec& spec, std::size_t n, const SeedSpec& seed,
                       std::uint64_t task) {
  truth.validate(spec);
  std::mt19937_64 rng(seed.stream(task));
  boost::random::uniform_01<double> unif;
  std::vector<double> xs(n);
  std::vector<int> ys(n);
  const int kstar = truth.components();
  for (std::size_t i = 0; i < n; ++i) {
    int y = 1;
    if (kstar > 1) {
      const double u = unif(rng);
      double cum = 0.0;
      y = kstar;
      for (int k = 0; k < kstar; ++k) {
        cum += truth.weights[k];
        if (u < cum) {
          y = k + 1;
          break;
        }
      }
    }
    ys[i] = y;
    const double b = truth.comps[y - 1];
    if (spec.family == Family::binomial) {
      boost::random::binomial_distribution<int, double> draw(spec.trials, b);
      xs[i] = draw(rng);
    } else {
      boost::random::normal_distribution<double> draw(b, 1.0);
      xs[i] = draw(rng);
    }
  }
  Dataset d = make_dataset(std::move(xs), std::move(ys), spec, kstar);
  d.seed = seed.master_seed;
  d.task = task;
  return d;
}

double empirical_log_q_incomplete(const Dataset& data, const TrueModel& truth, const MixtureSpec& spec) {
  if (data.family == Family::binomial && !data.hist.empty()) {
    double total = 0.0;
    for (int m = 0; m < static_cast<int>(data.hist.size()); ++m)
      if (data.hist[m] > 0) total += data.hist[m] * std::log(true_density(m, truth, spec));
    return total;
  }
  double total = 0.0;
  for (double x : data.xs) total += std::log(true_density(x, truth, spec));
  return total;
}

EmpiricalLogQ empirical_log_q(const Dataset& data, const TrueModel& truth, const MixtureSpec& spec) {
  const std::vector<int>& ys = data.labels();
  EmpiricalLogQ out;
  out.incomplete = empirical_log_q_incomplete(data, truth, spec);
  if (truth.components() == 1) {
    out.complete = out.incomplete;
    return out;
  }
  for (std::size_t i = 0; i < data.n(); ++i)
    out.complete += std::log(true_complete_density(data.xs[i], ys[i], truth, spec));
  return out;
}

nlohmann::json dataset_to_json(const Dataset& data) {
  nlohmann::json j;
  j["n"] = data.n();
  j["family"] = std::string(to_string(data.family));
  if (data.family == Family::binomial) {
    std::vector<int> xs(data.xs.begin(), data.xs.end());
    j["xs"] = xs;
  } else {
    j["xs"] = data.xs;
  }
  if (data.ys) j["ys"] = *data.ys;
  j["seed"] = data.seed;
  j["task"] = data.task;
  return j;
}

Dataset dataset_from_json(const nlohmann::json& j, const MixtureSpec& spec) {
  try {
    if (family_from_string(j.at("family").get<std::string>()) != spec.family)
      throw DomainError("dataset family does not match the model family");
    std::vector<double> xs = j.at("xs").get<std::vector<double>>();
    if (j.contains("n") && j.at("n").get<std::size_t>() != xs.size())
      throw DomainError("dataset field n does not match the number of observations");
    std::optional<std::vector<int>> ys;
    if (j.contains("ys")) ys = j.at("ys").get<std::vector<int>>();
    int max_label = 0;
    if (ys && !ys->empty()) max_label = std::max(spec.components, *std::max_element(ys->begin(), ys->end()));
    Dataset d = make_dataset(std::move(xs), std::move(ys), spec, max_label);
    d.seed = j.value("seed", std::uint64_t{0});
    d.task = j.value("task", std::uint64_t{0});
    return d;
  } catch (const nlohmann::json::exception& e) {
    throw DomainError(std::string("malformed dataset JSON: ") + e.what());
  }
}

}  // namespace singlab
