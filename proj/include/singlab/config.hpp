#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "singlab/cubature.hpp"
#include "singlab/energy.hpp"
#include "singlab/evidence.hpp"
#include "singlab/latenterr.hpp"
#include "singlab/model.hpp"
#include "singlab/regions.hpp"
#include "singlab/sampler.hpp"

namespace singlab {

/// Everything an experiment needs. Defaults reproduce the binomial K = 2, M = 3,
/// b* = 0.5 study.
struct ExperimentConfig {
  MixtureSpec spec;
  TrueModel truth{{1.0}, {0.5}};
  std::vector<std::int64_t> n_grid{100, 200, 400, 800, 1600};
  int replicates = 50;
  std::uint64_t master_seed = 20240521;
  Engine engine = Engine::dp;
  QuadConfig quad;
  double delta_a = 0.1;
  double delta_b = 0.1;
  std::vector<double> eta1_list{0.25, 0.5, 2.0};
  // single-dataset commands
  std::int64_t n = 1000;
  std::uint64_t task = 0;
  std::optional<std::string> dataset;
  // samplers
  std::uint64_t iters = 200000;
  std::uint64_t burnin = 20000;
  std::uint64_t thin = 10;
  std::string sampler = "gibbs";  // gibbs | posterior_mh
  PeakMethod peak_method = PeakMethod::icm_restarts;
  int peak_restarts = 10;
  FitModel fit_model = FitModel::ln_only;
  int bootstrap = 1000;
  std::string out = "singlab-out";
  int threads = 1;

  void validate() const;
  RegionSet regions() const;
  RunSettings run_settings() const;
  ChainSettings chain_settings() const;
};

ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ExperimentConfig& c);

}  // namespace singlab
