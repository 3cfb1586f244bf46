#include "singlab/config.hpp"

#include <set>

#include "singlab/errors.hpp"

namespace singlab {

namespace {

void reject_unknown(const nlohmann::json& j, const std::set<std::string>& known, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!known.count(it.key())) throw ConfigError("unknown key '" + it.key() + "' in " + where);
}

template <class T>
void read(const nlohmann::json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid value for '") + key + "': " + e.what());
  }
}

}  // namespace

void ExperimentConfig::validate() const {
  try {
    spec.validate();
    truth.validate(spec);
    regions().validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  if (!(quad.tol > 0.0)) throw ConfigError("quad tol must be positive");
  if (quad.order < 1 || quad.order > 64) throw ConfigError("quad order must lie in 1..64");
  if (truth.components() > spec.components) throw ConfigError("true component count exceeds K");
  if (n_grid.empty()) throw ConfigError("n_grid is empty");
  for (std::size_t i = 0; i < n_grid.size(); ++i) {
    if (n_grid[i] < 1) throw ConfigError("n_grid entries must be positive");
    if (i > 0 && n_grid[i] <= n_grid[i - 1]) throw ConfigError("n_grid must be strictly increasing");
  }
  if (replicates < 1) throw ConfigError("R must be positive");
  if (n < 0) throw ConfigError("n must be nonnegative");
  if (iters <= burnin) throw ConfigError("iters must exceed burnin");
  if (thin < 1) throw ConfigError("thin must be positive");
  if (sampler != "gibbs" && sampler != "posterior_mh") throw ConfigError("sampler must be gibbs or posterior_mh");
  if (peak_restarts < 1) throw ConfigError("peak restarts must be positive");
  if (bootstrap < 0) throw ConfigError("bootstrap count must be nonnegative");
  if (threads < 1) throw ConfigError("threads must be positive");
  for (double e : eta1_list)
    if (!(e > 0.0)) throw ConfigError("eta1_list entries must be positive");
  if (out.empty()) throw ConfigError("output directory is empty");
}

RegionSet ExperimentConfig::regions() const {
  RegionSet r;
  r.delta_a = delta_a;
  r.delta_b = delta_b;
  r.bstar = truth.comps.empty() ? 0.5 : truth.comps.front();
  return r;
}

RunSettings ExperimentConfig::run_settings() const {
  RunSettings s;
  s.master_seed = master_seed;
  s.engine = engine;
  s.quad = quad;
  s.threads = threads;
  return s;
}

ChainSettings ExperimentConfig::chain_settings() const {
  ChainSettings s;
  s.iters = iters;
  s.burnin = burnin;
  s.thin = thin;
  s.seed = derive_stream_seed(master_seed, 0x6769626273ull + task);
  return s;
}

ExperimentConfig config_from_json(const nlohmann::json& j) {
  static const std::set<std::string> top = {
      "family", "K", "M", "prior", "truth", "n_grid", "R", "master_seed", "engine", "quad", "regions",
      "eta1_list", "n", "task", "dataset", "gibbs", "sampler", "peak", "fit_model", "bootstrap", "out", "threads"};
  reject_unknown(j, top, "config");
  ExperimentConfig c;
  try {
    if (j.contains("family")) c.spec.family = family_from_string(j.at("family").get<std::string>());
    read(j, "K", c.spec.components);
    read(j, "M", c.spec.trials);
    if (j.contains("prior")) {
      const auto& p = j.at("prior");
      reject_unknown(p, {"eta1", "alpha", "beta", "normal_scale", "normal_bound"}, "prior");
      read(p, "eta1", c.spec.prior.eta1);
      read(p, "alpha", c.spec.prior.beta.alpha);
      read(p, "beta", c.spec.prior.beta.beta);
      read(p, "normal_scale", c.spec.prior.normal.scale);
      read(p, "normal_bound", c.spec.prior.normal.bound);
    }
    if (j.contains("truth")) {
      const auto& t = j.at("truth");
      reject_unknown(t, {"weights", "comps"}, "truth");
      read(t, "weights", c.truth.weights);
      read(t, "comps", c.truth.comps);
    }
    read(j, "n_grid", c.n_grid);
    read(j, "R", c.replicates);
    read(j, "master_seed", c.master_seed);
    if (j.contains("engine")) c.engine = engine_from_string(j.at("engine").get<std::string>());
    if (j.contains("quad")) {
      const auto& q = j.at("quad");
      reject_unknown(q, {"tol", "order", "max_cells"}, "quad");
      read(q, "tol", c.quad.tol);
      read(q, "order", c.quad.order);
      read(q, "max_cells", c.quad.max_cells);
    }
    if (j.contains("regions")) {
      const auto& r = j.at("regions");
      reject_unknown(r, {"delta_a", "delta_b"}, "regions");
      read(r, "delta_a", c.delta_a);
      read(r, "delta_b", c.delta_b);
    }
    read(j, "eta1_list", c.eta1_list);
    read(j, "n", c.n);
    read(j, "task", c.task);
    if (j.contains("dataset") && !j.at("dataset").is_null()) c.dataset = j.at("dataset").get<std::string>();
    if (j.contains("gibbs")) {
      const auto& g = j.at("gibbs");
      reject_unknown(g, {"iters", "burnin", "thin"}, "gibbs");
      read(g, "iters", c.iters);
      read(g, "burnin", c.burnin);
      read(g, "thin", c.thin);
    }
    read(j, "sampler", c.sampler);
    if (j.contains("peak")) {
      const auto& p = j.at("peak");
      reject_unknown(p, {"method", "restarts"}, "peak");
      if (p.contains("method")) c.peak_method = peak_method_from_string(p.at("method").get<std::string>());
      read(p, "restarts", c.peak_restarts);
    }
    if (j.contains("fit_model")) c.fit_model = fit_model_from_string(j.at("fit_model").get<std::string>());
    read(j, "bootstrap", c.bootstrap);
    read(j, "out", c.out);
    read(j, "threads", c.threads);
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(e.what());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(e.what());
  }
  return c;
}

nlohmann::json config_to_json(const ExperimentConfig& c) {
  nlohmann::json j;
  j["family"] = std::string(to_string(c.spec.family));
  j["K"] = c.spec.components;
  j["M"] = c.spec.trials;
  j["prior"] = {{"eta1", c.spec.prior.eta1},
                {"alpha", c.spec.prior.beta.alpha},
                {"beta", c.spec.prior.beta.beta},
                {"normal_scale", c.spec.prior.normal.scale},
                {"normal_bound", c.spec.prior.normal.bound}};
  j["truth"] = {{"weights", c.truth.weights}, {"comps", c.truth.comps}};
  j["n_grid"] = c.n_grid;
  j["R"] = c.replicates;
  j["master_seed"] = c.master_seed;
  j["engine"] = std::string(to_string(c.engine));
  j["quad"] = {{"tol", c.quad.tol}, {"order", c.quad.order}, {"max_cells", c.quad.max_cells}};
  j["regions"] = {{"delta_a", c.delta_a}, {"delta_b", c.delta_b}};
  j["eta1_list"] = c.eta1_list;
  j["n"] = c.n;
  j["task"] = c.task;
  j["dataset"] = c.dataset ? nlohmann::json(*c.dataset) : nlohmann::json(nullptr);
  j["gibbs"] = {{"iters", c.iters}, {"burnin", c.burnin}, {"thin", c.thin}};
  j["sampler"] = c.sampler;
  j["peak"] = {{"method", c.peak_method == PeakMethod::exhaustive ? "exhaustive" : "icm_restarts"},
               {"restarts", c.peak_restarts}};
  j["fit_model"] = std::string(to_string(c.fit_model));
  j["bootstrap"] = c.bootstrap;
  j["out"] = c.out;
  j["threads"] = c.threads;
  return j;
}

}  // namespace singlab
