// singlab: experiments on Bayesian estimation in singular mixture models.

#include <unistd.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "singlab/acceptance.hpp"
#include "singlab/config.hpp"
#include "singlab/energy.hpp"
#include "singlab/errors.hpp"
#include "singlab/evidence.hpp"
#include "singlab/latenterr.hpp"
#include "singlab/posterior.hpp"
#include "singlab/sampler.hpp"
#include "singlab/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace singlab;

namespace {

class ArtifactExists : public Error {
 public:
  using Error::Error;
};

std::string g17(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + p.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

/// Writes through a temporary file and a rename; an existing artifact is left alone when
/// identical and reported otherwise.
void write_artifact(const fs::path& path, const std::string& bytes) {
  if (fs::exists(path)) {
    if (read_file(path) == bytes) return;
    throw ArtifactExists("refusing to replace existing artifact " + path.string());
  }
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp-" + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary);
    out << bytes;
    if (!out) throw Error("cannot write " + tmp.string());
  }
  fs::rename(tmp, path);
}

struct Context {
  ExperimentConfig config;
  json config_json;

  fs::path out(const std::string& name) const { return fs::path(config.out) / name; }

  std::string csv_preamble(const std::string& columns) const {
    return std::string("# singlab ") + kVersion + "\n# config " + config_json.dump() + "\n" + columns + "\n";
  }
  json wrap(json result) const {
    return json{{"version", kVersion}, {"config", config_json}, {"result", std::move(result)}};
  }
};

Dataset load_or_simulate(const Context& ctx) {
  const ExperimentConfig& c = ctx.config;
  if (c.dataset) {
    const json j = json::parse(read_file(*c.dataset), nullptr, false);
    if (j.is_discarded()) throw ConfigError("dataset file is not valid JSON: " + *c.dataset);
    return dataset_from_json(j.contains("dataset") ? j.at("dataset") : j, c.spec);
  }
  return sample_dataset(c.truth, c.spec, static_cast<std::size_t>(c.n), SeedSpec{c.master_seed}, c.task);
}

int cmd_simulate(const Context& ctx) {
  const Dataset d = load_or_simulate(ctx);
  const fs::path p = ctx.out("dataset_n" + std::to_string(d.n()) + "_task" + std::to_string(d.task) + ".json");
  write_artifact(p, json{{"version", kVersion}, {"config", ctx.config_json}, {"dataset", dataset_to_json(d)}}.dump(1) +
                        "\n");
  std::cout << p.string() << "\n";
  return 0;
}

int cmd_evidence(const Context& ctx) {
  const Dataset d = load_or_simulate(ctx);
  const EvidenceResult r = log_evidence(d, ctx.config.spec, ctx.config.engine, ctx.config.quad);
  std::cout << json{{"log_z", r.log_z}, {"engine", std::string(to_string(r.engine))}, {"err_est", r.err_est}}.dump()
            << "\n";
  return 0;
}

std::string energy_csv(const Context& ctx, const std::vector<EnergyCurve>& curves) {
  std::string s = ctx.csv_preamble("family,K,Kstar,M,eta1,n,replicate,seed,engine,f_tilde_x,f_tilde_xy");
  for (const auto& c : curves)
    for (std::size_t g = 0; g < c.x.points(); ++g)
      for (int r = 0; r < c.replicates; ++r) {
        s += std::string(to_string(c.spec.family)) + "," + std::to_string(c.spec.components) + "," +
             std::to_string(c.truth.components()) + "," + std::to_string(c.spec.trials) + "," +
             g17(c.spec.prior.eta1) + "," + std::to_string(c.x.n[g]) + "," + std::to_string(r) + "," +
             std::to_string(c.seeds[g][r]) + "," + std::string(to_string(c.settings.engine)) + "," +
             g17(c.x.values[g][r]) + "," + g17(c.xy.values[g][r]) + "\n";
      }
  return s;
}

std::vector<EnergyCurve> compute_energy(const Context& ctx) {
  const ExperimentConfig& c = ctx.config;
  auto curves = energy_curve_sweep(c.spec, c.truth, {c.spec.prior.eta1}, c.n_grid, c.replicates, c.run_settings());
  for (const auto& cv : curves)
    for (const auto& e : cv.errors) std::cerr << "warning: " << e << "\n";
  return curves;
}

int cmd_energy_curve(const Context& ctx) {
  const auto curves = compute_energy(ctx);
  write_artifact(ctx.out("energy_curve.csv"), energy_csv(ctx, curves));
  std::cout << ctx.out("energy_curve.csv").string() << "\n";
  return curves.front().complete() ? 0 : 3;
}

// Reads the energy CSV back into per-eta1 series.
std::map<double, std::pair<ReplicateSeries, ReplicateSeries>> parse_energy_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::vector<std::string> header;
  std::map<double, std::map<std::int64_t, std::pair<std::vector<double>, std::vector<double>>>> raw;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (header.empty()) {
      header = cells;
      continue;
    }
    std::map<std::string, std::string> row;
    for (std::size_t i = 0; i < header.size() && i < cells.size(); ++i) row[header[i]] = cells[i];
    try {
      auto& slot = raw[std::stod(row.at("eta1"))][std::stoll(row.at("n"))];
      slot.first.push_back(std::stod(row.at("f_tilde_x")));
      slot.second.push_back(std::stod(row.at("f_tilde_xy")));
    } catch (const std::exception&) {
      throw ConfigError("malformed energy CSV row: " + line);
    }
  }
  std::map<double, std::pair<ReplicateSeries, ReplicateSeries>> out;
  for (auto& [eta, by_n] : raw) {
    auto& [x, xy] = out[eta];
    for (auto& [n, vals] : by_n) {
      x.n.push_back(n);
      xy.n.push_back(n);
      x.values.push_back(vals.first);
      xy.values.push_back(vals.second);
    }
  }
  return out;
}

json fit_json(const LambdaFit& f) {
  json j{{"lambda_hat", f.lambda_hat}, {"ci_lo", f.ci_lo},         {"ci_hi", f.ci_hi},
         {"n_points", f.n_points},     {"model", std::string(to_string(f.model))}};
  if (f.m_hat) j["m_hat"] = *f.m_hat;
  return j;
}

int cmd_fit_lambda(const Context& ctx, const std::string& input) {
  const ExperimentConfig& c = ctx.config;
  std::map<double, std::pair<ReplicateSeries, ReplicateSeries>> series;
  if (!input.empty()) {
    series = parse_energy_csv(read_file(input));
  } else {
    for (const auto& cv : compute_energy(ctx)) series[cv.spec.prior.eta1] = {cv.x, cv.xy};
  }
  const FitOptions fo{c.bootstrap, 0.95, c.master_seed};
  json fits = json::array();
  for (const auto& [eta, pair] : series) {
    for (const auto& [name, s] : {std::pair<const char*, const ReplicateSeries*>{"x", &pair.first},
                                  std::pair<const char*, const ReplicateSeries*>{"xy", &pair.second}}) {
      bool usable = true;
      for (std::size_t g = 0; g < s->points(); ++g) usable = usable && std::isfinite(s->mean(g));
      if (!usable) continue;
      json f = fit_json(fit_lambda(*s, c.fit_model, fo));
      f["energy"] = name;
      f["eta1"] = eta;
      fits.push_back(f);
    }
  }
  write_artifact(ctx.out("fit_lambda.json"), ctx.wrap(fits).dump(1) + "\n");
  std::cout << fits.dump(1) << "\n";
  return 0;
}

int cmd_dn_curve(const Context& ctx) {
  const ExperimentConfig& c = ctx.config;
  const DnCurve curve = dn_curve(c.spec, c.truth, c.n_grid, c.replicates, c.run_settings(),
                                 {c.bootstrap, 0.95, c.master_seed});
  for (const auto& e : curve.errors) std::cerr << "warning: " << e << "\n";
  std::string csv = ctx.csv_preamble("eta1,n,replicate,seed,nD_contribution");
  for (std::size_t g = 0; g < curve.contributions.points(); ++g)
    for (int r = 0; r < curve.replicates; ++r)
      csv += g17(c.spec.prior.eta1) + "," + std::to_string(curve.contributions.n[g]) + "," + std::to_string(r) + "," +
             std::to_string(curve.seeds[g][r]) + "," + g17(curve.contributions.values[g][r]) + "\n";
  json fit{{"slope_hat", curve.fit.lambda_hat},
           {"ci_lo", curve.fit.ci_lo},
           {"ci_hi", curve.fit.ci_hi},
           {"theory_slope", curve.theory_slope ? json(*curve.theory_slope) : json(nullptr)},
           {"theory_source", curve.theory_source}};
  write_artifact(ctx.out("dn_curve.csv"), csv);
  write_artifact(ctx.out("dn_fit.json"), ctx.wrap(fit).dump(1) + "\n");
  std::cout << fit.dump(1) << "\n";
  return curve.complete() ? 0 : 3;
}

std::string mass_rows(const MassCurve& curve) {
  std::string s;
  for (const auto& p : curve.points) {
    const RegionMasses& m = p.mean;
    s += g17(curve.spec.prior.eta1) + "," + std::to_string(p.n) + "," + g17(m.w1) + "," + g17(m.w2) + "," + g17(m.w3) +
         "," + g17(m.w12) + "," + g17(m.w23) + "," + g17(m.w13) + "," + g17(m.rest) + "," + g17(m.err_est) + "\n";
  }
  return s;
}

const char* kMassColumns = "eta1,n,mass_w1,mass_w2,mass_w3,mass_w12,mass_w23,mass_w13,mass_rest,err_est";

int cmd_posterior_mass(const Context& ctx) {
  const ExperimentConfig& c = ctx.config;
  RunSettings rs = c.run_settings();
  const MassCurve curve = mass_curve(c.spec, c.truth, c.n_grid, c.replicates, c.regions(), rs);
  for (const auto& e : curve.errors) std::cerr << "warning: " << e << "\n";
  write_artifact(ctx.out("posterior_mass.csv"), ctx.csv_preamble(kMassColumns) + mass_rows(curve));
  const json phase{{"phase", std::string(to_string(detect_phase(curve)))}};
  write_artifact(ctx.out("phase.json"), ctx.wrap(phase).dump(1) + "\n");
  std::cout << phase.dump() << "\n";
  return curve.errors.empty() ? 0 : 3;
}

std::string region_name(unsigned mask) {
  if (mask == 0) return "rest";
  std::string s;
  for (int r = 0; r < 3; ++r)
    if (mask & (1u << r)) s += "W" + std::to_string(r + 1);
  return s;
}

int cmd_gibbs(const Context& ctx) {
  const ExperimentConfig& c = ctx.config;
  if (c.spec.components != 2) throw ConfigError("the gibbs command reports regions and needs K = 2");
  const Dataset d = load_or_simulate(ctx);
  const ChainSettings cs = c.chain_settings();
  const ParamTrace trace = c.sampler == "gibbs" ? gibbs_run(d, c.spec, cs) : posterior_mh_run(d, c.spec, cs);
  const RegionSet regions = c.regions();
  std::string csv = ctx.csv_preamble("iter,a1,b1,b2,region");
  for (std::size_t s = 0; s < trace.size(); ++s)
    csv += std::to_string(trace.iter[s]) + "," + g17(trace.weight(s, 0)) + "," + g17(trace.comp(s, 0)) + "," +
           g17(trace.comp(s, 1)) + "," +
           region_name(regions.membership(trace.weight(s, 0), trace.comp(s, 0), trace.comp(s, 1))) + "\n";
  const RegionMasses occ = occupancy_stats(trace, regions);
  const json summary{{"occ_w1", occ.w1},   {"occ_w2", occ.w2}, {"occ_w3", occ.w3},          {"occ_rest", occ.rest},
                     {"eta1", c.spec.prior.eta1}, {"n", d.n()},  {"seed", cs.seed}};
  write_artifact(ctx.out("trace.csv"), csv);
  write_artifact(ctx.out("gibbs_summary.json"), ctx.wrap(summary).dump(1) + "\n");
  std::cout << summary.dump() << "\n";
  return 0;
}

int cmd_peak(const Context& ctx) {
  const ExperimentConfig& c = ctx.config;
  const Dataset d = load_or_simulate(ctx);
  const PeakResult p = peak_assignment(d, c.spec, c.peak_method, c.peak_restarts, c.master_seed);
  const json j{{"ys", p.ys}, {"labels_used", p.labels_used}, {"log_z", p.log_z}};
  write_artifact(ctx.out("peak.json"), ctx.wrap(j).dump(1) + "\n");
  std::cout << json{{"labels_used", p.labels_used}, {"log_z", p.log_z}}.dump() << "\n";
  return 0;
}

std::optional<int> trials_of(const ExperimentConfig& c) {
  return c.spec.family == Family::binomial ? std::optional<int>(c.spec.trials) : std::nullopt;
}

int cmd_phase_diagram(const Context& ctx) {
  const ExperimentConfig& c = ctx.config;
  const RunSettings rs = c.run_settings();
  const auto curves = energy_curve_sweep(c.spec, c.truth, c.eta1_list, c.n_grid, c.replicates, rs);
  std::string csv = ctx.csv_preamble("eta1,lambda_hat,ci_lo,ci_hi,lambda_theory,phase,phase_theory");
  std::string masses = ctx.csv_preamble(kMassColumns);
  RunSettings quad_rs = rs;
  quad_rs.engine = Engine::quad;
  int status = 0;
  for (std::size_t e = 0; e < c.eta1_list.size(); ++e) {
    const double eta = c.eta1_list[e];
    for (const auto& err : curves[e].errors) std::cerr << "warning: " << err << "\n";
    const LambdaFit fit = fit_lambda(curves[e].x, c.fit_model, {c.bootstrap, 0.95, c.master_seed});
    MixtureSpec spec = c.spec;
    spec.prior.eta1 = eta;
    const MassCurve mc = mass_curve(spec, c.truth, c.n_grid, c.replicates, c.regions(), quad_rs);
    if (!mc.errors.empty() || !curves[e].complete()) status = 3;
    masses += mass_rows(mc);
    std::string lambda_theory = "nan", phase_theory = "";
    try {
      const TheoryPrediction t = theory_predictions(c.spec.components, c.truth.components(), 1, eta, c.spec.family,
                                                    trials_of(c));
      if (t.lambda_x_exact) lambda_theory = g17(*t.lambda_x_exact);
      if (t.phase) phase_theory = std::string(to_string(*t.phase));
    } catch (const DomainError&) {
    }
    csv += g17(eta) + "," + g17(fit.lambda_hat) + "," + g17(fit.ci_lo) + "," + g17(fit.ci_hi) + "," + lambda_theory +
           "," + std::string(to_string(detect_phase(mc))) + "," + phase_theory + "\n";
  }
  write_artifact(ctx.out("phase_diagram.csv"), csv);
  write_artifact(ctx.out("phase_diagram_masses.csv"), masses);
  std::cout << csv;
  return status;
}

int cmd_theory(const Context& ctx) {
  const ExperimentConfig& c = ctx.config;
  const TheoryPrediction t = theory_predictions(c.spec.components, c.truth.components(), c.spec.component_dim(),
                                                c.spec.prior.eta1, c.spec.family, trials_of(c));
  json j = to_json(t);
  j["K"] = c.spec.components;
  j["Kstar"] = c.truth.components();
  j["d_c"] = c.spec.component_dim();
  j["eta1"] = c.spec.prior.eta1;
  std::cout << j.dump(1) << "\n";
  return 0;
}

int cmd_check(const Context& ctx, const std::string& criteria) {
  std::vector<int> ids;
  if (criteria.empty()) {
    for (int i = 1; i <= kCriterionCount; ++i) ids.push_back(i);
  } else {
    std::stringstream ss(criteria);
    std::string tok;
    while (std::getline(ss, tok, ','))
      try {
        ids.push_back(std::stoi(tok));
      } catch (const std::exception&) {
        throw ConfigError("bad criterion list '" + criteria + "'");
      }
    for (int id : ids)
      if (id < 1 || id > kCriterionCount) throw ConfigError("no acceptance criterion " + std::to_string(id));
  }
  AcceptanceOptions opt;
  opt.seed = ctx.config.master_seed;
  opt.threads = ctx.config.threads;
  bool all = true;
  for (int id : ids) {
    const CriterionResult r = run_criterion(id, opt);
    std::cout << format_result(r) << std::endl;
    all = all && r.passed;
  }
  return all ? 0 : 4;
}

void fail_json(const std::string& kind, const std::string& message) {
  std::cerr << json{{"error", kind}, {"message", message}}.dump() << "\n";
}

std::vector<std::int64_t> parse_int_list(const std::string& s) {
  std::vector<std::int64_t> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      out.push_back(std::stoll(tok));
    } catch (const std::exception&) {
      throw ConfigError("bad integer list '" + s + "'");
    }
  }
  return out;
}

std::vector<double> parse_double_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      out.push_back(std::stod(tok));
    } catch (const std::exception&) {
      throw ConfigError("bad number list '" + s + "'");
    }
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"singlab: Bayesian estimation experiments for singular mixture models"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  std::string config_path, out_dir, engine, n_grid, eta1_list, dataset, method, sampler, input, criteria;
  std::optional<int> threads, replicates, K, M;
  std::optional<double> eta1, tol;
  std::optional<std::int64_t> n;
  std::optional<std::uint64_t> seed, task, iters, burnin, thin;

  const std::vector<std::pair<std::string, std::string>> commands{
      {"simulate", "sample a dataset from the true model"},
      {"evidence", "log marginal likelihood of one dataset"},
      {"energy-curve", "replicated normalized free energies over the n grid"},
      {"fit-lambda", "learning coefficient fits of the energy curves"},
      {"dn-curve", "replicated latent-variable error contributions and slope"},
      {"posterior-mass", "posterior region masses over the n grid"},
      {"gibbs", "sampler trace and region occupancy"},
      {"peak", "peak label assignment of one dataset"},
      {"phase-diagram", "learning coefficient and phase for each eta1 in the list"},
      {"theory", "predicted coefficients"},
      {"check", "run the acceptance criteria"}};
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_path, "JSON experiment config");
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--threads", threads, "worker threads");
    sub->add_option("--eta1", eta1, "Dirichlet concentration");
    sub->add_option("--K", K, "learner component count");
    sub->add_option("--M", M, "binomial trial count");
    sub->add_option("--n", n, "sample size for single-dataset commands");
    sub->add_option("--task", task, "seed stream index for single-dataset commands");
    sub->add_option("--R", replicates, "replicates per grid point");
    sub->add_option("--seed", seed, "master seed");
    sub->add_option("--engine", engine, "evidence engine: complete|brute|dp|quad");
    sub->add_option("--tol", tol, "quadrature tolerance");
    sub->add_option("--n-grid", n_grid, "comma-separated sample sizes");
    sub->add_option("--eta1-list", eta1_list, "comma-separated concentrations");
    sub->add_option("--dataset", dataset, "dataset JSON instead of simulation");
    sub->add_option("--iters", iters, "sampler iterations");
    sub->add_option("--burnin", burnin, "sampler burn-in");
    sub->add_option("--thin", thin, "sampler thinning");
    sub->add_option("--sampler", sampler, "gibbs|posterior_mh");
    sub->add_option("--method", method, "peak method: exhaustive|icm_restarts");
    if (name == "fit-lambda") sub->add_option("--input", input, "energy_curve.csv to fit instead of recomputing");
    if (name == "check") sub->add_option("--criteria", criteria, "comma-separated criterion ids");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    fail_json("config", e.what());
    return 2;
  }
  const std::string command = app.get_subcommands().front()->get_name();

  Context ctx;
  try {
    json j = json::object();
    if (!config_path.empty()) {
      j = json::parse(read_file(config_path), nullptr, false);
      if (j.is_discarded()) throw ConfigError("config is not valid JSON: " + config_path);
    }
    ExperimentConfig& c = ctx.config;
    c = config_from_json(j);
    if (!out_dir.empty()) c.out = out_dir;
    if (threads) c.threads = *threads;
    if (eta1) c.spec.prior.eta1 = *eta1;
    if (K) c.spec.components = *K;
    if (M) c.spec.trials = *M;
    if (n) c.n = *n;
    if (task) c.task = *task;
    if (replicates) c.replicates = *replicates;
    if (seed) c.master_seed = *seed;
    if (!engine.empty()) c.engine = engine_from_string(engine);
    if (tol) c.quad.tol = *tol;
    if (!n_grid.empty()) c.n_grid = parse_int_list(n_grid);
    if (!eta1_list.empty()) c.eta1_list = parse_double_list(eta1_list);
    if (!dataset.empty()) c.dataset = dataset;
    if (iters) c.iters = *iters;
    if (burnin) c.burnin = *burnin;
    if (thin) c.thin = *thin;
    if (!sampler.empty()) c.sampler = sampler;
    if (!method.empty()) c.peak_method = peak_method_from_string(method);
    c.validate();
    ctx.config_json = config_to_json(c);
    ctx.config_json.erase("out");
    ctx.config_json.erase("threads");
  } catch (const ConfigError& e) {
    fail_json("config", e.what());
    return 2;
  } catch (const Error& e) {
    fail_json("config", e.what());
    return 2;
  }

  try {
    if (command == "simulate") return cmd_simulate(ctx);
    if (command == "evidence") return cmd_evidence(ctx);
    if (command == "energy-curve") return cmd_energy_curve(ctx);
    if (command == "fit-lambda") return cmd_fit_lambda(ctx, input);
    if (command == "dn-curve") return cmd_dn_curve(ctx);
    if (command == "posterior-mass") return cmd_posterior_mass(ctx);
    if (command == "gibbs") return cmd_gibbs(ctx);
    if (command == "peak") return cmd_peak(ctx);
    if (command == "phase-diagram") return cmd_phase_diagram(ctx);
    if (command == "theory") return cmd_theory(ctx);
    if (command == "check") return cmd_check(ctx, criteria);
  } catch (const GuardRefusal& e) {
    fail_json("guard", e.what());
    return 3;
  } catch (const ConvergenceError& e) {
    fail_json("convergence", e.what());
    return 3;
  } catch (const ArtifactExists& e) {
    fail_json("artifact_exists", e.what());
    return 2;
  } catch (const ConfigError& e) {
    fail_json("config", e.what());
    return 2;
  } catch (const UnsupportedEngine& e) {
    fail_json("config", e.what());
    return 2;
  } catch (const DomainError& e) {
    fail_json("config", e.what());
    return 2;
  } catch (const std::exception& e) {
    fail_json("internal", e.what());
    return 1;
  }
  return 1;
}
