#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ticmkv/config.hpp"
#include "ticmkv/pipeline.hpp"

namespace {

using namespace ticmkv;

CatalogParams parse_params(const std::vector<std::string>& items) {
  CatalogParams out;
  for (const auto& item : items) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("--param expects key=value, got '" + item + "'");
    try {
      std::size_t used = 0;
      const double v = std::stod(item.substr(eq + 1), &used);
      if (used != item.size() - eq - 1) throw std::invalid_argument(item);
      out[item.substr(0, eq)] = v;
    } catch (const std::logic_error&) {
      throw ConfigError("--param value is not a number: '" + item + "'");
    }
  }
  return out;
}

// Writes to `path`, or stdout when empty or "-".
template <class Fn>
int with_output(const std::string& path, Fn&& fn) {
  if (path.empty() || path == "-") return fn(std::cout);
  std::ofstream f(path);
  if (!f) throw ConfigError("cannot write " + path);
  return fn(f);
}

struct SolveFlags {
  std::string config;
  std::string catalog;
  std::vector<std::string> params;
  std::optional<int> n, k, kx, max_iter, spike_paths;
  std::optional<double> tol;
  std::string out;
  bool consistency = false;
  bool spike = false;
};

void add_solve_flags(CLI::App* cmd, SolveFlags& f) {
  cmd->add_option("--config", f.config, "Base TOML config (flags override it)");
  cmd->add_option("--catalog", f.catalog, "Catalog model name");
  cmd->add_option("--param", f.params, "Catalog parameter key=value (repeatable)");
  cmd->add_option("--n", f.n, "Particles");
  cmd->add_option("--k", f.k, "Time steps");
  cmd->add_option("--tol", f.tol, "Fixed-point tolerance (relative)");
  cmd->add_option("--max-iter", f.max_iter, "Fixed-point iteration cap");
  cmd->add_option("--spike-paths", f.spike_paths, "Monte-Carlo paths per spike estimate");
  cmd->add_option("--out", f.out, "Bundle directory");
  cmd->add_flag("--consistency", f.consistency, "Run the consistency check");
  cmd->add_flag("--spike", f.spike, "Run the spike test");
}

RunConfig solve_config(const SolveFlags& f, const std::string& kind, const std::string& backend) {
  RunConfig cfg;
  if (!f.config.empty()) {
    cfg = load_config(f.config);
  } else {
    cfg.model.kind = kind;
    cfg.numerics.backend = backend;
    cfg.checks.consistency = f.consistency;
    cfg.checks.spike = f.spike;
  }
  if (!f.catalog.empty()) {
    cfg.model.catalog = f.catalog;
    cfg.model.coefficients.clear();
  }
  for (const auto& [k, v] : parse_params(f.params)) cfg.model.params[k] = v;
  if (f.n) cfg.numerics.n_particles = *f.n;
  if (f.k) cfg.numerics.steps = *f.k;
  if (f.kx) cfg.numerics.x_steps = *f.kx;
  if (f.tol) cfg.numerics.tol_fp = *f.tol;
  if (f.max_iter) cfg.numerics.max_iter = *f.max_iter;
  if (f.spike_paths) cfg.numerics.spike_paths = *f.spike_paths;
  if (f.consistency) cfg.checks.consistency = true;
  if (f.spike) cfg.checks.spike = true;
  if (!f.out.empty()) cfg.output.directory = f.out;
  if (cfg.model.catalog.empty() && cfg.model.coefficients.empty()) throw ConfigError("--catalog is required");
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Time-inconsistent McKean-Vlasov equilibrium solver"};
  app.require_subcommand(1);
  app.fallthrough();
  std::optional<std::uint64_t> seed;
  int workers = 1;
  app.add_option("--seed", seed, "Master seed (overrides TIC_MKV_SEED and the config)");
  app.add_option("--workers", workers, "Worker threads, 0 = all cores; never changes results")
      ->check(CLI::NonNegativeNumber);

  auto* run = app.add_subcommand("run", "Solve, check and write a result bundle from a TOML config");
  std::string config_path;
  run->add_option("config", config_path, "Config file")->required();

  SolveFlags lq_flags;
  auto* solve_lq = app.add_subcommand("solve-lq", "Equilibrium of an LQ catalog model (Riccati backend)");
  add_solve_flags(solve_lq, lq_flags);

  SolveFlags hjb_flags;
  auto* solve_hjb = app.add_subcommand("solve-hjb1d", "Equilibrium of a 1-D model (HJB backend)");
  add_solve_flags(solve_hjb, hjb_flags);
  solve_hjb->add_option("--kx", hjb_flags.kx, "Spatial steps");

  pipeline::SimulateRequest sim;
  std::vector<std::string> sim_params;
  std::string sim_out;
  auto* simulate = app.add_subcommand("simulate", "Particle simulation under a fixed strategy; curve CSV");
  simulate->add_option("--model", sim.model, "Catalog model name")->required();
  simulate->add_option("--param", sim_params, "Catalog parameter key=value (repeatable)");
  simulate->add_option("--n", sim.n_particles, "Particles");
  simulate->add_option("--k", sim.steps, "Time steps");
  simulate->add_option("--strategy", sim.strategy, "zero or myopic");
  simulate->add_option("--initial-mean", sim.initial_mean, "Initial mean (scalar broadcasts)");
  simulate->add_option("--initial-sd", sim.initial_sd, "Initial sd; all zero gives a point mass");
  simulate->add_option("--paths-binary", sim.paths_binary, "Also dump paths to this file");
  simulate->add_option("--out", sim_out, "CSV file (default stdout)");

  pipeline::RiccatiRequest ric;
  std::vector<std::string> ric_params;
  std::string ric_out;
  auto* riccati = app.add_subcommand("riccati", "Riccati family on the initial-law curve; diagonal CSV");
  riccati->add_option("--catalog", ric.catalog, "LQ catalog model")->required();
  riccati->add_option("--param", ric_params, "Catalog parameter key=value (repeatable)");
  riccati->add_option("--k", ric.steps, "Time steps");
  riccati->add_option("--n", ric.n_particles, "Particles of the initial cloud");
  riccati->add_option("--offset-form", ric.offset_form, "derived or as_printed");
  riccati->add_option("--initial-mean", ric.initial_mean, "Initial mean");
  riccati->add_option("--initial-sd", ric.initial_sd, "Initial sd");
  riccati->add_option("--out", ric_out, "CSV file (default stdout)");

  std::string bundle;
  auto* verify = app.add_subcommand("verify", "Re-run the spike test on a saved bundle");
  verify->add_option("--bundle", bundle, "Bundle directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : pipeline::kConfigError;
  }

  try {
    if (run->parsed()) {
      RunConfig cfg = load_config(config_path);
      cfg.seed = resolve_seed(seed, cfg.seed);
      cfg.numerics.workers = workers;
      return pipeline::run(cfg, std::cerr);
    }
    if (solve_lq->parsed() || solve_hjb->parsed()) {
      const bool lq = solve_lq->parsed();
      RunConfig cfg = solve_config(lq ? lq_flags : hjb_flags, lq ? "lq" : "general", lq ? "riccati" : "hjb1d");
      if (lq && cfg.model.kind != "lq") throw ConfigError("solve-lq needs an LQ model");
      if (!lq) {
        // LQ catalogs may be solved with the HJB backend too.
        for (const auto& n : lq_catalog_names())
          if (n == cfg.model.catalog) cfg.model.kind = "lq";
        cfg.numerics.backend = "hjb1d";
      }
      cfg.seed = resolve_seed(seed, cfg.seed);
      cfg.numerics.workers = workers;
      return pipeline::run(cfg, std::cerr);
    }
    if (simulate->parsed()) {
      sim.params = parse_params(sim_params);
      sim.seed = resolve_seed(seed, 1);
      sim.workers = workers;
      return with_output(sim_out, [&](std::ostream& os) { return pipeline::simulate(sim, os); });
    }
    if (riccati->parsed()) {
      ric.params = parse_params(ric_params);
      ric.seed = resolve_seed(seed, 1);
      ric.workers = workers;
      return with_output(ric_out, [&](std::ostream& os) { return pipeline::riccati(ric, os); });
    }
    if (verify->parsed()) return pipeline::verify_bundle(bundle, workers, std::cout, std::cerr);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return pipeline::kConfigError;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return pipeline::kNotConverged;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return pipeline::kFailure;
  }
  return pipeline::kFailure;
}
