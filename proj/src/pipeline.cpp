#include "ticmkv/pipeline.hpp"

#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "ticmkv/io.hpp"
#include "ticmkv/rng.hpp"

namespace ticmkv::pipeline {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

// Collects bundle files in write order for the manifest.
class Bundle {
 public:
  explicit Bundle(fs::path dir) : dir_(std::move(dir)) {}

  void text(const std::string& name, const std::string& content) {
    io::write_text(dir_ / name, content);
    hashes_[name] = io::sha256_hex(content);
  }
  template <class Fn>
  void stream(const std::string& name, Fn&& fn) {
    std::ostringstream os;
    fn(os);
    text(name, os.str());
  }
  void file(const std::string& name) { hashes_[name] = io::sha256_file(dir_ / name); }
  [[nodiscard]] const fs::path& dir() const { return dir_; }

  void summary(json s) {
    json files = json::object();
    for (const auto& [k, v] : hashes_) files[k] = v;
    s["files"] = files;
    io::write_text(dir_ / "summary.json", s.dump(2) + "\n");
  }

 private:
  fs::path dir_;
  std::map<std::string, std::string> hashes_;
};

std::string model_name(const Problem& p) {
  if (const auto* lq = std::get_if<LqModelSpec>(&p)) return lq->name;
  return std::get<ModelSpec>(p).name;
}

void ensure_writable(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw ConfigError("output directory '" + dir.string() + "' is not writable");
  const fs::path probe = dir / ".write-probe";
  {
    std::ofstream f(probe);
    if (!f) throw ConfigError("output directory '" + dir.string() + "' is not writable");
  }
  fs::remove(probe, ec);
}

json history_json(const EquilibriumResult& eq) {
  json h = json::array();
  for (const auto& r : eq.history) {
    h.push_back({{"iteration", r.iteration}, {"m_distance", r.m_distance}, {"strategy_delta", r.strategy_delta}});
  }
  return h;
}

}  // namespace

int run(const RunConfig& cfg, std::ostream& log) {
  Problem problem;
  InitialLaw init;
  try {
    cfg.validate();
    problem = cfg.build_problem();
    init = cfg.build_initial();
    ensure_writable(cfg.output.directory);
  } catch (const ConfigError& e) {
    log << "config error: " << e.what() << "\n";
    return kConfigError;
  }
  const ModelSpec model = general_model(problem);
  const EquilibriumOptions opts = cfg.equilibrium_options();
  Bundle bundle(cfg.output.directory);
  bundle.text("config-echo.toml", cfg.canonical_toml());

  json summary;
  summary["model"] = model_name(problem);
  summary["kind"] = cfg.model.kind;
  summary["backend"] = cfg.numerics.backend;
  summary["seed"] = cfg.seed;
  summary["n_particles"] = cfg.numerics.n_particles;
  summary["steps"] = cfg.numerics.steps;

  EquilibriumResult eq;
  try {
    eq = solve_equilibrium(problem, init, opts);
  } catch (const NumericalError& e) {
    log << "numerical error: " << e.what() << "\n";
    summary["status"] = "numerical_error";
    summary["converged"] = false;
    summary["error"] = e.what();
    summary["exit_code"] = static_cast<int>(kNotConverged);
    bundle.summary(summary);
    return kNotConverged;
  } catch (const std::invalid_argument& e) {
    log << "config error: " << e.what() << "\n";
    return kConfigError;
  }

  bundle.stream("history.csv", [&](std::ostream& os) { write_history_csv(os, eq.history); });
  bundle.stream("curve.csv", [&](std::ostream& os) { write_curve_csv(os, eq.mu_star); });
  bundle.stream("strategy.csv", [&](std::ostream& os) { eq.strategy_star->write_csv(os); });
  if (cfg.output.surface_csv && eq.surface) {
    bundle.stream("surface.csv", [&](std::ostream& os) { eq.surface->write_surface_csv(os); });
  }
  if (cfg.output.surface_csv && eq.family) {
    bundle.stream("riccati-diagonal.csv", [&](std::ostream& os) { eq.family->write_diagonal_csv(os); });
  }
  if (cfg.output.paths_binary) {
    ParticlePaths paths{eq.mu_star, eq.seed, eq.strategy_star->kind()};
    write_paths_binary((bundle.dir() / "paths.bin").string(), paths);
    bundle.file("paths.bin");
  }

  summary["status"] = to_string(eq.status);
  summary["converged"] = eq.converged;
  summary["iterations"] = eq.iterations;
  summary["final_m_distance"] = eq.history.empty() ? 0.0 : eq.history.back().m_distance;
  summary["tol_absolute"] = eq.tol_absolute;
  summary["history"] = history_json(eq);
  log << "equilibrium: " << to_string(eq.status) << " after " << eq.iterations << " iterations\n";

  if (!eq.converged) {
    summary["exit_code"] = static_cast<int>(kNotConverged);
    bundle.summary(summary);
    return kNotConverged;
  }

  bool ok = true;
  json checks = json::object();
  try {
    if (cfg.checks.consistency) {
      const ConsistencyReport c =
          consistency_check(eq, problem, init, derive_seed(cfg.seed, 1), cfg.numerics.workers);
      checks["consistency"] = {{"m_distance", c.m_distance}, {"tolerance", c.tolerance}, {"pass", c.pass}};
      log << "consistency: m = " << c.m_distance << " (tolerance " << c.tolerance << ") "
          << (c.pass ? "pass" : "FAIL") << "\n";
      ok = ok && c.pass;
    }
    if (cfg.checks.spike) {
      const SpikeReport s = spike_test(model, eq, cfg.spike_options());
      bundle.text("spike.json", s.to_json());
      bundle.stream("spike.csv", [&](std::ostream& os) { s.write_csv(os); });
      int failed = 0;
      for (const auto& p : s.probes) failed += p.pass ? 0 : 1;
      checks["spike"] = {{"overall_pass", s.overall_pass},
                         {"probes", static_cast<int>(s.probes.size())},
                         {"failed", failed}};
      log << "spike test: " << (s.overall_pass ? "pass" : "FAIL") << " (" << failed << " of " << s.probes.size()
          << " probes failed)\n";
      ok = ok && s.overall_pass;
    }
  } catch (const NumericalError& e) {
    log << "numerical error during checks: " << e.what() << "\n";
    summary["checks"] = checks;
    summary["error"] = e.what();
    summary["exit_code"] = static_cast<int>(kNotConverged);
    bundle.summary(summary);
    return kNotConverged;
  } catch (const std::invalid_argument& e) {
    log << "config error: " << e.what() << "\n";
    return kConfigError;
  }
  summary["checks"] = checks;
  summary["exit_code"] = static_cast<int>(ok ? kOk : kCheckFailed);
  bundle.summary(summary);
  return ok ? kOk : kCheckFailed;
}

int verify_bundle(const fs::path& bundle, int workers, std::ostream& out, std::ostream& log) {
  RunConfig cfg;
  try {
    cfg = load_config(bundle / "config-echo.toml");
  } catch (const ConfigError& e) {
    log << "config error: " << e.what() << "\n";
    return kConfigError;
  }
  cfg.numerics.workers = workers;
  std::optional<bool> bundled;
  if (fs::exists(bundle / "spike.json")) {
    try {
      bundled = json::parse(io::read_text(bundle / "spike.json")).at("overall_pass").get<bool>();
    } catch (const std::exception& e) {
      log << "cannot read bundled spike.json: " << e.what() << "\n";
      return kFailure;
    }
  }
  const Problem problem = cfg.build_problem();
  EquilibriumResult eq;
  try {
    eq = solve_equilibrium(problem, cfg.build_initial(), cfg.equilibrium_options());
  } catch (const NumericalError& e) {
    log << "numerical error: " << e.what() << "\n";
    return kNotConverged;
  }
  if (!eq.converged) {
    log << "equilibrium did not converge (" << to_string(eq.status) << ")\n";
    return kNotConverged;
  }
  const SpikeReport s = spike_test(general_model(problem), eq, cfg.spike_options());
  out << s.to_json();
  log << "spike test: " << (s.overall_pass ? "pass" : "FAIL");
  if (bundled) log << " (bundle: " << (*bundled ? "pass" : "FAIL") << ")";
  log << "\n";
  if (bundled && *bundled != s.overall_pass) return kCheckFailed;
  return s.overall_pass ? kOk : kCheckFailed;
}

namespace {

Vec to_vec(const std::vector<double>& v, int dim, const char* what) {
  if (static_cast<int>(v.size()) == dim) return Eigen::Map<const Vec>(v.data(), dim);
  if (v.size() == 1) return Vec::Constant(dim, v[0]);
  throw ConfigError(std::string(what) + " does not match the model dimension");
}

InitialLaw initial_law(const std::vector<double>& mean, const std::vector<double>& sd, int dim) {
  const Vec m = to_vec(mean, dim, "initial mean");
  const Vec s = to_vec(sd, dim, "initial sd");
  if ((s.array() < 0.0).any()) throw ConfigError("initial sd must be nonnegative");
  if ((s.array() == 0.0).all()) return InitialLaw::dirac(m);
  return InitialLaw::gaussian(m, s);
}

bool is_lq_name(const std::string& name) {
  for (const auto& n : lq_catalog_names())
    if (n == name) return true;
  return false;
}

}  // namespace

int simulate(const SimulateRequest& req, std::ostream& out) {
  ModelSpec model;
  InitialLaw init;
  try {
    model = is_lq_name(req.model) ? as_general(build_lq_catalog(req.model, req.params))
                                  : build_general_catalog(req.model, req.params);
    init = initial_law(req.initial_mean, req.initial_sd, model.dim);
    if (req.strategy != "zero" && req.strategy != "myopic") throw ConfigError("strategy must be zero or myopic");
    if (req.n_particles < 1 || req.steps < 1) throw ConfigError("--n and --k must be positive");
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  const StrategyPtr strategy = req.strategy == "myopic" ? myopic_strategy(model)
                                                        : ConstantStrategy::zero(model.dim, model.control_dim);
  SimOptions sim;
  sim.n_particles = req.n_particles;
  sim.grid = TimeGrid(0.0, model.horizon, req.steps);
  sim.seed = req.seed;
  sim.workers = req.workers;
  const ParticlePaths paths = simulate_t1(model, *strategy, init, sim);
  write_curve_csv(out, paths.curve);
  if (!req.paths_binary.empty()) write_paths_binary(req.paths_binary, paths);
  return kOk;
}

int riccati(const RiccatiRequest& req, std::ostream& out) {
  LqModelSpec lq;
  InitialLaw init;
  try {
    lq = build_lq_catalog(req.catalog, req.params);
    if (req.steps < 1 || req.n_particles < 1) throw ConfigError("--k and --n must be positive");
    if (req.offset_form != "derived" && req.offset_form != "as_printed") {
      throw ConfigError("offset form must be derived or as_printed");
    }
    lq.validate(TimeGrid(0.0, lq.horizon, req.steps));
    init = initial_law(req.initial_mean, req.initial_sd, lq.dim);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  const TimeGrid grid(0.0, lq.horizon, req.steps);
  const DistributionCurve curve = DistributionCurve::constant(grid, init.sample_cloud(req.seed, req.n_particles));
  RiccatiOptions ro;
  ro.offset_form = req.offset_form == "as_printed" ? OffsetForm::as_printed : OffsetForm::derived;
  ro.workers = req.workers;
  solve_riccati_family(lq, curve, ro).write_diagonal_csv(out);
  return kOk;
}

}  // namespace ticmkv::pipeline
