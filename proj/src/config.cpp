#include "ticmkv/config.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <set>
#include <sstream>

#include <toml.hpp>

#include "ticmkv/io.hpp"
#include "ticmkv/rng.hpp"

namespace ticmkv {

namespace {

void check_keys(const toml::table& t, const std::set<std::string>& allowed, const std::string& where) {
  for (const auto& [k, v] : t) {
    if (!allowed.count(std::string(k.str()))) {
      throw ConfigError("unknown key '" + std::string(k.str()) + "' in " + where);
    }
  }
}

const toml::table* sub_table(const toml::table& t, const std::string& key, const std::string& where) {
  const toml::node* n = t.get(key);
  if (!n) return nullptr;
  if (!n->is_table()) throw ConfigError(where + "." + key + " must be a table");
  return n->as_table();
}

double get_double(const toml::table& t, const std::string& key, double fallback, const std::string& where) {
  const toml::node* n = t.get(key);
  if (!n) return fallback;
  if (auto v = n->value<double>(); v && (n->is_floating_point() || n->is_integer())) {
    if (!std::isfinite(*v)) throw ConfigError(where + "." + key + " must be finite");
    return *v;
  }
  throw ConfigError(where + "." + key + " must be a number");
}

std::int64_t get_int(const toml::table& t, const std::string& key, std::int64_t fallback, const std::string& where) {
  const toml::node* n = t.get(key);
  if (!n) return fallback;
  if (!n->is_integer()) throw ConfigError(where + "." + key + " must be an integer");
  return *n->value<std::int64_t>();
}

bool get_bool(const toml::table& t, const std::string& key, bool fallback, const std::string& where) {
  const toml::node* n = t.get(key);
  if (!n) return fallback;
  if (!n->is_boolean()) throw ConfigError(where + "." + key + " must be a boolean");
  return *n->value<bool>();
}

std::string get_string(const toml::table& t, const std::string& key, const std::string& fallback,
                       const std::string& where) {
  const toml::node* n = t.get(key);
  if (!n) return fallback;
  if (!n->is_string()) throw ConfigError(where + "." + key + " must be a string");
  return *n->value<std::string>();
}

// A number or an array of numbers.
std::vector<double> get_vector(const toml::table& t, const std::string& key, std::vector<double> fallback,
                               const std::string& where) {
  const toml::node* n = t.get(key);
  if (!n) return fallback;
  if (n->is_integer() || n->is_floating_point()) return {get_double(t, key, 0.0, where)};
  if (!n->is_array()) throw ConfigError(where + "." + key + " must be a number or an array of numbers");
  std::vector<double> out;
  for (const auto& e : *n->as_array()) {
    auto v = e.value<double>();
    if (!v || !(e.is_integer() || e.is_floating_point()) || !std::isfinite(*v)) {
      throw ConfigError(where + "." + key + " must contain finite numbers");
    }
    out.push_back(*v);
  }
  return out;
}

const std::map<std::string, std::set<std::string>>& form_terms() {
  static const std::map<std::string, std::set<std::string>> forms{
      {"affine", {"const", "x", "mean", "second_moment", "t"}},
      {"trigonometric", {"amplitude", "freq", "phase", "const", "x", "mean"}},
      {"linear", {"scale"}},
      {"quadratic", {"x2", "x1", "const", "v2", "rate"}},
  };
  return forms;
}

// Coefficient slot -> forms it accepts.
const std::map<std::string, std::set<std::string>>& slot_forms() {
  static const std::map<std::string, std::set<std::string>> slots{
      {"drift", {"affine", "trigonometric"}},
      {"diffusion", {"affine"}},
      {"control", {"linear"}},
      {"running_state", {"quadratic"}},
      {"running_control", {"quadratic"}},
      {"terminal", {"quadratic"}},
  };
  return slots;
}

double term(const CoefficientEntry& e, const std::string& key) {
  auto it = e.terms.find(key);
  return it == e.terms.end() ? 0.0 : it->second;
}

std::function<double(double)> discount_fn(const CoefficientEntry& e) {
  const double rate = term(e, "rate");
  if (e.discount == "hyperbolic") return [rate](double s) { return 1.0 / (1.0 + rate * s); };
  if (e.discount == "exponential") return [rate](double s) { return std::exp(-rate * s); };
  return [](double) { return 1.0; };
}

CoefficientEntry entry_or(const ModelConfig& cfg, const std::string& slot, CoefficientEntry fallback) {
  auto it = cfg.coefficients.find(slot);
  return it == cfg.coefficients.end() ? fallback : it->second;
}

ModelSpec::StateDrift state_fn(const CoefficientEntry& e) {
  if (e.form == "trigonometric") {
    const double amp = term(e, "amplitude"), freq = term(e, "freq"), phase = term(e, "phase");
    const double c = term(e, "const"), cx = term(e, "x"), cm = term(e, "mean");
    return [=](double, ConstVecView x, const MomentVector& m, VecView out) {
      out[0] = amp * std::sin(freq * x[0] + phase) + c + cx * x[0] + cm * m.mean[0];
    };
  }
  const double c = term(e, "const"), cx = term(e, "x"), cm = term(e, "mean");
  const double cs = term(e, "second_moment"), ct = term(e, "t");
  return [=](double t, ConstVecView x, const MomentVector& m, VecView out) {
    out[0] = c + cx * x[0] + cm * m.mean[0] + cs * m.second_moment + ct * t;
  };
}

bool reads_measure(const CoefficientEntry& e) { return term(e, "mean") != 0.0 || term(e, "second_moment") != 0.0; }

void parse_entry(const std::string& slot, const toml::table& t, CoefficientEntry& e) {
  const std::string where = "model.coefficients." + slot;
  const auto sf = slot_forms().find(slot);
  if (sf == slot_forms().end()) throw ConfigError("unknown coefficient '" + slot + "'");
  e.form = get_string(t, "form", "", where);
  if (!sf->second.count(e.form)) throw ConfigError(where + ": form '" + e.form + "' is not accepted here");
  std::set<std::string> allowed = form_terms().at(e.form);
  allowed.insert("form");
  if (e.form == "quadratic") allowed.insert("discount");
  check_keys(t, allowed, where);
  for (const auto& key : form_terms().at(e.form)) {
    if (t.get(key)) e.terms[key] = get_double(t, key, 0.0, where);
  }
  if (e.form == "quadratic") {
    e.discount = get_string(t, "discount", "none", where);
    if (e.discount != "none" && e.discount != "hyperbolic" && e.discount != "exponential") {
      throw ConfigError(where + ".discount must be none, hyperbolic or exponential");
    }
    if (term(e, "rate") < 0.0) throw ConfigError(where + ".rate must be nonnegative");
  }
}

Vec broadcast(const std::vector<double>& v, int dim, const std::string& what) {
  if (static_cast<int>(v.size()) == dim) return Eigen::Map<const Vec>(v.data(), dim);
  if (v.size() == 1) return Vec::Constant(dim, v[0]);
  throw ConfigError(what + " has " + std::to_string(v.size()) + " entries, model dimension is " +
                    std::to_string(dim));
}

toml::array to_array(const std::vector<double>& v) {
  toml::array a;
  for (double x : v) a.push_back(x);
  return a;
}

}  // namespace

ModelSpec build_coefficient_model(const ModelConfig& cfg) {
  for (const auto& [slot, e] : cfg.coefficients) {
    if (!slot_forms().count(slot)) throw ConfigError("unknown coefficient '" + slot + "'");
  }
  if (!cfg.coefficients.count("drift") || !cfg.coefficients.count("diffusion")) {
    throw ConfigError("model.coefficients needs at least drift and diffusion");
  }
  const CoefficientEntry drift = cfg.coefficients.at("drift");
  const CoefficientEntry diffusion = cfg.coefficients.at("diffusion");
  const CoefficientEntry control = entry_or(cfg, "control", {"linear", {{"scale", 1.0}}, "none"});
  const CoefficientEntry f1 = entry_or(cfg, "running_state", {"quadratic", {}, "none"});
  const CoefficientEntry f2 = entry_or(cfg, "running_control", {"quadratic", {{"v2", 1.0}}, "none"});
  const CoefficientEntry g = entry_or(cfg, "terminal", {"quadratic", {}, "none"});
  if (!(cfg.horizon > 0.0)) throw ConfigError("model.horizon must be positive");

  ModelSpec m;
  m.name = "coefficients";
  m.horizon = cfg.horizon;
  m.drift_state = state_fn(drift);
  m.diffusion = state_fn(diffusion);
  const double scale = term(control, "scale");
  m.drift_control = [scale](double, ConstVecView, ConstVecView v, VecView out) { out[0] = scale * v[0]; };

  const auto h1 = discount_fn(f1);
  const double x2 = term(f1, "x2"), x1 = term(f1, "x1"), c1 = term(f1, "const");
  m.running_state = [=](double tau, double t, ConstVecView x, const MomentVector&) {
    return h1(t - tau) * (x2 * x[0] * x[0] + x1 * x[0] + c1);
  };
  const auto h2 = discount_fn(f2);
  const double v2 = term(f2, "v2");
  m.running_control = [=](double tau, double t, ConstVecView, ConstVecView v) { return h2(t - tau) * v2 * v[0] * v[0]; };
  const auto hg = discount_fn(g);
  const double g2 = term(g, "x2"), g1 = term(g, "x1"), g0 = term(g, "const");
  const double T = cfg.horizon;
  m.terminal = [=](double tau, ConstVecView x, const MomentVector&) {
    return hg(T - tau) * (g2 * x[0] * x[0] + g1 * x[0] + g0);
  };
  if (!cfg.psi_grid && v2 > 0.0) {
    m.psi = [scale, v2](double, ConstVecView, ConstVecView q, VecView out) { out[0] = -scale * q[0] / (2.0 * v2); };
    m.beta_psi = std::abs(scale) / (2.0 * v2);
  } else if (!cfg.psi_grid) {
    throw ConfigError("running_control.v2 must be positive unless model.psi = \"grid\"");
  }
  m.control_grid = cfg.control_grid;
  m.kappa0 = std::max({std::abs(term(drift, "x")) + std::abs(term(drift, "amplitude") * term(drift, "freq")),
                       std::abs(scale), std::abs(term(diffusion, "x"))});
  m.measure_dependent = reads_measure(drift) || reads_measure(diffusion);
  return m;
}

int RunConfig::dim() const {
  if (model.kind == "lq") return build_lq_catalog(model.catalog, model.params).dim;
  return 1;
}

Problem RunConfig::build_problem() const {
  try {
    if (model.kind == "lq") return build_lq_catalog(model.catalog, model.params);
    if (!model.catalog.empty()) {
      ModelSpec m = build_general_catalog(model.catalog, model.params);
      if (model.psi_grid) {
        m.psi = nullptr;
        m.control_grid = model.control_grid;
      }
      return m;
    }
    return build_coefficient_model(model);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

InitialLaw RunConfig::build_initial() const {
  const int d = dim();
  if (model.initial_kind == "dirac") return InitialLaw::dirac(broadcast(model.initial_mean, d, "model.initial.point"));
  Vec sd = broadcast(model.initial_sd, d, "model.initial.sd");
  if ((sd.array() < 0.0).any()) throw ConfigError("model.initial.sd must be nonnegative");
  return InitialLaw::gaussian(broadcast(model.initial_mean, d, "model.initial.mean"), sd);
}

EquilibriumOptions RunConfig::equilibrium_options() const {
  EquilibriumOptions o;
  o.tol_fp = numerics.tol_fp;
  o.max_iter = numerics.max_iter;
  o.n_particles = numerics.n_particles;
  o.steps = numerics.steps;
  o.seed = seed;
  o.backend = numerics.backend == "hjb1d" ? Backend::hjb1d : Backend::riccati;
  o.workers = numerics.workers;
  o.damping = numerics.damping;
  o.riccati.offset_form = numerics.offset_form == "as_printed" ? OffsetForm::as_printed : OffsetForm::derived;
  o.hjb.x_steps = numerics.x_steps;
  return o;
}

SpikeOptions RunConfig::spike_options() const {
  SpikeOptions s;
  s.eps_fractions = numerics.eps_ladder;
  s.mc.n_paths = numerics.spike_paths;
  s.mc.seed = derive_seed(seed, 2);
  s.mc.workers = numerics.workers;
  return s;
}

void RunConfig::validate() const {
  if (model.kind != "lq" && model.kind != "general") throw ConfigError("model.kind must be lq or general");
  if (model.kind == "lq") {
    const auto names = lq_catalog_names();
    if (std::find(names.begin(), names.end(), model.catalog) == names.end()) {
      throw ConfigError("unknown LQ catalog model '" + model.catalog + "'");
    }
  } else if (!model.catalog.empty()) {
    const auto names = general_catalog_names();
    if (std::find(names.begin(), names.end(), model.catalog) == names.end()) {
      throw ConfigError("unknown general catalog model '" + model.catalog + "'");
    }
  }
  if (model.initial_kind != "gaussian" && model.initial_kind != "dirac") {
    throw ConfigError("model.initial.kind must be gaussian or dirac");
  }
  if (numerics.backend != "riccati" && numerics.backend != "hjb1d") {
    throw ConfigError("numerics.backend must be riccati or hjb1d");
  }
  if (numerics.offset_form != "derived" && numerics.offset_form != "as_printed") {
    throw ConfigError("numerics.offset_form must be derived or as_printed");
  }
  if (numerics.backend == "riccati" && model.kind != "lq") {
    throw ConfigError("numerics.backend = riccati needs model.kind = lq");
  }
  if (numerics.n_particles < 2 || numerics.steps < 1 || numerics.x_steps < 4 || numerics.max_iter < 1 ||
      numerics.spike_paths < 2 || numerics.workers < 0) {
    throw ConfigError("numerics: counts must be positive (n_particles >= 2, x_steps >= 4)");
  }
  if (!(numerics.tol_fp > 0.0)) throw ConfigError("numerics.tol_fp must be positive");
  if (!(numerics.damping > 0.0 && numerics.damping <= 1.0)) throw ConfigError("numerics.damping must lie in (0, 1]");
  if (numerics.eps_ladder.empty()) throw ConfigError("numerics.eps_ladder must not be empty");
  for (std::size_t i = 0; i < numerics.eps_ladder.size(); ++i) {
    if (!(numerics.eps_ladder[i] > 0.0) || (i > 0 && !(numerics.eps_ladder[i] < numerics.eps_ladder[i - 1]))) {
      throw ConfigError("numerics.eps_ladder must be positive and strictly decreasing");
    }
  }
  if (output.directory.empty()) throw ConfigError("output.directory must not be empty");
  const Problem p = build_problem();
  const ModelSpec g = general_model(p);
  if (numerics.backend == "hjb1d" && g.dim != 1) throw ConfigError("numerics.backend = hjb1d needs a 1-D model");
  try {
    g.validate();
    if (const auto* lq = std::get_if<LqModelSpec>(&p)) lq->validate(TimeGrid(0.0, lq->horizon, numerics.steps));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  (void)build_initial();
}

RunConfig parse_config(const std::string& text) {
  toml::table root;
  try {
    root = toml::parse(text);
  } catch (const toml::parse_error& e) {
    std::ostringstream os;
    os << "TOML parse error: " << e.description() << " at line " << e.source().begin.line;
    throw ConfigError(os.str());
  }
  check_keys(root, {"seed", "model", "numerics", "checks", "output"}, "config");
  RunConfig c;
  const std::int64_t seed = get_int(root, "seed", 1, "config");
  if (seed < 0) throw ConfigError("seed must be nonnegative");
  c.seed = static_cast<std::uint64_t>(seed);

  const toml::table* model = sub_table(root, "model", "config");
  if (!model) throw ConfigError("missing [model] section");
  check_keys(*model, {"kind", "catalog", "params", "initial", "coefficients", "horizon", "psi", "control_grid"},
             "model");
  c.model.kind = get_string(*model, "kind", "lq", "model");
  c.model.catalog = get_string(*model, "catalog", "", "model");
  c.model.horizon = get_double(*model, "horizon", 1.0, "model");
  const std::string psi = get_string(*model, "psi", "closed_form", "model");
  if (psi != "closed_form" && psi != "grid") throw ConfigError("model.psi must be closed_form or grid");
  c.model.psi_grid = psi == "grid";
  if (const toml::node* n = model->get("control_grid")) {
    const std::vector<double> cg = get_vector(*model, "control_grid", {}, "model");
    if (!n->is_array() || cg.size() != 3 || !(cg[0] < cg[1]) || cg[2] < 2 || cg[2] != std::floor(cg[2])) {
      throw ConfigError("model.control_grid must be [lower, upper, points] with lower < upper, points >= 2");
    }
    c.model.control_grid = {Vec::Constant(1, cg[0]), Vec::Constant(1, cg[1]), static_cast<int>(cg[2])};
  }
  if (const toml::table* params = sub_table(*model, "params", "model")) {
    for (const auto& [k, v] : *params) {
      c.model.params[std::string(k.str())] = get_double(*params, std::string(k.str()), 0.0, "model.params");
    }
  }
  if (const toml::table* init = sub_table(*model, "initial", "model")) {
    check_keys(*init, {"kind", "mean", "sd", "point"}, "model.initial");
    c.model.initial_kind = get_string(*init, "kind", "gaussian", "model.initial");
    if (c.model.initial_kind == "dirac") {
      c.model.initial_mean = get_vector(*init, "point", {0.0}, "model.initial");
      c.model.initial_sd = {0.0};
    } else {
      c.model.initial_mean = get_vector(*init, "mean", {1.0}, "model.initial");
      c.model.initial_sd = get_vector(*init, "sd", {1.0}, "model.initial");
    }
  }
  if (const toml::table* coeffs = sub_table(*model, "coefficients", "model")) {
    if (c.model.kind != "general" || !c.model.catalog.empty()) {
      throw ConfigError("model.coefficients needs model.kind = general and no catalog");
    }
    for (const auto& [k, v] : *coeffs) {
      const std::string slot(k.str());
      if (!v.is_table()) throw ConfigError("model.coefficients." + slot + " must be a table");
      parse_entry(slot, *v.as_table(), c.model.coefficients[slot]);
    }
  } else if (c.model.kind == "general" && c.model.catalog.empty()) {
    throw ConfigError("general model needs a catalog or [model.coefficients]");
  }

  if (const toml::table* num = sub_table(root, "numerics", "config")) {
    check_keys(*num,
               {"backend", "offset_form", "n_particles", "steps", "x_steps", "tol_fp", "max_iter", "damping",
                "eps_ladder", "spike_paths", "workers"},
               "numerics");
    auto& n = c.numerics;
    n.backend = get_string(*num, "backend", n.backend, "numerics");
    n.offset_form = get_string(*num, "offset_form", n.offset_form, "numerics");
    n.n_particles = static_cast<int>(get_int(*num, "n_particles", n.n_particles, "numerics"));
    n.steps = static_cast<int>(get_int(*num, "steps", n.steps, "numerics"));
    n.x_steps = static_cast<int>(get_int(*num, "x_steps", n.x_steps, "numerics"));
    n.tol_fp = get_double(*num, "tol_fp", n.tol_fp, "numerics");
    n.max_iter = static_cast<int>(get_int(*num, "max_iter", n.max_iter, "numerics"));
    n.damping = get_double(*num, "damping", n.damping, "numerics");
    n.eps_ladder = get_vector(*num, "eps_ladder", n.eps_ladder, "numerics");
    n.spike_paths = static_cast<int>(get_int(*num, "spike_paths", n.spike_paths, "numerics"));
    n.workers = static_cast<int>(get_int(*num, "workers", n.workers, "numerics"));
  }
  if (c.model.kind == "general" && !root.at_path("numerics.backend")) c.numerics.backend = "hjb1d";
  if (const toml::table* chk = sub_table(root, "checks", "config")) {
    check_keys(*chk, {"consistency", "spike"}, "checks");
    c.checks.consistency = get_bool(*chk, "consistency", true, "checks");
    c.checks.spike = get_bool(*chk, "spike", true, "checks");
  }
  if (const toml::table* out = sub_table(root, "output", "config")) {
    check_keys(*out, {"directory", "paths_binary", "surface_csv"}, "output");
    c.output.directory = get_string(*out, "directory", c.output.directory, "output");
    c.output.paths_binary = get_bool(*out, "paths_binary", false, "output");
    c.output.surface_csv = get_bool(*out, "surface_csv", false, "output");
  }
  c.validate();
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = io::read_text(path);
  } catch (const std::runtime_error& e) {
    throw ConfigError(e.what());
  }
  return parse_config(text);
}

std::string RunConfig::canonical_toml() const {
  toml::table root;
  root.insert("seed", static_cast<std::int64_t>(seed));

  toml::table m;
  m.insert("kind", model.kind);
  if (!model.catalog.empty()) m.insert("catalog", model.catalog);
  if (model.kind == "general" && model.catalog.empty()) m.insert("horizon", model.horizon);
  m.insert("psi", model.psi_grid ? "grid" : "closed_form");
  if (model.psi_grid) {
    toml::array cg;
    cg.push_back(model.control_grid.lower[0]);
    cg.push_back(model.control_grid.upper[0]);
    cg.push_back(static_cast<double>(model.control_grid.points));
    m.insert("control_grid", cg);
  }
  toml::table params;
  for (const auto& [k, v] : model.params) params.insert(k, v);
  m.insert("params", params);
  toml::table init;
  init.insert("kind", model.initial_kind);
  if (model.initial_kind == "dirac") {
    init.insert("point", to_array(model.initial_mean));
  } else {
    init.insert("mean", to_array(model.initial_mean));
    init.insert("sd", to_array(model.initial_sd));
  }
  m.insert("initial", init);
  if (!model.coefficients.empty()) {
    toml::table coeffs;
    for (const auto& [slot, e] : model.coefficients) {
      toml::table t;
      t.insert("form", e.form);
      for (const auto& [k, v] : e.terms) t.insert(k, v);
      if (e.form == "quadratic") t.insert("discount", e.discount);
      coeffs.insert(slot, t);
    }
    m.insert("coefficients", coeffs);
  }
  root.insert("model", m);

  toml::table n;
  n.insert("backend", numerics.backend);
  n.insert("offset_form", numerics.offset_form);
  n.insert("n_particles", numerics.n_particles);
  n.insert("steps", numerics.steps);
  n.insert("x_steps", numerics.x_steps);
  n.insert("tol_fp", numerics.tol_fp);
  n.insert("max_iter", numerics.max_iter);
  n.insert("damping", numerics.damping);
  n.insert("eps_ladder", to_array(numerics.eps_ladder));
  n.insert("spike_paths", numerics.spike_paths);
  root.insert("numerics", n);

  toml::table chk;
  chk.insert("consistency", checks.consistency);
  chk.insert("spike", checks.spike);
  root.insert("checks", chk);

  toml::table out;
  out.insert("directory", output.directory);
  out.insert("paths_binary", output.paths_binary);
  out.insert("surface_csv", output.surface_csv);
  root.insert("output", out);

  std::ostringstream os;
  os << root << "\n";
  return os.str();
}

std::uint64_t resolve_seed(std::optional<std::uint64_t> flag, std::uint64_t configured) {
  if (flag) return *flag;
  if (const char* env = std::getenv("TIC_MKV_SEED"); env && *env) {
    char* end = nullptr;
    errno = 0;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (errno != 0 || *end != '\0' || env[0] == '-') throw ConfigError("TIC_MKV_SEED must be a nonnegative integer");
    return v;
  }
  return configured;
}

}  // namespace ticmkv
