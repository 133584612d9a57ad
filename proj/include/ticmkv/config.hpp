#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ticmkv/equilibrium.hpp"
#include "ticmkv/model.hpp"
#include "ticmkv/simulate.hpp"
#include "ticmkv/verify.hpp"

namespace ticmkv {

/// Malformed or inconsistent run configuration (CLI exit code 2).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One coefficient of a general 1-D model assembled from TOML. `form`
/// selects the family; `terms` holds its named scalars.
struct CoefficientEntry {
  std::string form;
  std::map<std::string, double> terms;
  std::string discount = "none";  // quadratic forms: none | hyperbolic | exponential
};

struct ModelConfig {
  std::string kind = "lq";  // lq | general
  std::string catalog;      // empty for a general model built from coefficients
  CatalogParams params;
  std::map<std::string, CoefficientEntry> coefficients;
  double horizon = 1.0;     // coefficient models only
  bool psi_grid = false;    // force the grid argmin
  ControlGrid control_grid{Vec::Constant(1, -10.0), Vec::Constant(1, 10.0), 201};

  std::string initial_kind = "gaussian";  // gaussian | dirac
  std::vector<double> initial_mean{1.0};  // broadcast when of length 1
  std::vector<double> initial_sd{1.0};
};

struct NumericsConfig {
  std::string backend = "riccati";  // riccati | hjb1d
  std::string offset_form = "derived";
  int n_particles = 10000;
  int steps = 100;
  int x_steps = 200;
  double tol_fp = 1e-3;
  int max_iter = 50;
  double damping = 1.0;
  std::vector<double> eps_ladder{0.08, 0.04, 0.02, 0.01};
  int spike_paths = 20000;
  int workers = 1;  // never affects results, not echoed
};

struct ChecksConfig {
  bool consistency = true;
  bool spike = true;
};

struct OutputConfig {
  std::string directory = "out";
  bool paths_binary = false;
  bool surface_csv = false;
};

struct RunConfig {
  std::uint64_t seed = 1;
  ModelConfig model;
  NumericsConfig numerics;
  ChecksConfig checks;
  OutputConfig output;

  /// Throws ConfigError on unknown names, bad forms or non-positive numerics.
  void validate() const;

  [[nodiscard]] Problem build_problem() const;
  [[nodiscard]] InitialLaw build_initial() const;
  [[nodiscard]] EquilibriumOptions equilibrium_options() const;
  [[nodiscard]] SpikeOptions spike_options() const;
  [[nodiscard]] int dim() const;

  /// Canonical TOML with every field explicit (workers excluded). Parsing
  /// the echo gives back the same configuration.
  [[nodiscard]] std::string canonical_toml() const;
};

/// Parses and validates; relative output directories stay relative.
RunConfig parse_config(const std::string& toml_text);
RunConfig load_config(const std::filesystem::path& path);

/// General 1-D model from a coefficient registry (see README for forms).
ModelSpec build_coefficient_model(const ModelConfig& cfg);

/// `--seed` beats TIC_MKV_SEED beats the configured value.
std::uint64_t resolve_seed(std::optional<std::uint64_t> flag, std::uint64_t configured);

}  // namespace ticmkv
