#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include "ticmkv/config.hpp"

namespace ticmkv::pipeline {

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,        // unexpected error (I/O, internal)
  kConfigError = 2,
  kNotConverged = 3,   // divergence, max_iter or a numerical blow-up
  kCheckFailed = 4,
};

/// solve -> consistency_check -> spike_test as configured, writing the
/// bundle into cfg.output.directory. Returns an ExitCode.
int run(const RunConfig& cfg, std::ostream& log);

/// Re-solves the equilibrium of a bundle from its config-echo.toml and
/// reruns spike_test; prints the fresh report to `out`. kOk when the fresh
/// verdict passes and matches the bundled one.
int verify_bundle(const std::filesystem::path& bundle, int workers, std::ostream& out, std::ostream& log);

struct SimulateRequest {
  std::string model;  // general or LQ catalog name
  CatalogParams params;
  int n_particles = 10000;
  int steps = 100;
  std::uint64_t seed = 1;
  std::string strategy = "zero";  // zero | myopic
  std::vector<double> initial_mean{0.0};
  std::vector<double> initial_sd{0.0};
  int workers = 1;
  std::string paths_binary;  // optional output file
};

/// T1 under a fixed strategy; writes the curve CSV to `out`.
int simulate(const SimulateRequest& req, std::ostream& out);

struct RiccatiRequest {
  std::string catalog;
  CatalogParams params;
  int steps = 1000;
  std::string offset_form = "derived";
  std::vector<double> initial_mean{1.0};
  std::vector<double> initial_sd{1.0};
  int n_particles = 1000;
  std::uint64_t seed = 1;
  int workers = 1;
};

/// Riccati family on the constant curve at the initial cloud; writes the
/// diagonal CSV to `out`.
int riccati(const RiccatiRequest& req, std::ostream& out);

}  // namespace ticmkv::pipeline
