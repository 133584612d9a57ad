#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "ticmkv/hjb1d.hpp"
#include "ticmkv/measures.hpp"
#include "ticmkv/model.hpp"
#include "ticmkv/riccati.hpp"
#include "ticmkv/simulate.hpp"
#include "ticmkv/strategy.hpp"

namespace ticmkv {

enum class Backend { riccati, hjb1d };

using Problem = std::variant<LqModelSpec, ModelSpec>;

/// The general-form model of a problem (as_general for LQ specs).
ModelSpec general_model(const Problem& problem);

/// psi(t, x, 0): the control that ignores the value gradient.
StrategyPtr myopic_strategy(const ModelSpec& model);

struct EquilibriumOptions {
  double tol_fp = 1e-3;          // relative to the RMS scale sqrt(sup second moment) of the newest curve
  int max_iter = 50;
  int n_particles = 10000;
  int steps = 100;               // time steps K on [t_start, T]
  double t_start = 0.0;
  std::uint64_t seed = 1;
  Backend backend = Backend::riccati;
  int workers = 1;
  double damping = 1.0;          // LQ offsets: k <- damping k_new + (1 - damping) k_old
  int strategy_sample = 64;      // particles per node used for strategy_delta
  RiccatiOptions riccati;
  HjbOptions hjb;
  /// Replaces the constant initial curve; must live on the same grid.
  std::optional<DistributionCurve> initial_curve;
};

struct IterationRecord {
  int iteration = 0;
  double m_distance = 0.0;
  double contraction_ratio = 0.0;  // NaN for the first iteration
  double strategy_delta = 0.0;     // first iteration: distance to the zero control
};

enum class EquilibriumStatus { converged, max_iter, diverged };
std::string to_string(EquilibriumStatus status);

struct EquilibriumResult {
  DistributionCurve mu_star;
  StrategyPtr strategy_star;
  std::vector<IterationRecord> history;
  bool converged = false;
  EquilibriumStatus status = EquilibriumStatus::max_iter;
  int iterations = 0;
  std::uint64_t seed = 0;
  double tol_absolute = 0.0;  // tol_fp times the scale in force at the last iteration
  std::shared_ptr<const RiccatiFamily> family;   // riccati backend
  std::shared_ptr<const ValueSurface> surface;   // hjb1d backend
  std::optional<XDomain> hjb_domain;
};

/// Fixed point of T1 o T2 started from the constant curve at the initial
/// cloud, with common random numbers across iterations. Stops when the
/// curve distance drops below tol_fp * sqrt(sup second moment), after max_iter
/// iterations, or when the distance grows three times in a row.
EquilibriumResult solve_equilibrium(const Problem& problem, const InitialLaw& init, const EquilibriumOptions& opts);

/// T2 alone: the equilibrium strategy for a frozen curve.
StrategyPtr backward_solve(const Problem& problem, const DistributionCurve& mu, const EquilibriumOptions& opts,
                           std::shared_ptr<const RiccatiFamily>* family = nullptr,
                           std::shared_ptr<const ValueSurface>* surface = nullptr);

struct ConsistencyReport {
  double m_distance = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

/// Re-simulates T1 under strategy_star with `fresh_seed` and the same N and
/// grid; passes when m <= factor * N^{-1/2} * sup second moment of mu_star.
ConsistencyReport consistency_check(const EquilibriumResult& result, const Problem& problem, const InitialLaw& init,
                                    std::uint64_t fresh_seed, int workers = 1, double factor = 5.0);

struct ContractionReport {
  std::vector<double> ratios;
  double fitted_rate = 0.0;  // exp of the least-squares slope of log distance
  bool is_contraction = false;
};

/// Throws std::invalid_argument with fewer than two iterations.
ContractionReport contraction_report(const std::vector<IterationRecord>& history);
ContractionReport contraction_report(const std::vector<double>& distances);

/// History CSV: iteration, m_distance, contraction_ratio, strategy_delta.
void write_history_csv(std::ostream& out, const std::vector<IterationRecord>& history);

}  // namespace ticmkv
