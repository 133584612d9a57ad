#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "ticmkv/equilibrium.hpp"
#include "ticmkv/measures.hpp"
#include "ticmkv/model.hpp"
#include "ticmkv/strategy.hpp"

namespace ticmkv {

struct McOptions {
  int n_paths = 20000;
  std::uint64_t seed = 99;
  int workers = 1;
};

struct CostEstimate {
  double mean = 0.0;
  double std_error = 0.0;
};

/// Monte-Carlo J(tau; t, x; control) on the frozen curve. Calls sharing
/// mc.seed share noise.
CostEstimate estimate_cost_j(const ModelSpec& model, const DistributionCurve& frozen_curve,
                             const FeedbackStrategy& control, double tau, double t, ConstVecView x,
                             const McOptions& mc);

struct SpikeOptions {
  std::vector<double> probe_times{0.1, 0.3, 0.5};        // fractions of T, snapped to the grid
  std::vector<double> probe_quantiles{0.2, 0.5, 0.8};    // of mu*(t), per coordinate
  std::vector<double> probe_offsets{-1.0, -0.5, 0.5, 1.0};  // added to u*(t,x) per control coordinate
  std::vector<Vec> extra_controls;                        // absolute probe controls
  std::vector<double> eps_fractions{0.08, 0.04, 0.02, 0.01};  // of T, strictly decreasing
  McOptions mc;
  double stat_factor = 3.0;
};

struct SpikeRung {
  double epsilon = 0.0;
  double D = 0.0;  // (J(u) - J(spike)) / epsilon
  double std_error = 0.0;
};

struct SpikeProbe {
  int point = 0;  // probe point index
  double t = 0.0;
  Vec x;
  Vec control;
  std::vector<SpikeRung> rungs;
  double limit = 0.0;      // least-squares intercept of D against epsilon
  double threshold = 0.0;  // stat_factor * stderr of the finest rung
  bool pass = false;
};

struct SpikeReport {
  std::vector<SpikeProbe> probes;
  bool overall_pass = false;
  McOptions mc;
  double stat_factor = 3.0;

  [[nodiscard]] std::string to_json() const;
  /// Columns probe, t, x, control, epsilon, D, stderr (first coordinates).
  void write_csv(std::ostream& out) const;
};

/// Spike-variation test of `strategy` against the frozen curve `mu`: for each
/// probe point and probe control v, compares J under the strategy with J
/// under v on [t, t+eps) followed by the strategy, with shared noise.
SpikeReport spike_test(const ModelSpec& model, const DistributionCurve& mu, StrategyPtr strategy,
                       const SpikeOptions& options = {});
SpikeReport spike_test(const ModelSpec& model, const EquilibriumResult& eq, const SpikeOptions& options = {});

struct ReductionReport {
  double gain_gap = 0.0;
  double offset_gap = 0.0;
};

/// Classical one-parameter LQ solve (RK4, drift offset linear between
/// nodes) compared with the equilibrium strategy of the Riccati family on
/// the same frozen curve. Throws std::invalid_argument when Q, R or G vary
/// with tau on the grid.
ReductionReport time_consistent_reduction_check(const LqModelSpec& lq, const DistributionCurve& mu);

/// Classical feedback gains and offsets on the grid of `mu`.
void classical_lq_feedback(const LqModelSpec& lq, const DistributionCurve& mu, std::vector<Mat>& gains,
                           std::vector<Vec>& offsets, std::vector<Mat>* P = nullptr, std::vector<Vec>* p = nullptr);

}  // namespace ticmkv
