#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ticmkv/measures.hpp"
#include "ticmkv/model.hpp"
#include "ticmkv/rng.hpp"
#include "ticmkv/strategy.hpp"

namespace ticmkv {

/// Initial law gamma: an independent Gaussian per coordinate, a point mass,
/// or resampling of a given cloud (particle i takes point i mod M).
class InitialLaw {
 public:
  static InitialLaw gaussian(Vec mean, Vec sd);
  static InitialLaw dirac(Vec point);
  static InitialLaw from_cloud(EmpiricalMeasure cloud);

  [[nodiscard]] int dim() const;
  /// Writes particle i's starting point. Pure in (rng seed, i).
  void sample(const CounterRng& rng, int i, VecView out) const;
  [[nodiscard]] EmpiricalMeasure sample_cloud(std::uint64_t seed, int n) const;
  /// Integral of |x|^2 against the law (exact for all three kinds).
  [[nodiscard]] double second_moment() const;
  [[nodiscard]] std::string describe() const;

 private:
  enum class Kind { gaussian, dirac, cloud };
  Kind kind_ = Kind::dirac;
  Vec mean_;
  Vec sd_;
  EmpiricalMeasure cloud_;
};

struct SimOptions {
  int n_particles = 1000;
  TimeGrid grid;            // must end at the model horizon
  std::uint64_t seed = 1;
  int workers = 1;          // 0 = hardware concurrency; never changes results
};

/// Particle paths; node k of `curve` holds X_i(t_k) for every particle i.
struct ParticlePaths {
  DistributionCurve curve;
  std::uint64_t seed = 0;
  std::string strategy_id;

  [[nodiscard]] double value(int k, int i, int j = 0) const { return curve.at(k).point(i)[j]; }
};

/// Euler-Maruyama for the McKean-Vlasov SDE with the particle cloud's
/// MomentVector standing in for the law at every step. Throws
/// NumericalError when max |X| exceeds 1e8 or turns non-finite.
ParticlePaths simulate_t1(const ModelSpec& model, const FeedbackStrategy& strategy, const InitialLaw& init,
                          const SimOptions& opts);

/// Same as simulate_t1 but every particle reads the given per-node moments
/// instead of the cloud's own.
ParticlePaths simulate_given_law(const ModelSpec& model, const FeedbackStrategy& strategy,
                                 const InitialLaw& init, const std::vector<MomentVector>& law,
                                 const SimOptions& opts);

struct CostSamples {
  std::vector<double> running;   // left-endpoint quadrature of f(tau; .)
  std::vector<double> terminal;  // g(tau; Y(T))
  [[nodiscard]] std::vector<double> total() const;
};

/// N paths of the frozen-law SDE started at (t0, x0); costs are evaluated
/// for evaluation time tau. Path i at grid step k uses the same normal draw
/// as particle i of simulate_t1 at step k (whatever t0 is), so two calls
/// with the same seed share noise.
CostSamples simulate_frozen(const ModelSpec& model, const FeedbackStrategy& control,
                            const DistributionCurve& frozen_curve, double t0, ConstVecView x0, double tau,
                            const SimOptions& opts);
/// Overload taking precomputed node moments of the frozen curve.
CostSamples simulate_frozen(const ModelSpec& model, const FeedbackStrategy& control, const TimeGrid& grid,
                            const std::vector<MomentVector>& frozen_moments, double t0, ConstVecView x0,
                            double tau, const SimOptions& opts);

struct PicardResult {
  DistributionCurve curve;
  std::vector<double> distances;  // m between successive iterates
  int iterations = 0;
};

/// Picard iteration on the law: iterate n+1 reads the moments of iterate n,
/// all iterates share noise. Throws std::runtime_error if tol is not reached
/// within max_iter.
PicardResult picard_iterate_law(const ModelSpec& model, const FeedbackStrategy& strategy, const InitialLaw& init,
                                const SimOptions& opts, double tol, int max_iter);

/// N-player game: player i reads the empirical moments of the other
/// players only. Noise streams match simulate_t1 for the same seed.
ParticlePaths simulate_n_player(const ModelSpec& model, const FeedbackStrategy& strategy, const InitialLaw& init,
                                const SimOptions& opts);

struct MomentReport {
  double sup_second = 0.0;  // mean over paths of sup_t |X(t)|^2
  double sup_2plus = 0.0;   // mean over paths of sup_t |X(t)|^(2+delta)
  double holder = 0.0;
};

MomentReport moment_report(const ParticlePaths& paths, double delta);

/// Little-endian binary dump: uint64 header {K+1, N, d, seed}, then float64
/// values in [k][i][j] order.
void write_paths_binary(const std::string& path, const ParticlePaths& paths);
ParticlePaths read_paths_binary(const std::string& path, const TimeGrid& grid);

}  // namespace ticmkv
