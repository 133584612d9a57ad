#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "ticmkv/grid.hpp"

namespace ticmkv {

/// Equal-weight empirical probability measure on R^d: N points, weight 1/N
/// each. Points are stored contiguously, point i at [i*d, (i+1)*d).
class EmpiricalMeasure {
 public:
  EmpiricalMeasure() = default;
  EmpiricalMeasure(int dim, std::vector<double> coordinates);

  /// Convenience for d = 1.
  static EmpiricalMeasure from_scalars(std::vector<double> values);

  [[nodiscard]] int dim() const { return dim_; }
  [[nodiscard]] int count() const { return static_cast<int>(data_.size()) / dim_; }
  [[nodiscard]] ConstVecView point(int i) const {
    return {data_.data() + static_cast<std::size_t>(i) * dim_, static_cast<std::size_t>(dim_)};
  }
  [[nodiscard]] VecView point(int i) {
    return {data_.data() + static_cast<std::size_t>(i) * dim_, static_cast<std::size_t>(dim_)};
  }
  [[nodiscard]] const std::vector<double>& coordinates() const { return data_; }
  [[nodiscard]] std::vector<double>& coordinates() { return data_; }

  /// Throws NumericalError if any coordinate is NaN or infinite.
  void check_finite() const;

 private:
  int dim_ = 1;
  std::vector<double> data_;
};

/// A scalar functional phi whose integral against a measure feeds
/// measure-dependent coefficients.
struct MomentFunctional {
  std::string name;
  std::function<double(ConstVecView)> phi;
};

/// Sample averages that carry every measure dependence of model
/// coefficients.
struct MomentVector {
  Vec mean;
  double second_moment = 0.0;
  std::vector<double> generalized;

  [[nodiscard]] double variance() const { return second_moment - mean.squaredNorm(); }
};

MomentVector moments(const EmpiricalMeasure& mu, const std::vector<MomentFunctional>& functionals = {});

/// Time-gridded sequence of empirical measures with a shared dimension and
/// particle count. Slot i of every node holds particle i when the curve
/// comes from a simulation.
class DistributionCurve {
 public:
  DistributionCurve() = default;
  DistributionCurve(TimeGrid grid, std::vector<EmpiricalMeasure> measures);

  /// Curve equal to `mu` at every node.
  static DistributionCurve constant(const TimeGrid& grid, const EmpiricalMeasure& mu);

  [[nodiscard]] const TimeGrid& grid() const { return grid_; }
  [[nodiscard]] int dim() const { return measures_.front().dim(); }
  [[nodiscard]] int count() const { return measures_.front().count(); }
  [[nodiscard]] int size() const { return static_cast<int>(measures_.size()); }
  [[nodiscard]] const EmpiricalMeasure& at(int k) const { return measures_.at(k); }
  [[nodiscard]] const std::vector<EmpiricalMeasure>& measures() const { return measures_; }

  /// The part of the curve on nodes k >= first.
  [[nodiscard]] DistributionCurve tail(int first) const;

  [[nodiscard]] std::vector<MomentVector> node_moments(
      const std::vector<MomentFunctional>& functionals = {}) const;

 private:
  TimeGrid grid_;
  std::vector<EmpiricalMeasure> measures_;
};

struct W2Method {
  enum class Kind { automatic, exact1d, assignment, sliced };
  Kind kind = Kind::automatic;
  int projections = 64;
  std::uint64_t seed = 0x5EEDu;

  static W2Method automatic() { return {}; }
  static W2Method exact1d() { return {Kind::exact1d}; }
  static W2Method assignment() { return {Kind::assignment}; }
  static W2Method sliced(int n_proj, std::uint64_t seed = 0x5EEDu) { return {Kind::sliced, n_proj, seed}; }

  /// Resolves `automatic` for clouds of dimension `dim` and size `count`:
  /// exact1d for d = 1, assignment for N <= 512, sliced(64) otherwise.
  [[nodiscard]] W2Method resolve(int dim, int count) const;
  [[nodiscard]] bool exact() const { return kind != Kind::sliced; }
  [[nodiscard]] std::string name() const;
};

/// Wasserstein-2 distance between two empirical measures.
///
/// exact1d couples quantile functions and is exact for any pair of counts;
/// assignment solves the equal-count matching problem exactly (Hungarian,
/// O(N^3)); sliced averages squared 1-D distances over random directions
/// and is an approximation.
double wasserstein2(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu,
                    W2Method method = W2Method::automatic());

/// Uniform metric on curves: sup over grid nodes of the node-wise W2.
double curve_distance_m(const DistributionCurve& c1, const DistributionCurve& c2,
                        W2Method method = W2Method::automatic());

struct CouplingBoundReport {
  double w2 = 0.0;
  double l2 = 0.0;  // mean of |x_i - y_i|^2
  bool ok = false;
};

/// Checks w^2(law x, law y) <= E|x - y|^2 for index-paired samples.
CouplingBoundReport coupling_bound_check(const EmpiricalMeasure& paired_x, const EmpiricalMeasure& paired_y);

/// max over node pairs s != t of w^2(mu(t), mu(s)) / |t - s|.
double holder_profile(const DistributionCurve& c, W2Method method = W2Method::automatic());

/// CSV with one row per node: t, mean_1..mean_d, second_moment, and the
/// nine deciles q10..q90 when d = 1.
void write_curve_csv(std::ostream& out, const DistributionCurve& c);

}  // namespace ticmkv
