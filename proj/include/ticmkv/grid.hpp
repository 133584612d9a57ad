#pragma once

#include <Eigen/Dense>

#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace ticmkv {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using ConstVecView = std::span<const double>;
using VecView = std::span<double>;

/// Raised when a computation produces non-finite values, blows up, or
/// violates a stability bound of the discretization.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Uniform time grid start = t_0 < t_1 < ... < t_K = end.
///
/// The last node is pinned to `end` exactly so that h * K reproduces the
/// horizon without accumulated rounding.
class TimeGrid {
 public:
  TimeGrid() = default;
  TimeGrid(double start, double end, int steps);

  /// Builds a grid from explicit nodes; they must be uniform to relative
  /// tolerance 1e-12.
  static TimeGrid from_nodes(std::span<const double> nodes);

  [[nodiscard]] double start() const { return start_; }
  [[nodiscard]] double end() const { return end_; }
  [[nodiscard]] int steps() const { return steps_; }
  [[nodiscard]] int size() const { return steps_ + 1; }
  [[nodiscard]] double step() const { return (end_ - start_) / steps_; }
  [[nodiscard]] double node(int k) const;
  [[nodiscard]] std::vector<double> nodes() const;

  /// Index of the node equal to t (within 1e-9 of a step), if any.
  [[nodiscard]] std::optional<int> index_of(double t) const;
  /// Largest node index k with t_k <= t, clamped to [0, K].
  [[nodiscard]] int floor_index(double t) const;

  /// Same start, end and step count.
  [[nodiscard]] bool same_as(const TimeGrid& other) const;

  /// Grid made of the nodes k >= first of this grid.
  [[nodiscard]] TimeGrid tail(int first) const;

 private:
  double start_ = 0.0;
  double end_ = 1.0;
  int steps_ = 1;
};

}  // namespace ticmkv
