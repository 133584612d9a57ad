#include "ticmkv/grid.hpp"

#include <cmath>
#include <string>

namespace ticmkv {

TimeGrid::TimeGrid(double start, double end, int steps)
    : start_(start), end_(end), steps_(steps) {
  if (steps < 1) throw std::invalid_argument("TimeGrid: need at least one step");
  if (!std::isfinite(start) || !std::isfinite(end) || !(end > start)) {
    throw std::invalid_argument("TimeGrid: need finite start < end");
  }
}

TimeGrid TimeGrid::from_nodes(std::span<const double> nodes) {
  if (nodes.size() < 2) throw std::invalid_argument("TimeGrid: need at least two nodes");
  const int steps = static_cast<int>(nodes.size()) - 1;
  TimeGrid grid(nodes.front(), nodes.back(), steps);
  const double h = grid.step();
  for (int k = 0; k <= steps; ++k) {
    if (std::abs(nodes[k] - grid.node(k)) > 1e-12 * std::max(1.0, std::abs(h * steps))) {
      throw std::invalid_argument("TimeGrid: nodes are not uniform (node " + std::to_string(k) + ")");
    }
  }
  return grid;
}

double TimeGrid::node(int k) const {
  if (k >= steps_) return end_;
  return start_ + k * step();
}

std::vector<double> TimeGrid::nodes() const {
  std::vector<double> out(size());
  for (int k = 0; k <= steps_; ++k) out[k] = node(k);
  return out;
}

std::optional<int> TimeGrid::index_of(double t) const {
  const double h = step();
  const double pos = (t - start_) / h;
  const double k = std::round(pos);
  if (k < 0 || k > steps_) return std::nullopt;
  if (std::abs(pos - k) > 1e-9) return std::nullopt;
  return static_cast<int>(k);
}

int TimeGrid::floor_index(double t) const {
  const double pos = (t - start_) / step();
  if (pos <= 0) return 0;
  const double k = std::floor(pos + 1e-9);
  if (k >= steps_) return steps_;
  return static_cast<int>(k);
}

bool TimeGrid::same_as(const TimeGrid& other) const {
  const double tol = 1e-12 * std::max(1.0, std::abs(end_ - start_));
  return steps_ == other.steps_ && std::abs(start_ - other.start_) <= tol &&
         std::abs(end_ - other.end_) <= tol;
}

TimeGrid TimeGrid::tail(int first) const {
  if (first < 0 || first >= steps_) throw std::invalid_argument("TimeGrid::tail: index out of range");
  return TimeGrid(node(first), end_, steps_ - first);
}

}  // namespace ticmkv
