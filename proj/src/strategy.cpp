#include "ticmkv/strategy.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include "ticmkv/csv.hpp"

namespace ticmkv {

void FeedbackStrategy::write_csv(std::ostream&) const {
  throw std::logic_error("strategy of kind '" + kind() + "' has no tabulated form");
}

Vec FeedbackStrategy::operator()(double t, ConstVecView x) const {
  Vec u(control_dim());
  evaluate(t, x, {u.data(), static_cast<std::size_t>(u.size())});
  return u;
}

double FeedbackStrategy::scalar(double t, double x) const {
  double u = 0.0;
  evaluate(t, {&x, 1}, {&u, 1});
  return u;
}

StrategyPtr ConstantStrategy::zero(int state_dim, int control_dim) {
  return std::make_shared<ConstantStrategy>(state_dim, Vec::Zero(control_dim));
}

void ConstantStrategy::evaluate(double, ConstVecView, VecView u) const {
  for (int j = 0; j < value_.size(); ++j) u[j] = value_[j];
}

namespace {

// Index k and weight w with t = (1-w) t_k + w t_{k+1}, clamped to the grid.
inline void locate(const TimeGrid& grid, double t, int& k, double& w) {
  const double s = (t - grid.start()) / grid.step();
  if (s <= 0.0) {
    k = 0;
    w = 0.0;
    return;
  }
  if (s >= grid.steps()) {
    k = grid.steps() - 1;
    w = 1.0;
    return;
  }
  k = static_cast<int>(std::floor(s));
  w = s - k;
  // Snap nodes so that evaluation at t_k reads the node value exactly.
  if (w < 1e-9) w = 0.0;
  if (w > 1.0 - 1e-9) {
    ++k;
    w = 0.0;
    if (k == grid.steps()) {
      k = grid.steps() - 1;
      w = 1.0;
    }
  }
}

}  // namespace

AffineStrategy::AffineStrategy(TimeGrid grid, std::vector<Mat> gains, std::vector<Vec> offsets)
    : grid_(grid), gains_(std::move(gains)), offsets_(std::move(offsets)) {
  if (static_cast<int>(gains_.size()) != grid_.size() || gains_.size() != offsets_.size()) {
    throw std::invalid_argument("AffineStrategy: one gain and one offset per grid node required");
  }
  for (std::size_t k = 0; k < gains_.size(); ++k) {
    if (!gains_[k].allFinite() || !offsets_[k].allFinite()) {
      throw NumericalError("AffineStrategy: non-finite gain or offset at node " + std::to_string(k));
    }
    lipschitz_ = std::max(lipschitz_, gains_[k].operatorNorm());
  }
}

void AffineStrategy::evaluate(double t, ConstVecView x, VecView u) const {
  int k;
  double w;
  locate(grid_, t, k, w);
  const int d = state_dim();
  // Plain loops: dynamic-size Eigen products here would allocate per call.
  auto at = [&](int node, int r) {
    const Mat& G = gains_[node];
    double s = 0.0;
    for (int c = 0; c < d; ++c) s += G(r, c) * x[c];
    return s + offsets_[node][r];
  };
  for (int r = 0; r < control_dim(); ++r) {
    u[r] = w == 0.0 ? at(k, r) : (1.0 - w) * at(k, r) + w * at(k + 1, r);
  }
}

void AffineStrategy::write_csv(std::ostream& out) const {
  const int l = control_dim();
  const int d = state_dim();
  out << "t";
  for (int r = 1; r <= l; ++r)
    for (int c = 1; c <= d; ++c) out << ",K_" << r << '_' << c;
  for (int r = 1; r <= l; ++r) out << ",k_" << r;
  out << '\n';
  for (int k = 0; k < grid_.size(); ++k) {
    out << csv::num(grid_.node(k));
    for (int r = 0; r < l; ++r)
      for (int c = 0; c < d; ++c) out << ',' << csv::num(gains_[k](r, c));
    for (int r = 0; r < l; ++r) out << ',' << csv::num(offsets_[k][r]);
    out << '\n';
  }
}

GridStrategy::GridStrategy(TimeGrid grid, double x_lo, double x_hi, int x_steps, int control_dim,
                           std::vector<double> values)
    : grid_(grid), x_lo_(x_lo), x_hi_(x_hi), x_steps_(x_steps), control_dim_(control_dim),
      values_(std::move(values)) {
  if (!(x_hi > x_lo) || x_steps < 1) throw std::invalid_argument("GridStrategy: bad x grid");
  if (values_.size() != static_cast<std::size_t>(grid_.size()) * (x_steps_ + 1) * control_dim_) {
    throw std::invalid_argument("GridStrategy: value table has wrong size");
  }
  const double dx = (x_hi_ - x_lo_) / x_steps_;
  for (int k = 0; k < grid_.size(); ++k) {
    for (int i = 0; i <= x_steps_; ++i) {
      for (int j = 0; j < control_dim_; ++j) {
        const double v = value(k, i, j);
        if (!std::isfinite(v)) throw NumericalError("GridStrategy: non-finite control at node " + std::to_string(k));
        if (i > 0) lipschitz_ = std::max(lipschitz_, std::abs(v - value(k, i - 1, j)) / dx);
      }
    }
  }
}

void GridStrategy::evaluate(double t, ConstVecView x, VecView u) const {
  int k;
  double w;
  locate(grid_, t, k, w);
  const double s = std::clamp((x[0] - x_lo_) / (x_hi_ - x_lo_) * x_steps_, 0.0, static_cast<double>(x_steps_));
  int i = std::min(static_cast<int>(s), x_steps_ - 1);
  const double r = s - i;
  for (int j = 0; j < control_dim_; ++j) {
    const double at_k = (1.0 - r) * value(k, i, j) + r * value(k, i + 1, j);
    if (w == 0.0) {
      u[j] = at_k;
    } else {
      const double at_k1 = (1.0 - r) * value(k + 1, i, j) + r * value(k + 1, i + 1, j);
      u[j] = (1.0 - w) * at_k + w * at_k1;
    }
  }
}

void GridStrategy::write_csv(std::ostream& out) const {
  out << "t,x";
  for (int j = 1; j <= control_dim_; ++j) out << ",u_" << j;
  out << '\n';
  const double dx = (x_hi_ - x_lo_) / x_steps_;
  for (int k = 0; k < grid_.size(); ++k) {
    for (int i = 0; i <= x_steps_; ++i) {
      out << csv::num(grid_.node(k)) << ',' << csv::num(x_lo_ + i * dx);
      for (int j = 0; j < control_dim_; ++j) out << ',' << csv::num(value(k, i, j));
      out << '\n';
    }
  }
}

void SpikeStrategy::evaluate(double t, ConstVecView x, VecView u) const {
  const double tol = 1e-9 * std::max(1.0, std::abs(t_end_));
  if (t >= t_start_ - tol && t < t_end_ - tol) {
    for (int j = 0; j < probe_.size(); ++j) u[j] = probe_[j];
  } else {
    base_->evaluate(t, x, u);
  }
}

double strategy_distance(const FeedbackStrategy& u1, const FeedbackStrategy& u2, const TimeGrid& grid,
                         const std::vector<std::vector<double>>& points) {
  if (static_cast<int>(points.size()) != grid.size()) {
    throw std::invalid_argument("strategy_distance: one point set per grid node required");
  }
  const int d = u1.state_dim();
  const int l = u1.control_dim();
  std::vector<double> a(l), b(l);
  double sup = 0.0;
  for (int k = 0; k < grid.size(); ++k) {
    const double t = grid.node(k);
    const auto& pts = points[k];
    for (std::size_t i = 0; i + d <= pts.size(); i += d) {
      const ConstVecView x(pts.data() + i, d);
      u1.evaluate(t, x, a);
      u2.evaluate(t, x, b);
      double s = 0.0;
      for (int j = 0; j < l; ++j) s += (a[j] - b[j]) * (a[j] - b[j]);
      sup = std::max(sup, std::sqrt(s));
    }
  }
  return sup;
}

}  // namespace ticmkv
