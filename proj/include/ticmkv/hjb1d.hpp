#pragma once

#include <iosfwd>
#include <memory>
#include <optional>
#include <unordered_map>
#include <vector>

#include "ticmkv/measures.hpp"
#include "ticmkv/model.hpp"
#include "ticmkv/strategy.hpp"

namespace ticmkv {

struct XDomain {
  double lo = -1.0;
  double hi = 1.0;
};

/// min over nodes of mean - 8 sd and max of mean + 8 sd for a d = 1 curve.
XDomain default_x_domain(const DistributionCurve& mu, double width_sd = 8.0);

struct HjbOptions {
  int x_steps = 200;
  std::optional<XDomain> domain;  // default_x_domain of the frozen curve when empty
  int theta_stride = 0;           // 0 picks max(1, K / 50)
  /// When set, drift and cost use this strategy instead of psi(t, x, DTheta):
  /// the PDE becomes linear.
  StrategyPtr frozen_strategy;
  int workers = 1;
};

/// Theta(tau; t, x) on the triangle tau <= t times a uniform x grid.
/// The diagonal Theta(t_k; t_k, .) and its gradient are kept for every k;
/// off-diagonal slices only for tau and t on multiples of `stride`.
class ValueSurface {
 public:
  ValueSurface() = default;
  ValueSurface(TimeGrid grid, XDomain domain, int x_steps, int stride);

  [[nodiscard]] const TimeGrid& grid() const { return grid_; }
  [[nodiscard]] XDomain domain() const { return domain_; }
  [[nodiscard]] int x_steps() const { return x_steps_; }
  [[nodiscard]] double dx() const { return (domain_.hi - domain_.lo) / x_steps_; }
  [[nodiscard]] double x(int i) const { return domain_.lo + i * dx(); }
  [[nodiscard]] int stride() const { return stride_; }

  [[nodiscard]] double diag(int k, int i) const { return diag_[idx(k, i)]; }
  [[nodiscard]] double diag_grad(int k, int i) const { return grad_[idx(k, i)]; }
  [[nodiscard]] bool stored(int j, int k) const;
  /// Theta(tau_j; t_k, x_i); throws std::out_of_range for slices not kept.
  [[nodiscard]] double theta(int j, int k, int i) const;

  void set_diag(int k, const std::vector<double>& values);
  void set_slice(int j, int k, const std::vector<double>& values);

  /// Columns tau, t, x, theta over the kept slices (diagonal included).
  void write_surface_csv(std::ostream& out) const;
  /// Columns t, x, theta_diag, diag_grad.
  void write_diag_grad_csv(std::ostream& out) const;

 private:
  [[nodiscard]] std::size_t idx(int k, int i) const { return static_cast<std::size_t>(k) * (x_steps_ + 1) + i; }
  [[nodiscard]] long long key(int j, int k) const { return static_cast<long long>(j) * grid_.size() + k; }

  TimeGrid grid_;
  XDomain domain_;
  int x_steps_ = 1;
  int stride_ = 1;
  std::vector<double> diag_;
  std::vector<double> grad_;
  std::unordered_map<long long, std::vector<double>> slices_;
};

/// Backward IMEX marching of every tau-row together: implicit central
/// diffusion (one tridiagonal factorization per step), explicit upwind drift
/// by the sign of the drift, ghost nodes with zero second derivative. Each
/// step predicts the diagonal row with the lagged gradient, then advances all
/// rows with u = psi(t_k, x, DTheta~(t_k; t_k, x)).
///
/// Throws NumericalError when max |drift| dt / dx > 1 (reporting the
/// required dt), when b vanishes on the grid, or on non-finite values.
ValueSurface solve_hjb_family(const ModelSpec& model, const DistributionCurve& mu, const HjbOptions& options = {});
ValueSurface solve_hjb_family(const ModelSpec& model, const TimeGrid& grid, const std::vector<MomentVector>& law,
                              XDomain domain, const HjbOptions& options = {});

/// u[k][i] = psi(t_k, x_i, diag_grad[k][i]) as a clamped bilinear table.
std::shared_ptr<GridStrategy> extract_strategy_grid(const ValueSurface& surface, const ModelSpec& model);

struct RegularityReport {
  double grad_at_zero = 0.0;   // sup_k |DTheta(t_k; t_k, 0)|
  double second_derivative = 0.0;  // sup over k and interior i of |D2 Theta(t_k; t_k, x_i)|
  double grad_lipschitz = 0.0;     // sup of |diag_grad[i+1] - diag_grad[i]| / dx
};

RegularityReport regularity_report(const ValueSurface& surface);

}  // namespace ticmkv
