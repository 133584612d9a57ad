#pragma once

#include <functional>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "ticmkv/grid.hpp"

namespace ticmkv {

/// Closed-loop policy u(t, x).
class FeedbackStrategy {
 public:
  virtual ~FeedbackStrategy() = default;

  [[nodiscard]] virtual int state_dim() const = 0;
  [[nodiscard]] virtual int control_dim() const = 0;
  virtual void evaluate(double t, ConstVecView x, VecView u) const = 0;
  /// Recorded Lipschitz constant in x.
  [[nodiscard]] virtual double lipschitz() const = 0;
  [[nodiscard]] virtual std::string kind() const = 0;

  /// Tabulated form; throws std::logic_error for strategies without one.
  virtual void write_csv(std::ostream& out) const;

  [[nodiscard]] Vec operator()(double t, ConstVecView x) const;
  [[nodiscard]] double scalar(double t, double x) const;
};

using StrategyPtr = std::shared_ptr<const FeedbackStrategy>;

class ConstantStrategy final : public FeedbackStrategy {
 public:
  ConstantStrategy(int state_dim, Vec value) : state_dim_(state_dim), value_(std::move(value)) {}
  static StrategyPtr zero(int state_dim, int control_dim);

  int state_dim() const override { return state_dim_; }
  int control_dim() const override { return static_cast<int>(value_.size()); }
  void evaluate(double, ConstVecView, VecView u) const override;
  double lipschitz() const override { return 0.0; }
  std::string kind() const override { return "constant"; }

 private:
  int state_dim_;
  Vec value_;
};

class FunctionStrategy final : public FeedbackStrategy {
 public:
  using Fn = std::function<void(double t, ConstVecView x, VecView u)>;
  FunctionStrategy(int state_dim, int control_dim, Fn fn, double lipschitz, std::string kind = "function")
      : state_dim_(state_dim), control_dim_(control_dim), fn_(std::move(fn)), lipschitz_(lipschitz),
        kind_(std::move(kind)) {}

  int state_dim() const override { return state_dim_; }
  int control_dim() const override { return control_dim_; }
  void evaluate(double t, ConstVecView x, VecView u) const override { fn_(t, x, u); }
  double lipschitz() const override { return lipschitz_; }
  std::string kind() const override { return kind_; }

 private:
  int state_dim_;
  int control_dim_;
  Fn fn_;
  double lipschitz_;
  std::string kind_;
};

/// u = K(t) x + k(t), linear in t between grid nodes.
class AffineStrategy final : public FeedbackStrategy {
 public:
  AffineStrategy(TimeGrid grid, std::vector<Mat> gains, std::vector<Vec> offsets);

  int state_dim() const override { return static_cast<int>(gains_.front().cols()); }
  int control_dim() const override { return static_cast<int>(gains_.front().rows()); }
  void evaluate(double t, ConstVecView x, VecView u) const override;
  double lipschitz() const override { return lipschitz_; }
  std::string kind() const override { return "affine"; }
  /// Columns t, K (row-major), k.
  void write_csv(std::ostream& out) const override;

  [[nodiscard]] const TimeGrid& grid() const { return grid_; }
  [[nodiscard]] const std::vector<Mat>& gains() const { return gains_; }
  [[nodiscard]] const std::vector<Vec>& offsets() const { return offsets_; }

 private:
  TimeGrid grid_;
  std::vector<Mat> gains_;
  std::vector<Vec> offsets_;
  double lipschitz_ = 0.0;
};

/// Tabulated u[k][i] on a time grid times a uniform x grid (d = 1),
/// bilinear in (t, x) and clamped to the edge values outside [x_lo, x_hi].
class GridStrategy final : public FeedbackStrategy {
 public:
  GridStrategy(TimeGrid grid, double x_lo, double x_hi, int x_steps, int control_dim, std::vector<double> values);

  int state_dim() const override { return 1; }
  int control_dim() const override { return control_dim_; }
  void evaluate(double t, ConstVecView x, VecView u) const override;
  double lipschitz() const override { return lipschitz_; }
  std::string kind() const override { return "grid"; }
  /// Columns t, x, u_1..u_l.
  void write_csv(std::ostream& out) const override;

  [[nodiscard]] double value(int k, int i, int j = 0) const {
    return values_[(static_cast<std::size_t>(k) * (x_steps_ + 1) + i) * control_dim_ + j];
  }
  [[nodiscard]] double x_lo() const { return x_lo_; }
  [[nodiscard]] double x_hi() const { return x_hi_; }
  [[nodiscard]] int x_steps() const { return x_steps_; }
  [[nodiscard]] const TimeGrid& grid() const { return grid_; }

 private:
  TimeGrid grid_;
  double x_lo_;
  double x_hi_;
  int x_steps_;
  int control_dim_;
  std::vector<double> values_;  // [k][i][j]
  double lipschitz_ = 0.0;
};

/// Holds `probe` on [t_start, t_end) and follows `base` elsewhere.
class SpikeStrategy final : public FeedbackStrategy {
 public:
  SpikeStrategy(StrategyPtr base, Vec probe, double t_start, double t_end)
      : base_(std::move(base)), probe_(std::move(probe)), t_start_(t_start), t_end_(t_end) {}

  int state_dim() const override { return base_->state_dim(); }
  int control_dim() const override { return base_->control_dim(); }
  void evaluate(double t, ConstVecView x, VecView u) const override;
  double lipschitz() const override { return base_->lipschitz(); }
  std::string kind() const override { return "spike"; }

 private:
  StrategyPtr base_;
  Vec probe_;
  double t_start_;
  double t_end_;
};

/// sup over grid nodes and sample points of |u1(t, x) - u2(t, x)|. The
/// points are indexed [k][i*d .. i*d+d) as in an EmpiricalMeasure.
double strategy_distance(const FeedbackStrategy& u1, const FeedbackStrategy& u2, const TimeGrid& grid,
                         const std::vector<std::vector<double>>& points);

}  // namespace ticmkv
