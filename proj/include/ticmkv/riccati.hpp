#pragma once

#include <iosfwd>
#include <memory>
#include <vector>

#include "ticmkv/measures.hpp"
#include "ticmkv/model.hpp"
#include "ticmkv/strategy.hpp"

namespace ticmkv {

/// Selects the backward equations for p and eta.
///  derived:    p' + (A - M D)' p + P (a - M d) + D B S B' d = 0,
///              eta' + b'P b + 2 p'(a - M d) + d' B S B' d + F = 0,
///  as_printed: p' + P (a - M d) + D B S B' D = 0,
///              eta' + b'P b + p' B S B' p + F = 0   (scalar state only),
/// with D = P(t;t), d = p(t;t), M = B R(t;t)^-1 B', S = R(t;t)^-1 R(tau;t) R(t;t)^-1.
enum class OffsetForm { derived, as_printed };

struct RiccatiOptions {
  OffsetForm offset_form = OffsetForm::derived;
  int workers = 1;
};

/// P(tau_j; t_k), p(tau_j; t_k), eta(tau_j; t_k) for j <= k on a shared
/// uniform grid, stored row by row in flat triangular arrays.
class RiccatiFamily {
 public:
  RiccatiFamily() = default;
  RiccatiFamily(TimeGrid grid, int dim);

  [[nodiscard]] const TimeGrid& grid() const { return grid_; }
  [[nodiscard]] int dim() const { return dim_; }
  [[nodiscard]] std::size_t index(int j, int k) const;

  [[nodiscard]] Eigen::Map<const Mat> P(int j, int k) const {
    return {P_.data() + index(j, k) * dim_ * dim_, dim_, dim_};
  }
  [[nodiscard]] Eigen::Map<const Vec> p(int j, int k) const { return {p_.data() + index(j, k) * dim_, dim_}; }
  [[nodiscard]] double eta(int j, int k) const { return eta_[index(j, k)]; }

  [[nodiscard]] Eigen::Map<Mat> P(int j, int k) { return {P_.data() + index(j, k) * dim_ * dim_, dim_, dim_}; }
  [[nodiscard]] Eigen::Map<Vec> p(int j, int k) { return {p_.data() + index(j, k) * dim_, dim_}; }
  [[nodiscard]] double& eta(int j, int k) { return eta_[index(j, k)]; }

  [[nodiscard]] const std::vector<double>& P_data() const { return P_; }
  [[nodiscard]] const std::vector<double>& p_data() const { return p_; }
  [[nodiscard]] const std::vector<double>& eta_data() const { return eta_; }

  /// CSV of the diagonal: t, vec(P(t;t)) column-major, p(t;t), eta(t;t).
  void write_diagonal_csv(std::ostream& out) const;

 private:
  TimeGrid grid_;
  int dim_ = 1;
  std::vector<double> P_;
  std::vector<double> p_;
  std::vector<double> eta_;
};

/// Integrates all rows backward from t = T together. Each step is a Heun
/// predictor-corrector: the predictor reads the diagonal at t_{k+1}, the
/// corrector the predicted diagonal at t_k. P is symmetrized after every
/// step. Coefficients a, b, F, H are evaluated on the frozen curve `mu`.
RiccatiFamily solve_riccati_family(const LqModelSpec& lq, const DistributionCurve& mu,
                                   const RiccatiOptions& options = {});
/// Same, with the frozen curve given by its node moments.
RiccatiFamily solve_riccati_family(const LqModelSpec& lq, const TimeGrid& grid,
                                   const std::vector<MomentVector>& law, const RiccatiOptions& options = {});

/// u(t, x) = -R(t;t)^-1 B'(t) [P(t;t) x + p(t;t)].
std::shared_ptr<AffineStrategy> extract_strategy_lq(const RiccatiFamily& fam, const LqModelSpec& lq);

/// <P(tau;t) x, x> + 2 <p(tau;t), x> + eta(tau;t), linear in tau and t
/// between grid nodes. Throws std::invalid_argument if tau > t.
double value_lq(const RiccatiFamily& fam, double tau, double t, ConstVecView x);

}  // namespace ticmkv
