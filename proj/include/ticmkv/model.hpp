#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ticmkv/grid.hpp"
#include "ticmkv/measures.hpp"

namespace ticmkv {

/// Uniform grid over a box in control space used for numeric argmin.
struct ControlGrid {
  Vec lower;
  Vec upper;
  int points = 201;  // per control dimension
};

/// Controlled McKean-Vlasov problem with drift a = a1(t,x,m) + a2(t,x,v),
/// running cost f = f1(tau;t,x,m) + f2(tau;t,x,v) and a control-free
/// diffusion b(t,x,m) driven by one scalar Brownian motion.
///
/// Measure dependence enters only through the MomentVector m of the current
/// law. Callables write into caller-owned `out` spans and must be pure.
struct ModelSpec {
  using StateDrift = std::function<void(double t, ConstVecView x, const MomentVector& m, VecView out)>;
  using ControlDrift = std::function<void(double t, ConstVecView x, ConstVecView v, VecView out)>;
  using StateCost = std::function<double(double tau, double t, ConstVecView x, const MomentVector& m)>;
  using ControlCost = std::function<double(double tau, double t, ConstVecView x, ConstVecView v)>;
  using TerminalCost = std::function<double(double tau, ConstVecView x, const MomentVector& m)>;
  using Psi = std::function<void(double t, ConstVecView x, ConstVecView q, VecView out)>;

  std::string name;
  int dim = 1;
  int control_dim = 1;
  double horizon = 1.0;

  StateDrift drift_state;      // a1
  ControlDrift drift_control;  // a2
  StateDrift diffusion;        // b, a d-vector multiplying a scalar dW
  StateCost running_state;     // f1
  ControlCost running_control; // f2
  TerminalCost terminal;       // g

  /// Closed-form argmin of q.a2 + f2(t;t,.); grid search when empty.
  Psi psi;
  ControlGrid control_grid;

  std::optional<double> kappa0;    // declared Lipschitz bound of a1, a2, b
  std::optional<double> beta_psi;  // declared Lipschitz bound of psi

  std::vector<MomentFunctional> functionals;

  /// False when no coefficient reads the MomentVector; lets callers skip
  /// fixed-point iterations that cannot change anything.
  bool measure_dependent = true;

  /// Throws std::invalid_argument on missing callables or bad sizes.
  void validate() const;
};

/// Linear-quadratic problem
///   dX = [A X + B u + a(t, law X)] dt + b(t, law X) dW,
///   f  = <x, Q(tau;t) x> + <u, R(tau;t) u> + F(tau;t, law X),
///   g  = <x, G(tau) x> + H(tau; law X(T)).
struct LqModelSpec {
  std::string name;
  int dim = 1;
  int control_dim = 1;
  double horizon = 1.0;

  std::function<Mat(double t)> A;
  std::function<Mat(double t)> B;
  std::function<Vec(double t, const MomentVector& m)> a;
  std::function<Vec(double t, const MomentVector& m)> b;
  std::function<Mat(double tau, double t)> Q;
  std::function<Mat(double tau, double t)> R;
  std::function<Mat(double tau)> G;
  std::function<double(double tau, double t, const MomentVector& m)> F;
  std::function<double(double tau, const MomentVector& m)> H;

  std::optional<double> L0;  // declared dissipativity margin
  std::vector<MomentFunctional> functionals;
  bool measure_dependent = true;

  /// Checks sizes, symmetry of Q, R, G (1e-12), R(t;t) positive definite
  /// and G(tau) positive semidefinite at every node of `grid`.
  void validate(const TimeGrid& grid) const;
};

/// argmin over v of q.a2(t,x,v) + f2(t;t,x,v). Uses the closed form when
/// present, else the control grid with the smallest index winning ties.
Vec eval_psi(const ModelSpec& model, double t, ConstVecView x, ConstVecView q);
void eval_psi(const ModelSpec& model, double t, ConstVecView x, ConstVecView q, VecView out);

/// The LQ problem written in general form; psi = -R(t;t)^{-1} B' q / 2.
ModelSpec as_general(const LqModelSpec& lq);

using CatalogParams = std::map<std::string, double>;

/// Built-in LQ problems: time_consistent_baseline, dissipative_meanfield,
/// tau_weighted_terminal. Unknown names and out-of-range parameters throw
/// std::invalid_argument.
LqModelSpec build_lq_catalog(const std::string& name, const CatalogParams& params = {});

/// Built-in general problems (d = 1): brownian, ou_meanfield,
/// nonlinear_controlled.
ModelSpec build_general_catalog(const std::string& name, const CatalogParams& params = {});

std::vector<std::string> lq_catalog_names();
std::vector<std::string> general_catalog_names();

struct LipschitzReport {
  double drift_x = 0.0;      // sup |a(x1)-a(x2)| / |x1-x2| at fixed v, m
  double drift_v = 0.0;      // sup |a2(v1)-a2(v2)| / |v1-v2|
  double diffusion_x = 0.0;
  double psi = 0.0;          // sup |psi1-psi2| / (|x1-x2| + |q1-q2|)
  std::vector<std::string> warnings;
};

/// Sampled finite-difference Lipschitz ratios on the box [-box, box]^d
/// (controls and q in the same box). Warns when a ratio exceeds a declared
/// constant by more than 10%.
LipschitzReport lipschitz_probe(const ModelSpec& model, int n_samples, double box, std::uint64_t seed = 7);

}  // namespace ticmkv
