#include <doctest.h>

#include <cmath>

#include "ticmkv/hjb1d.hpp"
#include "ticmkv/riccati.hpp"
#include "ticmkv/rng.hpp"
#include "ticmkv/simulate.hpp"

using namespace ticmkv;

namespace {

DistributionCurve centered_curve(const TimeGrid& grid) {
  const auto g = InitialLaw::gaussian(Vec::Constant(1, 0.0), Vec::Constant(1, 1.0));
  return DistributionCurve::constant(grid, g.sample_cloud(3, 400));
}

HjbOptions opts(int kx, double lo, double hi) {
  HjbOptions o;
  o.x_steps = kx;
  o.domain = XDomain{lo, hi};
  return o;
}

// dX = dW, no control in the drift, f = f0, g = 0.
ModelSpec constant_cost(double f0) {
  ModelSpec m = build_general_catalog("brownian");
  m.running_state = [f0](double, double, ConstVecView, const MomentVector&) { return f0; };
  m.running_control = [](double, double, ConstVecView, ConstVecView) { return 0.0; };
  m.terminal = [](double, ConstVecView, const MomentVector&) { return 0.0; };
  return m;
}

}  // namespace

TEST_CASE("zero costs give the zero surface") {
  const ModelSpec m = build_general_catalog("ou_meanfield", {{"q0", 0.0}, {"g0", 0.0}});
  const TimeGrid grid(0.0, 1.0, 20);
  const auto s = solve_hjb_family(m, centered_curve(grid), opts(40, -4.0, 4.0));
  for (int k = 0; k <= 20; ++k)
    for (int i = 0; i <= 40; ++i) {
      CHECK(s.diag(k, i) == 0.0);
      CHECK(s.diag_grad(k, i) == 0.0);
    }
  CHECK(s.theta(0, 20, 7) == 0.0);
  const auto u = extract_strategy_grid(s, m);
  CHECK(u->scalar(0.5, 1.0) == 0.0);
  const auto r = regularity_report(s);
  CHECK(r.grad_at_zero == 0.0);
  CHECK(r.second_derivative == 0.0);
  CHECK(r.grad_lipschitz == 0.0);
}

TEST_CASE("constant running cost integrates exactly") {
  const TimeGrid grid(0.0, 1.0, 25);
  const auto s = solve_hjb_family(constant_cost(1.0), centered_curve(grid), opts(50, -3.0, 3.0));
  for (int k = 0; k <= 25; ++k)
    for (int i = 0; i <= 50; ++i) CHECK(std::abs(s.diag(k, i) - (1.0 - grid.node(k))) <= 1e-10);
}

TEST_CASE("time-consistent LQ gradient matches the Riccati oracle") {
  const auto lq = build_lq_catalog("time_consistent_baseline", {{"Q", 1.0}, {"g", 1.0}});
  const ModelSpec m = as_general(lq);
  const TimeGrid grid(0.0, 1.0, 200);
  const auto curve = centered_curve(grid);
  const auto s = solve_hjb_family(m, curve, opts(200, -4.0, 4.0));
  const auto fam = solve_riccati_family(lq, curve);
  const auto affine = extract_strategy_lq(fam, lq);
  const auto grid_u = extract_strategy_grid(s, m);
  double worst = 0.0, worst_u = 0.0;
  for (int k = 0; k <= 200; k += 10) {
    for (int i = 50; i <= 150; ++i) {
      const double x = s.x(i);
      const double oracle = 2.0 * fam.P(k, k)(0, 0) * x + 2.0 * fam.p(k, k)[0];
      worst = std::max(worst, std::abs(s.diag_grad(k, i) - oracle));
      worst_u = std::max(worst_u, std::abs(grid_u->scalar(grid.node(k), x) - affine->scalar(grid.node(k), x)));
    }
  }
  // O(dx^2 + dt) with dx = 0.04, dt = 0.005.
  CHECK(worst <= 0.05);
  CHECK(worst_u <= 0.05);

  double supP = 0.0;
  for (int k = 0; k <= 200; ++k) supP = std::max(supP, std::abs(fam.P(k, k)(0, 0)));
  CHECK(regularity_report(s).second_derivative == doctest::Approx(2.0 * supP).epsilon(0.05));
}

TEST_CASE("grid strategy clamps outside the domain") {
  const ModelSpec m = build_general_catalog("nonlinear_controlled");
  const TimeGrid grid(0.0, 1.0, 100);
  const auto s = solve_hjb_family(m, centered_curve(grid), opts(80, -4.0, 4.0));
  const auto u = extract_strategy_grid(s, m);
  CHECK(u->scalar(0.3, 4.0 + 5.0) == u->scalar(0.3, 4.0));
  CHECK(u->scalar(0.3, -4.0 - 5.0) == u->scalar(0.3, -4.0));
  CHECK(std::isfinite(u->lipschitz()));
}

TEST_CASE("quadratic diagonal has second difference 2") {
  const TimeGrid grid(0.0, 1.0, 2);
  ValueSurface s(grid, {-1.0, 1.0}, 64, 1);
  std::vector<double> v(65);
  for (int i = 0; i <= 64; ++i) v[i] = s.x(i) * s.x(i);
  for (int k = 0; k <= 2; ++k) s.set_diag(k, v);
  CHECK(regularity_report(s).second_derivative == doctest::Approx(2.0).epsilon(1e-8));
}

TEST_CASE("comparison and nonnegativity") {
  const ModelSpec base = build_general_catalog("nonlinear_controlled");
  const TimeGrid grid(0.0, 1.0, 100);
  const auto curve = centered_curve(grid);
  HjbOptions o = opts(60, -4.0, 4.0);
  o.frozen_strategy = std::make_shared<FunctionStrategy>(
      1, 1, [](double, ConstVecView x, VecView u) { u[0] = -0.5 * x[0]; }, 0.5);
  o.theta_stride = 1;
  const CounterRng rng(77);
  for (int trial = 0; trial < 3; ++trial) {
    const double amp = rng.uniforms(trial, 0, CounterRng::kUniform)[0];
    const double centre = 4.0 * rng.uniforms(trial, 1, CounterRng::kUniform)[0] - 2.0;
    ModelSpec bumped = base;
    auto f1 = base.running_state;
    auto g1 = base.terminal;
    bumped.running_state = [f1, amp, centre](double tau, double t, ConstVecView x, const MomentVector& m) {
      return f1(tau, t, x, m) + amp * std::exp(-(x[0] - centre) * (x[0] - centre));
    };
    bumped.terminal = [g1, amp](double tau, ConstVecView x, const MomentVector& m) {
      return g1(tau, x, m) + amp * x[0] * x[0] * 0.1;
    };
    const auto lo = solve_hjb_family(base, curve, o);
    const auto hi = solve_hjb_family(bumped, curve, o);
    for (int j = 0; j <= 100; j += 20)
      for (int k = j; k <= 100; k += 10)
        for (int i = 0; i <= 60; ++i) {
          CHECK(hi.theta(j, k, i) >= lo.theta(j, k, i) - 1e-12);
          CHECK(lo.theta(j, k, i) >= -1e-9);
        }
  }
}

TEST_CASE("stability bound and degenerate diffusion are reported") {
  const ModelSpec fast = build_general_catalog("ou_meanfield", {{"theta", 50.0}});
  const TimeGrid grid(0.0, 1.0, 10);
  CHECK_THROWS_AS(solve_hjb_family(fast, centered_curve(grid), opts(200, -4.0, 4.0)), NumericalError);
  try {
    (void)solve_hjb_family(fast, centered_curve(grid), opts(200, -4.0, 4.0));
  } catch (const NumericalError& e) {
    CHECK(std::string(e.what()).find("need dt <=") != std::string::npos);
  }
  const ModelSpec flat = build_general_catalog("ou_meanfield", {{"sigma", 0.0}});
  CHECK_THROWS_AS(solve_hjb_family(flat, centered_curve(grid), opts(20, -4.0, 4.0)), NumericalError);
  CHECK_THROWS_AS(solve_hjb_family(as_general(build_lq_catalog("dissipative_meanfield", {{"dim", 2}})),
                                   centered_curve(grid), opts(20, -4.0, 4.0)),
                  std::invalid_argument);
}

TEST_CASE("default domain spans eight standard deviations") {
  const TimeGrid grid(0.0, 1.0, 4);
  const auto d = default_x_domain(DistributionCurve::constant(grid, EmpiricalMeasure::from_scalars({-1.0, 1.0})));
  CHECK(d.lo == doctest::Approx(-8.0));
  CHECK(d.hi == doctest::Approx(8.0));
}
