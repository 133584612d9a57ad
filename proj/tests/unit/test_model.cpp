#include <doctest.h>

#include <cmath>

#include "ticmkv/model.hpp"

using namespace ticmkv;

namespace {

ModelSpec scalar_model() {
  ModelSpec m;
  m.name = "scalar";
  m.drift_state = [](double, ConstVecView, const MomentVector&, VecView out) { out[0] = 0.0; };
  m.drift_control = [](double, ConstVecView, ConstVecView v, VecView out) { out[0] = v[0]; };
  m.diffusion = [](double, ConstVecView, const MomentVector&, VecView out) { out[0] = 1.0; };
  m.running_state = [](double, double, ConstVecView, const MomentVector&) { return 0.0; };
  m.running_control = [](double, double, ConstVecView, ConstVecView v) { return v[0] * v[0]; };
  m.terminal = [](double, ConstVecView, const MomentVector&) { return 0.0; };
  m.control_grid = {Vec::Constant(1, -10.0), Vec::Constant(1, 10.0), 2001};
  return m;
}

double psi1(const ModelSpec& m, double q) {
  const double x = 0.0;
  return eval_psi(m, 0.0, {&x, 1}, {&q, 1})[0];
}

}  // namespace

TEST_CASE("psi on the control grid") {
  const ModelSpec m = scalar_model();
  // argmin of q v + v^2 is -q/2; grid spacing 0.01 represents it exactly here.
  CHECK(psi1(m, 1.0) == doctest::Approx(-0.5).epsilon(1e-12));
  CHECK(psi1(m, -3.0) == doctest::Approx(1.5).epsilon(1e-12));
  CHECK(psi1(m, 0.0) == doctest::Approx(0.0).epsilon(1e-12));

  ModelSpec shifted = m;
  shifted.running_control = [](double, double, ConstVecView, ConstVecView v) { return v[0] * v[0] + 7.0; };
  for (double q : {-2.3, -0.4, 0.0, 1.7}) CHECK(psi1(shifted, q) == psi1(m, q));
}

TEST_CASE("doubled LQ control drift gives psi = -R^-1 B' q") {
  // a2 = 2 B v, f2 = R v^2 with B = 1.5, R = 2.
  const double B = 1.5, R = 2.0;
  ModelSpec m = scalar_model();
  m.drift_control = [B](double, ConstVecView, ConstVecView v, VecView out) { out[0] = 2.0 * B * v[0]; };
  m.running_control = [R](double, double, ConstVecView, ConstVecView v) { return R * v[0] * v[0]; };
  m.control_grid = {Vec::Constant(1, -5.0), Vec::Constant(1, 5.0), 2001};
  for (double q : {-4.0, -1.0, 0.0, 2.0}) CHECK(psi1(m, q) == doctest::Approx(-B * q / R).epsilon(1e-12));
}

TEST_CASE("as_general closed form agrees with the grid argmin") {
  LqModelSpec lq = build_lq_catalog("time_consistent_baseline", {{"B", 2.0}, {"R", 0.5}});
  ModelSpec closed = as_general(lq);
  ModelSpec grid = closed;
  grid.psi = nullptr;
  grid.control_grid = {Vec::Constant(1, -20.0), Vec::Constant(1, 20.0), 4001};
  for (double q : {-1.0, 0.25, 2.0}) {
    // a2 = B v and f2 = R v^2, so psi = -B q / (2 R).
    CHECK(psi1(closed, q) == doctest::Approx(-2.0 * q / (2.0 * 0.5)).epsilon(1e-10));
    CHECK(psi1(grid, q) == doctest::Approx(psi1(closed, q)).epsilon(1e-10));
  }
}

TEST_CASE("as_general reproduces LQ coefficients") {
  const LqModelSpec lq = build_lq_catalog("dissipative_meanfield", {{"c", 0.5}});
  const ModelSpec m = as_general(lq);
  MomentVector mv;
  mv.mean = Vec::Constant(1, 2.0);
  mv.second_moment = 5.0;
  const double x = 0.5, v = 1.0;
  double out = 0.0;
  m.drift_state(0.2, {&x, 1}, mv, {&out, 1});
  CHECK(out == doctest::Approx(-10.0 * 0.5 + 0.5 * 2.0));
  m.drift_control(0.2, {&x, 1}, {&v, 1}, {&out, 1});
  CHECK(out == doctest::Approx(1.0));
  // Q0 = 10, hyperbolic discount 1 / (1 + (t - tau)).
  CHECK(m.running_state(0.0, 0.5, {&x, 1}, mv) == doctest::Approx(10.0 / 1.5 * 0.25));
  CHECK(m.running_control(0.0, 0.5, {&x, 1}, {&v, 1}) == doctest::Approx(1.0 / 1.5));
  CHECK(m.terminal(0.0, {&x, 1}, mv) == doctest::Approx(0.5 * 0.25));
}

TEST_CASE("LQ catalog construction") {
  const auto base = build_lq_catalog("time_consistent_baseline", {{"g", 2.0}});
  CHECK(base.Q(0.0, 0.5)(0, 0) == base.Q(0.4, 0.5)(0, 0));
  CHECK(base.G(0.0)(0, 0) == 2.0);
  CHECK(base.G(0.7)(0, 0) == 2.0);
  CHECK(base.A(0.3)(0, 0) == 0.0);

  const auto diss = build_lq_catalog("dissipative_meanfield", {{"L0", 10.0}, {"c", 0.5}});
  CHECK(diss.A(0.0)(0, 0) == -10.0);
  MomentVector mv;
  mv.mean = Vec::Constant(1, 3.0);
  CHECK(diss.a(0.0, mv)[0] == 1.5);

  const auto tw = build_lq_catalog("tau_weighted_terminal", {{"g", 2.0}, {"T", 1.5}});
  CHECK(tw.G(0.0)(0, 0) == doctest::Approx(std::exp(-1.5) * 2.0));
  CHECK(tw.G(1.5)(0, 0) == doctest::Approx(2.0));

  CHECK_THROWS_AS(build_lq_catalog("nope"), std::invalid_argument);
  CHECK_THROWS_AS(build_lq_catalog("time_consistent_baseline", {{"R", -1.0}}), std::invalid_argument);
  CHECK_THROWS_AS(build_lq_catalog("time_consistent_baseline", {{"bogus", 1.0}}), std::invalid_argument);
  CHECK_THROWS_AS(build_general_catalog("nope"), std::invalid_argument);
}

TEST_CASE("LQ validation") {
  LqModelSpec lq = build_lq_catalog("time_consistent_baseline");
  CHECK_NOTHROW(lq.validate(TimeGrid(0.0, 1.0, 10)));
  lq.R = [](double, double) { return Mat::Constant(1, 1, 0.0); };
  CHECK_THROWS_AS(lq.validate(TimeGrid(0.0, 1.0, 10)), std::invalid_argument);
  lq = build_lq_catalog("dissipative_meanfield", {{"dim", 2}});
  lq.Q = [](double, double) {
    Mat q(2, 2);
    q << 1.0, 0.5, 0.0, 1.0;
    return q;
  };
  CHECK_THROWS_AS(lq.validate(TimeGrid(0.0, 1.0, 10)), std::invalid_argument);
}

TEST_CASE("model validation catches missing callables") {
  ModelSpec m = scalar_model();
  CHECK_NOTHROW(m.validate());
  m.diffusion = nullptr;
  CHECK_THROWS_AS(m.validate(), std::invalid_argument);
}

TEST_CASE("lipschitz probe") {
  ModelSpec m = scalar_model();
  m.drift_state = [](double, ConstVecView x, const MomentVector&, VecView out) { out[0] = -2.0 * x[0]; };
  auto r = lipschitz_probe(m, 500, 3.0);
  CHECK(r.drift_x == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(r.diffusion_x == 0.0);

  m.drift_state = [](double, ConstVecView, const MomentVector&, VecView out) { out[0] = 4.0; };
  CHECK(lipschitz_probe(m, 500, 3.0).drift_x == 0.0);

  m.drift_state = [](double, ConstVecView x, const MomentVector&, VecView out) { out[0] = std::sin(x[0]); };
  r = lipschitz_probe(m, 2000, 5.0);
  CHECK(r.drift_x <= 1.0 + 1e-6);
  CHECK(r.drift_x > 0.8);

  m.kappa0 = 0.5;
  CHECK_FALSE(lipschitz_probe(m, 2000, 5.0).warnings.empty());
}
