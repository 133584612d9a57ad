#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "ticmkv/riccati.hpp"
#include "ticmkv/simulate.hpp"

using namespace ticmkv;

namespace {

DistributionCurve cloud_curve(const TimeGrid& grid, double mean = 1.0) {
  const auto g = InitialLaw::gaussian(Vec::Constant(1, mean), Vec::Constant(1, 1.0));
  return DistributionCurve::constant(grid, g.sample_cloud(3, 400));
}

double max_diag_gap(const RiccatiFamily& a, const RiccatiFamily& b) {
  // b is on a grid refined by an integer factor.
  const int r = b.grid().steps() / a.grid().steps();
  double gap = 0.0;
  for (int k = 0; k <= a.grid().steps(); ++k) {
    gap = std::max(gap, std::abs(a.P(k, k)(0, 0) - b.P(r * k, r * k)(0, 0)));
    gap = std::max(gap, std::abs(a.p(k, k)[0] - b.p(r * k, r * k)[0]));
  }
  return gap;
}

}  // namespace

TEST_CASE("baseline diagonal matches the closed form") {
  const double g = 2.0;
  const auto lq = build_lq_catalog("time_consistent_baseline", {{"g", g}});
  const TimeGrid grid(0.0, 1.0, 2000);
  const auto fam = solve_riccati_family(lq, cloud_curve(grid));
  double worst = 0.0;
  for (int k = 0; k <= 2000; k += 10) {
    const double t = grid.node(k);
    worst = std::max(worst, std::abs(fam.P(k, k)(0, 0) - g / (1.0 + g * (1.0 - t))));
    // The ansatz is tau-independent.
    CHECK(fam.P(0, k)(0, 0) == doctest::Approx(fam.P(k, k)(0, 0)).epsilon(1e-9));
  }
  CHECK(worst <= 1e-5);
}

TEST_CASE("zero forcing gives zero offsets") {
  const auto lq = build_lq_catalog("time_consistent_baseline", {{"c", 0.0}});
  const TimeGrid grid(0.0, 1.0, 50);
  const auto fam = solve_riccati_family(lq, cloud_curve(grid));
  for (double v : fam.p_data()) CHECK(v == 0.0);
}

TEST_CASE("terminal rows") {
  const auto lq = build_lq_catalog("dissipative_meanfield", {{"H_var", 0.7}});
  const TimeGrid grid(0.0, 1.0, 40);
  const auto curve = cloud_curve(grid);
  const auto fam = solve_riccati_family(lq, curve);
  const auto mT = curve.node_moments().back();
  for (int j = 0; j <= 40; ++j) {
    const double tau = grid.node(j);
    CHECK(std::abs(fam.P(j, 40)(0, 0) - lq.G(tau)(0, 0)) <= 1e-12);
    CHECK(fam.p(j, 40)[0] == 0.0);
    CHECK(std::abs(fam.eta(j, 40) - lq.H(tau, mT)) <= 1e-12);
  }
}

TEST_CASE("matrix P stays symmetric") {
  const auto lq = build_lq_catalog("dissipative_meanfield", {{"dim", 3}});
  const TimeGrid grid(0.0, 1.0, 40);
  const auto g = InitialLaw::gaussian(Vec::Constant(3, 1.0), Vec::Constant(3, 1.0));
  const auto fam = solve_riccati_family(lq, DistributionCurve::constant(grid, g.sample_cloud(5, 100)));
  for (int j = 0; j <= 40; j += 5)
    for (int k = j; k <= 40; k += 3) {
      const Mat P = fam.P(j, k);
      CHECK((P - P.transpose()).cwiseAbs().maxCoeff() <= 1e-9);
    }
  RiccatiOptions ro;
  ro.offset_form = OffsetForm::as_printed;
  CHECK_THROWS_AS(solve_riccati_family(lq, DistributionCurve::constant(grid, g.sample_cloud(5, 100)), ro),
                  std::invalid_argument);
}

TEST_CASE("P does not depend on a, b, F, H") {
  const auto base = build_lq_catalog("dissipative_meanfield");
  auto other = base;
  other.a = [](double t, const MomentVector& m) { return Vec::Constant(1, std::sin(t) + 3.0 * m.mean[0]); };
  other.b = [](double, const MomentVector&) { return Vec::Constant(1, 0.2); };
  other.F = [](double, double, const MomentVector& m) { return m.second_moment; };
  other.H = [](double, const MomentVector&) { return 5.0; };
  const TimeGrid grid(0.0, 1.0, 60);
  const auto curve = cloud_curve(grid);
  CHECK(solve_riccati_family(base, curve).P_data() == solve_riccati_family(other, curve).P_data());
}

TEST_CASE("self-convergence on the tau-weighted model") {
  const auto lq = build_lq_catalog("tau_weighted_terminal");
  const auto law = [](const TimeGrid& g) { return cloud_curve(g); };
  const auto coarse = solve_riccati_family(lq, law(TimeGrid(0.0, 1.0, 50)));
  const auto mid = solve_riccati_family(lq, law(TimeGrid(0.0, 1.0, 100)));
  const auto ref = solve_riccati_family(lq, law(TimeGrid(0.0, 1.0, 400)));
  const double e1 = max_diag_gap(coarse, ref);
  const double e2 = max_diag_gap(mid, ref);
  CHECK(e2 > 0.0);
  // Against a K -> 4K reference the error of order >= 1 halves, up to the
  // reference's own error.
  CHECK(std::log2(e1 / e2) >= 0.9);
}

TEST_CASE("as-printed and derived offsets agree on the baseline diagonal") {
  const auto lq = build_lq_catalog("time_consistent_baseline", {{"c", 0.5}});
  const TimeGrid grid(0.0, 1.0, 100);
  const auto curve = cloud_curve(grid);
  RiccatiOptions printed;
  printed.offset_form = OffsetForm::as_printed;
  const auto a = solve_riccati_family(lq, curve);
  const auto b = solve_riccati_family(lq, curve, printed);
  CHECK(a.P_data() == b.P_data());
  CHECK(std::isfinite(b.p(0, 0)[0]));
}

TEST_CASE("non-invertible R is reported") {
  auto lq = build_lq_catalog("time_consistent_baseline");
  lq.R = [](double, double t) { return Mat::Constant(1, 1, t > 0.5 ? 0.0 : 1.0); };
  CHECK_THROWS_AS(solve_riccati_family(lq, cloud_curve(TimeGrid(0.0, 1.0, 10))), NumericalError);
}

TEST_CASE("strategy extraction") {
  const auto lq = build_lq_catalog("time_consistent_baseline");
  const TimeGrid grid(0.0, 1.0, 4);
  RiccatiFamily fam(grid, 1);
  for (int k = 0; k <= 4; ++k) {
    fam.P(k, k)(0, 0) = 0.5;
    fam.p(k, k)[0] = 0.25;
  }
  const auto u = extract_strategy_lq(fam, lq);
  CHECK(u->scalar(0.3, 2.0) == doctest::Approx(-1.25));

  for (int k = 0; k <= 4; ++k) fam.p(k, k)[0] = 0.0;
  CHECK(extract_strategy_lq(fam, lq)->scalar(0.6, 0.0) == 0.0);
}

TEST_CASE("baseline gain is the classical feedback gain") {
  const auto lq = build_lq_catalog("time_consistent_baseline");
  const TimeGrid grid(0.0, 1.0, 2000);
  const auto u = extract_strategy_lq(solve_riccati_family(lq, cloud_curve(grid)), lq);
  for (int k = 0; k <= 2000; k += 50)
    CHECK(std::abs(u->gains()[k](0, 0) + 1.0 / (2.0 - grid.node(k))) <= 1e-6);
}

TEST_CASE("value representation") {
  const auto lq = build_lq_catalog("tau_weighted_terminal", {{"g", 2.0}});
  const TimeGrid grid(0.0, 1.0, 20);
  const auto fam = solve_riccati_family(lq, cloud_curve(grid));
  const double zero = 0.0, x = 1.5;
  CHECK(value_lq(fam, 0.2, 0.5, {&zero, 1}) == doctest::Approx(fam.eta(4, 10)));
  CHECK(value_lq(fam, 0.3, 1.0, {&x, 1}) == doctest::Approx(lq.G(0.3)(0, 0) * x * x));
  CHECK_THROWS_AS(value_lq(fam, 0.6, 0.5, {&x, 1}), std::invalid_argument);
}

TEST_CASE("diagonal csv") {
  const auto lq = build_lq_catalog("time_consistent_baseline");
  const TimeGrid grid(0.0, 1.0, 5);
  std::ostringstream os;
  solve_riccati_family(lq, cloud_curve(grid)).write_diagonal_csv(os);
  const std::string s = os.str();
  CHECK(std::count(s.begin(), s.end(), '\n') == 7);
}
