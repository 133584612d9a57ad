#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "ticmkv/measures.hpp"
#include "ticmkv/rng.hpp"

using namespace ticmkv;

namespace {

std::vector<double> normal_sample(std::uint64_t seed, int n, double mean, double sd) {
  const CounterRng rng(seed);
  std::vector<double> v(n);
  for (int i = 0; i < n; ++i) v[i] = mean + sd * rng.normal(i, 0, CounterRng::kInitial);
  return v;
}

EmpiricalMeasure cloud2d(std::uint64_t seed, int n) {
  const CounterRng rng(seed);
  std::vector<double> v(2 * n);
  for (int i = 0; i < n; ++i) {
    const auto z = rng.normals(i, 0, CounterRng::kInitial);
    v[2 * i] = z[0];
    v[2 * i + 1] = z[1];
  }
  return EmpiricalMeasure(2, v);
}

DistributionCurve brownian_curve(double start, int n, int steps) {
  const TimeGrid grid(0.0, 1.0, steps);
  const CounterRng rng(11);
  std::vector<EmpiricalMeasure> ms;
  std::vector<double> x(n, start);
  for (int k = 0; k <= steps; ++k) {
    if (k > 0)
      for (int i = 0; i < n; ++i) x[i] += std::sqrt(grid.step()) * rng.normal(i, k, CounterRng::kNoise);
    ms.push_back(EmpiricalMeasure::from_scalars(x));
  }
  return {grid, ms};
}

}  // namespace

TEST_CASE("empirical measures reject bad input") {
  CHECK_THROWS(EmpiricalMeasure(2, {1.0, 2.0, 3.0}));
  CHECK_THROWS(EmpiricalMeasure::from_scalars({}));
  CHECK_THROWS(EmpiricalMeasure::from_scalars({1.0, std::nan("")}).check_finite());
}

TEST_CASE("moments of small clouds") {
  auto m = moments(EmpiricalMeasure::from_scalars({3.0}));
  CHECK(m.mean[0] == 3.0);
  CHECK(m.second_moment == 9.0);
  m = moments(EmpiricalMeasure::from_scalars({-1.0, 1.0}));
  CHECK(m.mean[0] == 0.0);
  CHECK(m.second_moment == 1.0);
  const auto big = moments(EmpiricalMeasure::from_scalars(normal_sample(1, 100000, 0.0, 1.0)));
  CHECK(std::abs(big.second_moment - 1.0) < 0.02);
  const MomentFunctional cube{"cube", [](ConstVecView x) { return x[0] * x[0] * x[0]; }};
  CHECK(moments(EmpiricalMeasure::from_scalars({1.0, 2.0}), {cube}).generalized.at(0) == 4.5);
}

TEST_CASE("wasserstein2 examples") {
  const auto mu = EmpiricalMeasure::from_scalars({0.0, 1.0});
  const auto nu = EmpiricalMeasure::from_scalars({1.0, 2.0});
  CHECK(wasserstein2(mu, mu) == 0.0);
  CHECK(wasserstein2(mu, nu) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(wasserstein2(mu, nu, W2Method::assignment()) == doctest::Approx(1.0).epsilon(1e-14));
  const auto a = EmpiricalMeasure::from_scalars(normal_sample(3, 10000, 0.0, 1.0));
  const auto b = EmpiricalMeasure::from_scalars(normal_sample(4, 10000, 2.0, 1.0));
  CHECK(std::abs(wasserstein2(a, b) - 2.0) < 0.05);
}

TEST_CASE("exact1d handles unequal counts") {
  // {0} against {-1, 1}: every unit of mass moves distance 1.
  CHECK(wasserstein2(EmpiricalMeasure::from_scalars({0.0}), EmpiricalMeasure::from_scalars({-1.0, 1.0}),
                     W2Method::exact1d()) == doctest::Approx(1.0));
}

TEST_CASE("metric axioms on random small clouds") {
  for (int trial = 0; trial < 30; ++trial) {
    const auto x = cloud2d(100 + trial, 12);
    const auto y = cloud2d(200 + trial, 12);
    const auto z = cloud2d(300 + trial, 12);
    const auto m = W2Method::assignment();
    CHECK(std::abs(wasserstein2(x, y, m) - wasserstein2(y, x, m)) < 1e-12);
    CHECK(wasserstein2(x, x, m) < 1e-12);
    CHECK(wasserstein2(x, z, m) <= wasserstein2(x, y, m) + wasserstein2(y, z, m) + 1e-9);

    const auto p = EmpiricalMeasure::from_scalars(normal_sample(400 + trial, 30, 0.0, 1.0));
    const auto q = EmpiricalMeasure::from_scalars(normal_sample(500 + trial, 30, 0.5, 2.0));
    CHECK(std::abs(wasserstein2(p, q, W2Method::exact1d()) - wasserstein2(p, q, W2Method::assignment())) < 1e-10);
  }
}

TEST_CASE("sliced method approximates in higher dimension") {
  const auto x = cloud2d(7, 2000);
  auto shifted = x.coordinates();
  for (std::size_t i = 0; i < shifted.size(); i += 2) shifted[i] += 1.0;
  const double w = wasserstein2(x, EmpiricalMeasure(2, shifted), W2Method::sliced(64));
  // Sliced W2 of a pure shift is |shift| / sqrt(d) on average.
  CHECK(w > 0.5);
  CHECK(w <= 1.0 + 1e-9);
  CHECK(W2Method::automatic().resolve(2, 600).kind == W2Method::Kind::sliced);
  CHECK(W2Method::automatic().resolve(2, 100).kind == W2Method::Kind::assignment);
  CHECK(W2Method::automatic().resolve(1, 100000).kind == W2Method::Kind::exact1d);
}

TEST_CASE("curve distance") {
  const TimeGrid grid(0.0, 1.0, 4);
  const auto base = EmpiricalMeasure::from_scalars({0.0, 1.0, 2.0});
  const auto c1 = DistributionCurve::constant(grid, base);
  CHECK(curve_distance_m(c1, c1) == 0.0);
  auto ms = c1.measures();
  ms[2] = EmpiricalMeasure::from_scalars({0.7, 1.7, 2.7});
  CHECK(curve_distance_m(c1, DistributionCurve(grid, ms)) == doctest::Approx(0.7));

  const auto b0 = brownian_curve(0.0, 500, 20);
  const auto b1 = brownian_curve(1.0, 500, 20);
  CHECK(curve_distance_m(b0, b1) == doctest::Approx(1.0).epsilon(1e-12));

  const auto b2 = brownian_curve(0.3, 500, 20);
  CHECK(curve_distance_m(b0, b1) <= curve_distance_m(b0, b2) + curve_distance_m(b2, b1) + 1e-12);
  CHECK_THROWS(curve_distance_m(c1, b0));
}

TEST_CASE("coupling bound") {
  const auto x = EmpiricalMeasure::from_scalars(normal_sample(9, 200, 0.0, 1.0));
  auto r = coupling_bound_check(x, x);
  CHECK(r.w2 == 0.0);
  CHECK(r.l2 == 0.0);
  CHECK(r.ok);

  auto shifted = x.coordinates();
  for (double& v : shifted) v += 1.0;
  r = coupling_bound_check(x, EmpiricalMeasure::from_scalars(shifted));
  CHECK(r.w2 == doctest::Approx(1.0));
  CHECK(r.l2 == doctest::Approx(1.0));
  CHECK(r.ok);

  auto perm = x.coordinates();
  std::reverse(perm.begin(), perm.end());
  r = coupling_bound_check(x, EmpiricalMeasure::from_scalars(perm));
  double brute = 0.0;
  for (int i = 0; i < 200; ++i) brute += std::pow(x.coordinates()[i] - perm[i], 2);
  CHECK(r.w2 < 1e-12);
  CHECK(r.l2 == doctest::Approx(brute / 200));
  CHECK(r.ok);
}

TEST_CASE("holder profile") {
  const TimeGrid grid(0.0, 1.0, 10);
  CHECK(holder_profile(DistributionCurve::constant(grid, EmpiricalMeasure::from_scalars({1.0, 2.0}))) == 0.0);

  std::vector<EmpiricalMeasure> ms;
  for (int k = 0; k <= 10; ++k) ms.push_back(EmpiricalMeasure::from_scalars({grid.node(k)}));
  // w = |t - s| for point masses, so w^2 / |t - s| peaks at the full span.
  CHECK(holder_profile(DistributionCurve(grid, ms)) == doctest::Approx(1.0));

  CHECK(holder_profile(brownian_curve(0.0, 4000, 10)) <= 1.1);
}

TEST_CASE("curve csv has one row per node") {
  const TimeGrid grid(0.0, 1.0, 3);
  std::ostringstream os;
  write_curve_csv(os, DistributionCurve::constant(grid, EmpiricalMeasure::from_scalars({0.0, 1.0})));
  const std::string s = os.str();
  CHECK(std::count(s.begin(), s.end(), '\n') == 5);
  CHECK(s.rfind("t,mean_1,second_moment", 0) == 0);
}
