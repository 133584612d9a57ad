// Acceptance suite: one PASS/FAIL line per criterion.
// Usage: acceptance [criterion numbers...]   (default: all)

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "ticmkv/config.hpp"
#include "ticmkv/equilibrium.hpp"
#include "ticmkv/hjb1d.hpp"
#include "ticmkv/io.hpp"
#include "ticmkv/measures.hpp"
#include "ticmkv/model.hpp"
#include "ticmkv/pipeline.hpp"
#include "ticmkv/riccati.hpp"
#include "ticmkv/rng.hpp"
#include "ticmkv/simulate.hpp"
#include "ticmkv/verify.hpp"

using namespace ticmkv;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double sup_second_moment(const DistributionCurve& c) {
  double s = 0.0;
  for (const auto& m : c.node_moments()) s = std::max(s, m.second_moment);
  return s;
}

EquilibriumOptions dissipative_options(std::uint64_t seed, int n = 10000) {
  EquilibriumOptions o;
  o.n_particles = n;
  o.steps = 100;
  o.seed = seed;
  o.tol_fp = 1e-3;
  o.max_iter = 20;
  o.workers = 0;
  return o;
}

const InitialLaw& gamma_law() {
  static const InitialLaw g = InitialLaw::gaussian(Vec::Constant(1, 1.0), Vec::Constant(1, 1.0));
  return g;
}

// 1. Wasserstein correctness.
void wasserstein_correctness(Outcome& out) {
  CounterRng rng(2024);
  double worst = 0.0;
  for (int c = 0; c < 200; ++c) {
    const int n = 2 + static_cast<int>(rng.uniforms(c, 0, CounterRng::kUniform)[0] * 126.999);
    std::vector<double> a(n), b(n);
    for (int i = 0; i < n; ++i) {
      a[i] = rng.normal(c, i, CounterRng::kInitial);
      b[i] = 0.5 + 2.0 * rng.normal(c, i, CounterRng::kNoise);
    }
    const auto mu = EmpiricalMeasure::from_scalars(a);
    const auto nu = EmpiricalMeasure::from_scalars(b);
    worst = std::max(worst, std::abs(wasserstein2(mu, nu, W2Method::exact1d()) -
                                     wasserstein2(mu, nu, W2Method::assignment())));
  }
  const int N = 10000;
  std::vector<double> a(N), b(N);
  for (int i = 0; i < N; ++i) {
    a[i] = rng.normal(i, 1, CounterRng::kInitial);
    b[i] = 2.0 + rng.normal(i, 2, CounterRng::kInitial);
  }
  const double w = wasserstein2(EmpiricalMeasure::from_scalars(a), EmpiricalMeasure::from_scalars(b));
  out.detail << "max |exact1d - assignment| = " << worst << ", w(N(0,1),N(2,1)) = " << w;
  out.require(worst <= 1e-10, "exact1d vs assignment");
  out.require(std::abs(w - 2.0) <= 0.05, "Gaussian shift");
}

// 2. T1 law map.
void t1_law_map(Outcome& out) {
  const int N = 10000;
  SimOptions sim;
  sim.n_particles = N;
  sim.grid = TimeGrid(0.0, 1.0, 200);
  sim.seed = 11;
  sim.workers = 0;
  const ModelSpec bm = build_general_catalog("brownian");
  const auto zero = ConstantStrategy::zero(1, 1);
  const auto paths = simulate_t1(bm, *zero, InitialLaw::dirac(Vec::Zero(1)), sim);
  double worst_z = 0.0;
  for (int k = 1; k <= 200; ++k) {
    const double t = sim.grid.node(k);
    const double m2 = moments(paths.curve.at(k)).second_moment;
    const double se = std::sqrt(2.0) * t / std::sqrt(static_cast<double>(N));
    worst_z = std::max(worst_z, std::abs(m2 - t) / se);
  }
  out.detail << "brownian max |m2 - t|/se = " << worst_z;
  out.require(worst_z <= 3.0, "brownian second moment");
  for (double c : {0.0, 0.5}) {
    const ModelSpec ou = build_general_catalog("ou_meanfield", {{"c", c}});
    const auto p = simulate_t1(ou, *zero, InitialLaw::dirac(Vec::Constant(1, 1.0)), sim);
    double z = 0.0;
    for (int k = 1; k <= 200; ++k) {
      const double t = sim.grid.node(k);
      const MomentVector m = moments(p.curve.at(k));
      const double se = std::sqrt(m.variance() / N);
      z = std::max(z, std::abs(m.mean[0] - std::exp((c - 1.0) * t)) / se);
    }
    out.detail << ", OU c=" << c << " max z = " << z;
    out.require(z <= 3.0, "OU mean");
  }
}

std::vector<double> riccati_diagonal(const LqModelSpec& lq, const EmpiricalMeasure& cloud, int K) {
  const TimeGrid g(0.0, lq.horizon, K);
  const RiccatiFamily fam = solve_riccati_family(lq, DistributionCurve::constant(g, cloud));
  std::vector<double> d;
  for (int k = 0; k <= K; ++k) {
    d.push_back(fam.P(k, k)(0, 0));
    d.push_back(fam.p(k, k)(0));
  }
  return d;
}

// 3. Riccati oracle.
void riccati_oracle(Outcome& out) {
  const double g = 1.0;
  const LqModelSpec base = build_lq_catalog("time_consistent_baseline", {{"g", g}});
  const TimeGrid grid(0.0, 1.0, 2000);
  const auto cloud = gamma_law().sample_cloud(3, 2000);
  const RiccatiFamily fam = solve_riccati_family(base, DistributionCurve::constant(grid, cloud));
  double err = 0.0;
  for (int k = 0; k <= 2000; ++k) {
    const double t = grid.node(k);
    err = std::max(err, std::abs(fam.P(k, k)(0, 0) - g / (1.0 + g * (1.0 - t))));
  }
  out.detail << "baseline diagonal error " << err;
  out.require(err <= 1e-5, "closed form");

  const LqModelSpec tw = build_lq_catalog("tau_weighted_terminal");
  std::vector<std::vector<double>> sols;
  for (int K : {50, 100, 200, 400, 800}) sols.push_back(riccati_diagonal(tw, cloud, K));
  std::vector<double> change;
  for (std::size_t s = 0; s + 1 < sols.size(); ++s) {
    double c = 0.0;
    const std::size_t nodes = sols[s].size() / 2;
    for (std::size_t k = 0; k < nodes; ++k) {
      for (int q = 0; q < 2; ++q) c = std::max(c, std::abs(sols[s][2 * k + q] - sols[s + 1][2 * (2 * k) + q]));
    }
    change.push_back(c);
  }
  out.detail << ", self-convergence ratios";
  for (std::size_t s = 0; s + 1 < change.size(); ++s) {
    const double r = change[s + 1] / change[s];
    out.detail << " " << r;
    out.require(r <= 0.6, "halving ratio");
  }
}

// 4. Structural invariance and offset continuity.
void structural_invariance(Outcome& out) {
  const LqModelSpec lq = build_lq_catalog("dissipative_meanfield");
  const TimeGrid grid(0.0, 1.0, 200);
  SimOptions sim;
  sim.n_particles = 5000;
  sim.grid = grid;
  sim.seed = 4;
  const auto curve = simulate_t1(as_general(lq), *ConstantStrategy::zero(1, 1), gamma_law(), sim).curve;
  const RiccatiFamily f0 = solve_riccati_family(lq, curve);

  LqModelSpec other = lq;
  other.a = [](double t, const MomentVector& m) -> Vec { return Vec::Constant(1, 3.0 * std::sin(5 * t) - m.mean[0]); };
  other.b = [](double t, const MomentVector& m) -> Vec { return Vec::Constant(1, 0.2 + t + m.second_moment); };
  other.F = [](double tau, double t, const MomentVector& m) { return 1.0 + tau * t * m.second_moment; };
  other.H = [](double tau, const MomentVector& m) { return 2.0 + tau + m.mean[0]; };
  const RiccatiFamily f1 = solve_riccati_family(other, curve);
  const bool identical = f0.P_data() == f1.P_data();
  out.detail << "P bit-identical under a,b,F,H changes: " << (identical ? "yes" : "no");
  out.require(identical, "P invariance");
  out.require(f0.p_data() != f1.p_data(), "offset responds to a");

  // Shift the frozen curve by delta; a = c mean moves by c delta.
  std::vector<double> deltas{0.4, 0.2, 0.1, 0.05}, gaps;
  for (double delta : deltas) {
    std::vector<EmpiricalMeasure> shifted;
    for (const auto& m : curve.measures()) {
      std::vector<double> x = m.coordinates();
      for (double& v : x) v += delta;
      shifted.emplace_back(1, std::move(x));
    }
    const RiccatiFamily f = solve_riccati_family(lq, DistributionCurve(grid, shifted));
    double gap = 0.0;
    for (int k = 0; k <= grid.steps(); ++k) gap = std::max(gap, std::abs(f.p(k, k)(0) - f0.p(k, k)(0)));
    gaps.push_back(gap);
  }
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < deltas.size(); ++i) {
    const double x = std::log(deltas[i]), y = std::log(gaps[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double n = static_cast<double>(deltas.size());
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  out.detail << ", offset continuity log-log slope " << slope;
  out.require(std::abs(slope - 1.0) <= 0.15, "offset continuity slope");
}

// 5. HJB against Riccati on a time-consistent LQ problem.
void hjb_cross_validation(Outcome& out) {
  const LqModelSpec lq = build_lq_catalog("time_consistent_baseline", {{"Q", 1.0}, {"g", 1.5}, {"c", 0.5}});
  const ModelSpec model = as_general(lq);
  const int K = 400;
  const TimeGrid grid(0.0, 1.0, K);
  SimOptions sim;
  sim.n_particles = 5000;
  sim.grid = grid;
  sim.seed = 5;
  const auto curve = simulate_t1(model, *ConstantStrategy::zero(1, 1), gamma_law(), sim).curve;
  HjbOptions ho;
  ho.x_steps = 400;
  const ValueSurface surf = solve_hjb_family(model, curve, ho);
  std::vector<Mat> gains, P;
  std::vector<Vec> offsets, p;
  classical_lq_feedback(lq, curve, gains, offsets, &P, &p);
  const XDomain d = surf.domain();
  const double lo = d.lo + 0.25 * (d.hi - d.lo), hi = d.hi - 0.25 * (d.hi - d.lo);
  double worst = 0.0;
  for (int k = 0; k <= K; ++k) {
    double num = 0.0, den = 0.0;
    for (int i = 0; i <= ho.x_steps; ++i) {
      const double x = surf.x(i);
      if (x < lo || x > hi) continue;
      const double ref = 2.0 * P[k](0, 0) * x + 2.0 * p[k](0);
      num = std::max(num, std::abs(surf.diag_grad(k, i) - ref));
      den = std::max(den, std::abs(ref));
    }
    worst = std::max(worst, num / den);
  }
  out.detail << "domain [" << d.lo << ", " << d.hi << "], max inner-half relative error " << worst;
  out.require(worst <= 0.02, "relative error");
}

// 6. Fixed-point contraction.
void fixed_point(Outcome& out) {
  const LqModelSpec lq = build_lq_catalog("dissipative_meanfield", {{"L0", 10.0}, {"c", 0.5}, {"T", 1.0}});
  const EquilibriumResult eq = solve_equilibrium(lq, gamma_law(), dissipative_options(1));
  out.detail << "dissipative: " << to_string(eq.status) << " in " << eq.iterations << " iterations, ratios";
  for (const auto& r : eq.history) {
    if (r.iteration >= 2) out.detail << " " << r.contraction_ratio;
    if (r.iteration > 2) out.require(r.contraction_ratio < 0.5, "ratio after iteration 2");
  }
  out.require(eq.converged && eq.iterations <= 8, "converged within 8 iterations");

  const LqModelSpec flat = build_lq_catalog("time_consistent_baseline", {{"Q", 1.0}, {"c", 0.0}});
  const EquilibriumResult e2 = solve_equilibrium(flat, gamma_law(), dissipative_options(1));
  const double m2 = e2.history.size() >= 2 ? e2.history[1].m_distance : -1.0;
  out.detail << "; rho-independent: m at iteration 2 = " << m2;
  out.require(m2 == 0.0 && e2.converged && e2.iterations == 2, "exact zero at iteration 2");
}

// 7. Consistency and its N^{-1/2} scaling.
void consistency(Outcome& out) {
  const LqModelSpec lq = build_lq_catalog("dissipative_meanfield");
  const EquilibriumResult eq = solve_equilibrium(lq, gamma_law(), dissipative_options(7));
  const ConsistencyReport r = consistency_check(eq, lq, gamma_law(), 7007, 0);
  out.detail << "N=10000: m = " << r.m_distance << " <= " << r.tolerance;
  out.require(eq.converged && r.pass, "fresh-seed tolerance");

  std::vector<double> medians;
  for (int N : {2500, 10000}) {
    std::vector<double> ms;
    for (int rep = 0; rep < 20; ++rep) {
      const EquilibriumResult e = solve_equilibrium(lq, gamma_law(), dissipative_options(100 + rep, N));
      ms.push_back(consistency_check(e, lq, gamma_law(), 9000 + rep, 0).m_distance);
    }
    medians.push_back(median(ms));
  }
  const double ratio = medians[1] / medians[0];
  out.detail << "; median m " << medians[0] << " -> " << medians[1] << " (ratio " << ratio << ")";
  out.require(ratio >= 0.25 && ratio <= 0.75, "median halves");
}

// 8. Local optimality via spike variations.
void local_optimality(Outcome& out) {
  const LqModelSpec lq = build_lq_catalog("dissipative_meanfield");
  const EquilibriumResult eq = solve_equilibrium(lq, gamma_law(), dissipative_options(8));
  const ModelSpec model = as_general(lq);
  SpikeOptions so;
  so.mc.n_paths = 20000;
  so.mc.seed = 808;
  so.mc.workers = 0;
  const SpikeReport good = spike_test(model, eq, so);
  int failed = 0;
  double worst = -1e300;
  for (const auto& p : good.probes) {
    failed += p.pass ? 0 : 1;
    worst = std::max(worst, p.limit - p.threshold);
  }
  out.detail << good.probes.size() << " probes, failed " << failed << " (max limit - threshold " << worst << ")";
  out.require(good.probes.size() == 36 && good.overall_pass, "equilibrium passes");

  const SpikeReport bad = spike_test(model, eq.mu_star, ConstantStrategy::zero(1, 1), so);
  int caught = 0;
  double margin = -1e300;
  for (const auto& p : bad.probes) {
    caught += p.pass ? 0 : 1;
    margin = std::max(margin, p.limit - p.threshold);
  }
  out.detail << "; u = 0 fails at " << caught << " probes (max limit - threshold " << margin << ")";
  out.require(caught >= 1 && !bad.overall_pass, "wrong strategy rejected");
}

// 9. Time-consistent reduction.
void reduction(Outcome& out) {
  const LqModelSpec lq = build_lq_catalog("time_consistent_baseline", {{"Q", 1.0}, {"g", 2.0}, {"c", 0.5}});
  EquilibriumOptions o = dissipative_options(9);
  const EquilibriumResult eq = solve_equilibrium(lq, gamma_law(), o);
  const ReductionReport r = time_consistent_reduction_check(lq, eq.mu_star);
  out.detail << "gain_gap " << r.gain_gap << ", offset_gap " << r.offset_gap;
  out.require(r.gain_gap <= 1e-4 && r.offset_gap <= 1e-4, "gaps");
  bool rejected = false;
  try {
    (void)time_consistent_reduction_check(build_lq_catalog("tau_weighted_terminal"), eq.mu_star);
  } catch (const std::invalid_argument&) {
    rejected = true;
  }
  out.require(rejected, "tau dependence detected");
}

// 10. N-player consistency.
void n_player(Outcome& out) {
  const LqModelSpec lq = build_lq_catalog("dissipative_meanfield");
  const EquilibriumResult eq = solve_equilibrium(lq, gamma_law(), dissipative_options(10));
  const ModelSpec model = as_general(lq);
  std::vector<double> medians;
  for (int N : {250, 1000, 4000}) {
    std::vector<double> ds;
    for (int rep = 0; rep < 10; ++rep) {
      SimOptions sim;
      sim.n_particles = N;
      sim.grid = eq.mu_star.grid();
      sim.seed = derive_seed(1000 + N, rep);
      sim.workers = 0;
      ds.push_back(curve_distance_m(simulate_n_player(model, *eq.strategy_star, gamma_law(), sim).curve, eq.mu_star));
    }
    medians.push_back(median(ds));
  }
  out.detail << "median m for N = 250, 1000, 4000: " << medians[0] << ", " << medians[1] << ", " << medians[2];
  out.require(medians[1] < medians[0] && medians[2] < medians[1], "monotone decrease");
}

// 11. Determinism across worker counts.
void determinism(Outcome& out) {
  namespace fs = std::filesystem;
  const fs::path root = fs::temp_directory_path() / "ticmkv_acceptance_determinism";
  fs::remove_all(root);
  const char* configs[] = {
      R"(seed = 31
[model]
kind = "lq"
catalog = "dissipative_meanfield"
[numerics]
n_particles = 2000
steps = 100
spike_paths = 2000
)",
      R"(seed = 32
[model]
kind = "general"
catalog = "nonlinear_controlled"
[numerics]
backend = "hjb1d"
n_particles = 1000
steps = 100
x_steps = 60
spike_paths = 1000
[checks]
spike = false
[output]
surface_csv = true
paths_binary = true
)"};
  int compared = 0;
  for (int c = 0; c < 2; ++c) {
    std::vector<std::map<std::string, std::string>> runs;
    for (int workers : {1, 3, 1}) {
      RunConfig cfg = parse_config(configs[c]);
      cfg.numerics.workers = workers;
      // One directory per config so that the echoed output path matches.
      cfg.output.directory = (root / ("c" + std::to_string(c))).string();
      fs::remove_all(cfg.output.directory);
      std::ostringstream log;
      const int code = pipeline::run(cfg, log);
      out.require(code == 0, "pipeline exit code " + std::to_string(code));
      std::map<std::string, std::string> files;
      for (const auto& e : fs::directory_iterator(cfg.output.directory)) {
        files[e.path().filename().string()] = io::read_text(e.path());
      }
      runs.push_back(std::move(files));
    }
    for (std::size_t r = 1; r < runs.size(); ++r) {
      out.require(runs[r] == runs[0], "byte-identical bundle");
    }
    compared += static_cast<int>(runs[0].size());
  }
  out.detail << compared << " files compared across workers {1, 3} and a rerun";
  fs::remove_all(root);
}

}  // namespace

int main(int argc, char** argv) {
  struct Criterion {
    int id;
    const char* name;
    double budget_s;
    std::function<void(Outcome&)> fn;
  };
  const std::vector<Criterion> all{
      {1, "wasserstein correctness", 10, wasserstein_correctness},
      {2, "law map T1", 30, t1_law_map},
      {3, "riccati oracle", 20, riccati_oracle},
      {4, "structural invariance", 0, structural_invariance},
      {5, "hjb vs riccati cross-validation", 60, hjb_cross_validation},
      {6, "fixed point contraction", 180, fixed_point},
      {7, "equilibrium consistency", 0, consistency},
      {8, "local optimality (spike test)", 180, local_optimality},
      {9, "time-consistent reduction", 0, reduction},
      {10, "n-player consistency", 0, n_player},
      {11, "determinism", 0, determinism},
  };
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));

  int failures = 0;
  for (const auto& c : all) {
    if (!wanted.empty() && !wanted.count(c.id)) continue;
    Outcome out;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      c.fn(out);
    } catch (const std::exception& e) {
      out.pass = false;
      out.detail << " [exception: " << e.what() << "]";
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.budget_s > 0 && secs > c.budget_s) {
      out.pass = false;
      out.detail << " [over runtime budget " << c.budget_s << " s]";
    }
    std::printf("%s  %2d  %-34s %7.2f s  %s\n", out.pass ? "PASS" : "FAIL", c.id, c.name, secs,
                out.detail.str().c_str());
    std::fflush(stdout);
    failures += out.pass ? 0 : 1;
  }
  return failures == 0 ? 0 : 1;
}
