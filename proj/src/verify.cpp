#include "ticmkv/verify.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "ticmkv/csv.hpp"
#include "ticmkv/riccati.hpp"
#include "ticmkv/rng.hpp"
#include "ticmkv/simulate.hpp"

namespace ticmkv {

namespace {

CostEstimate summarize(const std::vector<double>& v) {
  const double n = static_cast<double>(v.size());
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= n;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  CostEstimate e;
  e.mean = mean;
  e.std_error = v.size() > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0;
  return e;
}

SimOptions frozen_options(const McOptions& mc, const TimeGrid& grid, std::uint64_t seed) {
  SimOptions sim;
  sim.n_particles = mc.n_paths;
  sim.grid = grid;
  sim.seed = seed;
  sim.workers = mc.workers;
  return sim;
}

// Type-7 quantile of coordinate j over the cloud.
double quantile(const EmpiricalMeasure& mu, int j, double q) {
  std::vector<double> v(mu.count());
  for (int i = 0; i < mu.count(); ++i) v[i] = mu.point(i)[j];
  std::sort(v.begin(), v.end());
  const double pos = q * (v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - lo) * (v[hi] - v[lo]);
}

}  // namespace

CostEstimate estimate_cost_j(const ModelSpec& model, const DistributionCurve& frozen_curve,
                             const FeedbackStrategy& control, double tau, double t, ConstVecView x,
                             const McOptions& mc) {
  const CostSamples s =
      simulate_frozen(model, control, frozen_curve, t, x, tau, frozen_options(mc, frozen_curve.grid(), mc.seed));
  return summarize(s.total());
}

SpikeReport spike_test(const ModelSpec& model, const EquilibriumResult& eq, const SpikeOptions& options) {
  return spike_test(model, eq.mu_star, eq.strategy_star, options);
}

SpikeReport spike_test(const ModelSpec& model, const DistributionCurve& mu, StrategyPtr strategy,
                       const SpikeOptions& options) {
  const TimeGrid& grid = mu.grid();
  const double T = grid.end();
  const double h = grid.step();
  if (options.eps_fractions.empty()) throw std::invalid_argument("spike_test: empty epsilon ladder");
  std::vector<int> eps_steps;
  for (std::size_t r = 0; r < options.eps_fractions.size(); ++r) {
    const double eps = options.eps_fractions[r] * T;
    if (r > 0 && !(options.eps_fractions[r] < options.eps_fractions[r - 1])) {
      throw std::invalid_argument("spike_test: epsilon ladder must be strictly decreasing");
    }
    const double m = eps / h;
    if (!(m >= 1.0 - 1e-9) || std::abs(m - std::round(m)) > 1e-6) {
      std::ostringstream os;
      os << "spike_test: epsilon " << eps << " is not a multiple of the grid step " << h;
      throw std::invalid_argument(os.str());
    }
    eps_steps.push_back(static_cast<int>(std::lround(m)));
  }
  const std::vector<MomentVector> law = mu.node_moments(model.functionals);
  const int d = model.dim;
  const int l = model.control_dim;

  SpikeReport report;
  report.mc = options.mc;
  report.stat_factor = options.stat_factor;
  report.overall_pass = true;

  int point = 0;
  for (double tf : options.probe_times) {
    if (!(tf >= 0.0 && tf < 1.0)) throw std::invalid_argument("spike_test: probe time outside [0, T)");
    const int k = std::clamp(static_cast<int>(std::lround((tf * T - grid.start()) / h)), 0, grid.steps());
    const double t = grid.node(k);
    for (double q : options.probe_quantiles) {
      if (!(q >= 0.0 && q <= 1.0)) {
        throw std::invalid_argument("spike_test: probe point outside the simulated state range");
      }
      Vec x(d);
      for (int j = 0; j < d; ++j) x[j] = quantile(mu.at(k), j, q);
      if (k + eps_steps.front() > grid.steps()) {
        throw std::invalid_argument("spike_test: probe time plus largest epsilon exceeds the horizon");
      }
      const ConstVecView xs(x.data(), d);
      const std::uint64_t seed = derive_seed(options.mc.seed, static_cast<std::uint64_t>(point));
      const SimOptions sim = frozen_options(options.mc, grid, seed);
      const std::vector<double> base = simulate_frozen(model, *strategy, grid, law, t, xs, t, sim).total();

      std::vector<Vec> controls;
      const Vec u_star = (*strategy)(t, xs);
      for (int j = 0; j < l; ++j) {
        for (double off : options.probe_offsets) {
          Vec v = u_star;
          v[j] += off;
          controls.push_back(v);
        }
      }
      for (const auto& v : options.extra_controls) {
        if (v.size() != l) throw std::invalid_argument("spike_test: probe control has wrong dimension");
        controls.push_back(v);
      }

      for (const Vec& v : controls) {
        SpikeProbe probe;
        probe.point = point;
        probe.t = t;
        probe.x = x;
        probe.control = v;
        for (int m : eps_steps) {
          const double eps = m * h;
          const SpikeStrategy composite(strategy, v, t, grid.node(k + m));
          const std::vector<double> spiked = simulate_frozen(model, composite, grid, law, t, xs, t, sim).total();
          std::vector<double> diff(base.size());
          for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = (base[i] - spiked[i]) / eps;
          const CostEstimate e = summarize(diff);
          probe.rungs.push_back({eps, e.mean, e.std_error});
        }
        // Least-squares line D = limit + slope * eps.
        const double n = static_cast<double>(probe.rungs.size());
        if (probe.rungs.size() == 1) {
          probe.limit = probe.rungs[0].D;
        } else {
          double sx = 0, sy = 0, sxx = 0, sxy = 0;
          for (const auto& r : probe.rungs) {
            sx += r.epsilon;
            sy += r.D;
            sxx += r.epsilon * r.epsilon;
            sxy += r.epsilon * r.D;
          }
          const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
          probe.limit = (sy - slope * sx) / n;
        }
        probe.threshold = options.stat_factor * probe.rungs.back().std_error;
        probe.pass = probe.limit <= probe.threshold;
        report.overall_pass = report.overall_pass && probe.pass;
        report.probes.push_back(std::move(probe));
      }
      ++point;
    }
  }
  return report;
}

std::string SpikeReport::to_json() const {
  nlohmann::ordered_json j;
  j["overall_pass"] = overall_pass;
  j["stat_factor"] = stat_factor;
  j["mc"] = {{"n_paths", mc.n_paths}, {"seed", mc.seed}};
  j["probes"] = nlohmann::ordered_json::array();
  for (const auto& p : probes) {
    nlohmann::ordered_json pj;
    pj["point"] = p.point;
    pj["t"] = p.t;
    pj["x"] = std::vector<double>(p.x.data(), p.x.data() + p.x.size());
    pj["control"] = std::vector<double>(p.control.data(), p.control.data() + p.control.size());
    pj["epsilon"] = nlohmann::ordered_json::array();
    pj["D"] = nlohmann::ordered_json::array();
    pj["stderr"] = nlohmann::ordered_json::array();
    for (const auto& r : p.rungs) {
      pj["epsilon"].push_back(r.epsilon);
      pj["D"].push_back(r.D);
      pj["stderr"].push_back(r.std_error);
    }
    pj["limit"] = p.limit;
    pj["threshold"] = p.threshold;
    pj["pass"] = p.pass;
    j["probes"].push_back(pj);
  }
  return j.dump(2) + "\n";
}

void SpikeReport::write_csv(std::ostream& out) const {
  out << "probe,t,x,control,epsilon,D,stderr\n";
  for (std::size_t i = 0; i < probes.size(); ++i) {
    const auto& p = probes[i];
    for (const auto& r : p.rungs) csv::row(out, static_cast<int>(i), p.t, p.x[0], p.control[0], r.epsilon, r.D, r.std_error);
  }
}

namespace {

struct ClassicalState {
  Mat P;
  Vec p;
};

}  // namespace

void classical_lq_feedback(const LqModelSpec& lq, const DistributionCurve& mu, std::vector<Mat>& gains,
                           std::vector<Vec>& offsets, std::vector<Mat>* P_out, std::vector<Vec>* p_out) {
  const TimeGrid& grid = mu.grid();
  const int K = grid.steps();
  const double h = grid.step();
  const std::vector<MomentVector> law = mu.node_moments(lq.functionals);
  std::vector<Vec> a_nodes(K + 1);
  for (int k = 0; k <= K; ++k) a_nodes[k] = lq.a(grid.node(k), law[k]);

  // Backward rates of P and p for the classical Riccati pair at time t,
  // with drift offset a.
  auto rate = [&](double t, const Vec& a, const ClassicalState& s) {
    const Mat A = lq.A(t);
    const Mat B = lq.B(t);
    const Mat R = lq.R(t, t);
    const Mat M = B * R.llt().solve(B.transpose());
    ClassicalState r;
    r.P = s.P * A + A.transpose() * s.P + lq.Q(t, t) - s.P * M * s.P;
    r.p = (A - M * s.P).transpose() * s.p + s.P * a;
    return r;
  };

  std::vector<ClassicalState> states(K + 1);
  states[K].P = lq.G(grid.node(K));
  states[K].p = Vec::Zero(lq.dim);
  for (int k = K - 1; k >= 0; --k) {
    const double t1 = grid.node(k + 1);
    const double t0 = grid.node(k);
    const double tm = 0.5 * (t0 + t1);
    const Vec am = 0.5 * (a_nodes[k] + a_nodes[k + 1]);
    const ClassicalState& s = states[k + 1];
    auto add = [](const ClassicalState& a, const ClassicalState& b, double w) {
      return ClassicalState{a.P + w * b.P, a.p + w * b.p};
    };
    const ClassicalState k1 = rate(t1, a_nodes[k + 1], s);
    const ClassicalState k2 = rate(tm, am, add(s, k1, 0.5 * h));
    const ClassicalState k3 = rate(tm, am, add(s, k2, 0.5 * h));
    const ClassicalState k4 = rate(t0, a_nodes[k], add(s, k3, h));
    ClassicalState next;
    next.P = s.P + h / 6.0 * (k1.P + 2.0 * k2.P + 2.0 * k3.P + k4.P);
    next.P = 0.5 * (next.P + next.P.transpose()).eval();
    next.p = s.p + h / 6.0 * (k1.p + 2.0 * k2.p + 2.0 * k3.p + k4.p);
    states[k] = next;
  }
  gains.assign(K + 1, Mat());
  offsets.assign(K + 1, Vec());
  for (int k = 0; k <= K; ++k) {
    const double t = grid.node(k);
    const Mat RinvBt = lq.R(t, t).llt().solve(lq.B(t).transpose());
    gains[k] = -RinvBt * states[k].P;
    offsets[k] = -RinvBt * states[k].p;
  }
  if (P_out) {
    P_out->clear();
    for (const auto& s : states) P_out->push_back(s.P);
  }
  if (p_out) {
    p_out->clear();
    for (const auto& s : states) p_out->push_back(s.p);
  }
}

ReductionReport time_consistent_reduction_check(const LqModelSpec& lq, const DistributionCurve& mu) {
  const TimeGrid& grid = mu.grid();
  const int K = grid.steps();
  const int stride = std::max(1, K / 200);
  for (int k = 0; k <= K; k += (k + stride > K && k != K ? K - k : stride)) {
    const double t = grid.node(k);
    const Mat Qd = lq.Q(t, t);
    const Mat Rd = lq.R(t, t);
    for (int j = 0; j <= k; j += stride) {
      const double tau = grid.node(j);
      if ((lq.Q(tau, t) - Qd).cwiseAbs().maxCoeff() > 1e-12 || (lq.R(tau, t) - Rd).cwiseAbs().maxCoeff() > 1e-12) {
        throw std::invalid_argument("time_consistent_reduction_check: Q or R depends on tau");
      }
    }
    if ((lq.G(t) - lq.G(grid.end())).cwiseAbs().maxCoeff() > 1e-12) {
      throw std::invalid_argument("time_consistent_reduction_check: G depends on tau");
    }
    if (k == K) break;
  }
  const RiccatiFamily fam = solve_riccati_family(lq, mu);
  const auto eq = extract_strategy_lq(fam, lq);
  std::vector<Mat> gains;
  std::vector<Vec> offsets;
  classical_lq_feedback(lq, mu, gains, offsets);
  ReductionReport r;
  for (int k = 0; k <= K; ++k) {
    r.gain_gap = std::max(r.gain_gap, (eq->gains()[k] - gains[k]).cwiseAbs().maxCoeff());
    r.offset_gap = std::max(r.offset_gap, (eq->offsets()[k] - offsets[k]).cwiseAbs().maxCoeff());
  }
  return r;
}

}  // namespace ticmkv
