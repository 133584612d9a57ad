#include "ticmkv/equilibrium.hpp"

#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "ticmkv/csv.hpp"

namespace ticmkv {

ModelSpec general_model(const Problem& problem) {
  if (const auto* lq = std::get_if<LqModelSpec>(&problem)) return as_general(*lq);
  return std::get<ModelSpec>(problem);
}

std::string to_string(EquilibriumStatus status) {
  switch (status) {
    case EquilibriumStatus::converged: return "converged";
    case EquilibriumStatus::max_iter: return "max_iter";
    case EquilibriumStatus::diverged: return "diverged";
  }
  return "unknown";
}

StrategyPtr myopic_strategy(const ModelSpec& model) {
  auto m = std::make_shared<ModelSpec>(model);
  return std::make_shared<FunctionStrategy>(
      model.dim, model.control_dim,
      [m](double t, ConstVecView x, VecView u) {
        std::vector<double> q(m->dim, 0.0);
        eval_psi(*m, t, x, q, u);
      },
      model.beta_psi.value_or(0.0), "myopic");
}

namespace {

double sup_second_moment(const DistributionCurve& c) {
  double s = 0.0;
  for (const auto& m : c.node_moments()) s = std::max(s, m.second_moment);
  return s;
}

std::vector<std::vector<double>> sample_points(const DistributionCurve& c, int per_node) {
  const int n = c.count();
  const int d = c.dim();
  const int s = std::min(per_node, n);
  std::vector<std::vector<double>> out(c.size());
  for (int k = 0; k < c.size(); ++k) {
    out[k].reserve(static_cast<std::size_t>(s) * d);
    for (int q = 0; q < s; ++q) {
      const auto p = c.at(k).point(static_cast<int>(static_cast<long long>(q) * n / s));
      out[k].insert(out[k].end(), p.begin(), p.end());
    }
  }
  return out;
}

StrategyPtr backward_solve_impl(const Problem& problem, const ModelSpec& general, const DistributionCurve& mu,
                                const EquilibriumOptions& opts, std::shared_ptr<const RiccatiFamily>* family,
                                std::shared_ptr<const ValueSurface>* surface) {
  if (opts.backend == Backend::riccati) {
    const auto* lq = std::get_if<LqModelSpec>(&problem);
    if (!lq) throw std::invalid_argument("solve_equilibrium: the riccati backend requires an LQ model");
    RiccatiOptions ro = opts.riccati;
    ro.workers = opts.workers;
    auto fam = std::make_shared<const RiccatiFamily>(solve_riccati_family(*lq, mu, ro));
    auto strategy = extract_strategy_lq(*fam, *lq);
    if (family) *family = fam;
    return strategy;
  }
  if (general.dim != 1) throw std::invalid_argument("solve_equilibrium: the hjb1d backend requires a 1-D model");
  HjbOptions ho = opts.hjb;
  ho.workers = opts.workers;
  auto surf = std::make_shared<const ValueSurface>(solve_hjb_family(general, mu, ho));
  auto strategy = extract_strategy_grid(*surf, general);
  if (surface) *surface = surf;
  return strategy;
}

}  // namespace

StrategyPtr backward_solve(const Problem& problem, const DistributionCurve& mu, const EquilibriumOptions& opts,
                           std::shared_ptr<const RiccatiFamily>* family,
                           std::shared_ptr<const ValueSurface>* surface) {
  return backward_solve_impl(problem, general_model(problem), mu, opts, family, surface);
}

EquilibriumResult solve_equilibrium(const Problem& problem, const InitialLaw& init, const EquilibriumOptions& opts) {
  if (opts.max_iter < 1) throw std::invalid_argument("solve_equilibrium: max_iter must be positive");
  if (!(opts.tol_fp > 0.0)) throw std::invalid_argument("solve_equilibrium: tol_fp must be positive");
  if (!(opts.damping > 0.0 && opts.damping <= 1.0)) {
    throw std::invalid_argument("solve_equilibrium: damping must lie in (0, 1]");
  }
  if (opts.backend == Backend::riccati && !std::holds_alternative<LqModelSpec>(problem)) {
    throw std::invalid_argument("solve_equilibrium: the riccati backend requires an LQ model");
  }
  const ModelSpec model = general_model(problem);
  if (opts.backend == Backend::hjb1d && model.dim != 1) {
    throw std::invalid_argument("solve_equilibrium: the hjb1d backend requires a 1-D model");
  }
  if (const auto* lq = std::get_if<LqModelSpec>(&problem)) {
    lq->validate(TimeGrid(opts.t_start, lq->horizon, opts.steps));
  }

  SimOptions sim;
  sim.n_particles = opts.n_particles;
  sim.grid = TimeGrid(opts.t_start, model.horizon, opts.steps);
  sim.seed = opts.seed;
  sim.workers = opts.workers;

  EquilibriumOptions local = opts;
  EquilibriumResult result;
  result.seed = opts.seed;

  if (opts.backend == Backend::hjb1d && !local.hjb.domain) {
    // Fixed once, so that the x grid does not move between iterations.
    const ParticlePaths pilot = simulate_t1(model, *myopic_strategy(model), init, sim);
    local.hjb.domain = default_x_domain(pilot.curve);
  }
  if (local.hjb.domain) result.hjb_domain = local.hjb.domain;

  DistributionCurve previous;
  if (opts.initial_curve) {
    if (!opts.initial_curve->grid().same_as(sim.grid)) {
      throw std::invalid_argument("solve_equilibrium: initial curve grid does not match");
    }
    previous = *opts.initial_curve;
  } else {
    previous = DistributionCurve::constant(sim.grid, init.sample_cloud(opts.seed, opts.n_particles));
  }

  StrategyPtr previous_strategy = ConstantStrategy::zero(model.dim, model.control_dim);
  std::shared_ptr<const AffineStrategy> previous_affine;
  for (int it = 1; it <= opts.max_iter; ++it) {
    std::shared_ptr<const RiccatiFamily> family;
    std::shared_ptr<const ValueSurface> surface;
    StrategyPtr strategy = backward_solve_impl(problem, model, previous, local, &family, &surface);

    if (opts.backend == Backend::riccati && opts.damping < 1.0 && previous_affine) {
      const auto fresh = std::dynamic_pointer_cast<const AffineStrategy>(strategy);
      std::vector<Vec> offsets(fresh->offsets().size());
      for (std::size_t k = 0; k < offsets.size(); ++k) {
        offsets[k] = opts.damping * fresh->offsets()[k] + (1.0 - opts.damping) * previous_affine->offsets()[k];
      }
      strategy = std::make_shared<AffineStrategy>(fresh->grid(), fresh->gains(), std::move(offsets));
    }

    DistributionCurve current = simulate_t1(model, *strategy, init, sim).curve;

    IterationRecord rec;
    rec.iteration = it;
    rec.m_distance = curve_distance_m(current, previous);
    if (result.history.empty()) {
      rec.contraction_ratio = std::numeric_limits<double>::quiet_NaN();
    } else {
      const double last = result.history.back().m_distance;
      rec.contraction_ratio = last > 0.0 ? rec.m_distance / last
                                         : (rec.m_distance == 0.0 ? 0.0 : std::numeric_limits<double>::infinity());
    }
    rec.strategy_delta = strategy_distance(*strategy, *previous_strategy, sim.grid,
                                           sample_points(previous, opts.strategy_sample));
    result.history.push_back(rec);

    result.tol_absolute = opts.tol_fp * std::sqrt(sup_second_moment(current));
    result.iterations = it;
    result.family = family;
    result.surface = surface;
    previous = std::move(current);
    previous_strategy = strategy;
    if (opts.backend == Backend::riccati) previous_affine = std::dynamic_pointer_cast<const AffineStrategy>(strategy);

    if (rec.m_distance == 0.0 || rec.m_distance < result.tol_absolute) {
      result.converged = true;
      result.status = EquilibriumStatus::converged;
      break;
    }
    const auto& h = result.history;
    if (h.size() >= 4) {
      const std::size_t n = h.size();
      if (h[n - 1].m_distance > h[n - 2].m_distance && h[n - 2].m_distance > h[n - 3].m_distance &&
          h[n - 3].m_distance > h[n - 4].m_distance) {
        result.status = EquilibriumStatus::diverged;
        break;
      }
    }
  }
  result.mu_star = std::move(previous);
  result.strategy_star = previous_strategy;
  return result;
}

ConsistencyReport consistency_check(const EquilibriumResult& result, const Problem& problem, const InitialLaw& init,
                                    std::uint64_t fresh_seed, int workers, double factor) {
  const ModelSpec model = general_model(problem);
  SimOptions sim;
  sim.n_particles = result.mu_star.count();
  sim.grid = result.mu_star.grid();
  sim.seed = fresh_seed;
  sim.workers = workers;
  const DistributionCurve fresh = simulate_t1(model, *result.strategy_star, init, sim).curve;
  ConsistencyReport report;
  report.m_distance = curve_distance_m(fresh, result.mu_star);
  report.tolerance = factor / std::sqrt(static_cast<double>(sim.n_particles)) * sup_second_moment(result.mu_star);
  report.pass = report.m_distance <= report.tolerance;
  return report;
}

ContractionReport contraction_report(const std::vector<double>& distances) {
  if (distances.size() < 2) throw std::invalid_argument("contraction_report: need at least two iterations");
  ContractionReport report;
  report.is_contraction = true;
  for (std::size_t k = 1; k < distances.size(); ++k) {
    const double prev = distances[k - 1];
    const double r = prev > 0.0 ? distances[k] / prev
                                : (distances[k] == 0.0 ? 0.0 : std::numeric_limits<double>::infinity());
    report.ratios.push_back(r);
    if (!(r < 1.0)) report.is_contraction = false;
  }
  // An exact zero means the iteration hit its fixed point: rate 0.
  for (double d : distances)
    if (!(d > 0.0)) return report;
  const double n = static_cast<double>(distances.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < distances.size(); ++i) {
    const double x = static_cast<double>(i);
    const double y = std::log(distances[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  report.fitted_rate = std::exp((n * sxy - sx * sy) / (n * sxx - sx * sx));
  return report;
}

ContractionReport contraction_report(const std::vector<IterationRecord>& history) {
  std::vector<double> d;
  d.reserve(history.size());
  for (const auto& r : history) d.push_back(r.m_distance);
  return contraction_report(d);
}

void write_history_csv(std::ostream& out, const std::vector<IterationRecord>& history) {
  out << "iteration,m_distance,contraction_ratio,strategy_delta\n";
  for (const auto& r : history) {
    out << r.iteration << ',' << csv::num(r.m_distance) << ',' << csv::num(r.contraction_ratio) << ','
        << csv::num(r.strategy_delta) << '\n';
  }
}

}  // namespace ticmkv
