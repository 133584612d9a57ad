#include "ticmkv/hjb1d.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "ticmkv/csv.hpp"
#include "ticmkv/parallel.hpp"

namespace ticmkv {

XDomain default_x_domain(const DistributionCurve& mu, double width_sd) {
  if (mu.dim() != 1) throw std::invalid_argument("default_x_domain: curve must be one-dimensional");
  XDomain dom{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  for (const auto& m : mu.node_moments()) {
    const double sd = std::sqrt(std::max(0.0, m.variance()));
    dom.lo = std::min(dom.lo, m.mean[0] - width_sd * sd);
    dom.hi = std::max(dom.hi, m.mean[0] + width_sd * sd);
  }
  if (!(dom.hi - dom.lo > 1e-12)) {
    const double c = 0.5 * (dom.lo + dom.hi);
    dom = {c - 1.0, c + 1.0};
  }
  return dom;
}

ValueSurface::ValueSurface(TimeGrid grid, XDomain domain, int x_steps, int stride)
    : grid_(grid), domain_(domain), x_steps_(x_steps), stride_(stride) {
  diag_.assign(static_cast<std::size_t>(grid.size()) * (x_steps + 1), 0.0);
  grad_.assign(diag_.size(), 0.0);
}

bool ValueSurface::stored(int j, int k) const { return j == k || slices_.count(key(j, k)) > 0; }

double ValueSurface::theta(int j, int k, int i) const {
  if (j == k) return diag(k, i);
  const auto it = slices_.find(key(j, k));
  if (it == slices_.end()) throw std::out_of_range("ValueSurface: slice not kept at this stride");
  return it->second.at(i);
}

void ValueSurface::set_diag(int k, const std::vector<double>& values) {
  std::copy(values.begin(), values.end(), diag_.begin() + static_cast<std::ptrdiff_t>(idx(k, 0)));
  const int n = x_steps_;
  const double h = dx();
  double* g = grad_.data() + idx(k, 0);
  g[0] = (values[1] - values[0]) / h;
  g[n] = (values[n] - values[n - 1]) / h;
  for (int i = 1; i < n; ++i) g[i] = (values[i + 1] - values[i - 1]) / (2.0 * h);
}

void ValueSurface::set_slice(int j, int k, const std::vector<double>& values) { slices_[key(j, k)] = values; }

void ValueSurface::write_surface_csv(std::ostream& out) const {
  out << "tau,t,x,theta\n";
  for (int j = 0; j < grid_.size(); ++j) {
    for (int k = j; k < grid_.size(); ++k) {
      if (!stored(j, k)) continue;
      for (int i = 0; i <= x_steps_; ++i) {
        csv::row(out, grid_.node(j), grid_.node(k), x(i), theta(j, k, i));
      }
    }
  }
}

void ValueSurface::write_diag_grad_csv(std::ostream& out) const {
  out << "t,x,theta_diag,diag_grad\n";
  for (int k = 0; k < grid_.size(); ++k) {
    for (int i = 0; i <= x_steps_; ++i) csv::row(out, grid_.node(k), x(i), diag(k, i), diag_grad(k, i));
  }
}

namespace {

// Tridiagonal system with identity boundary rows, factorized once per step.
class ImplicitDiffusion {
 public:
  explicit ImplicitDiffusion(const std::vector<double>& lambda) : n_(static_cast<int>(lambda.size())) {
    lower_.assign(n_, 0.0);
    cprime_.assign(n_, 0.0);
    inv_.assign(n_, 1.0);
    for (int i = 1; i < n_ - 1; ++i) lower_[i] = -lambda[i];
    // Forward elimination coefficients for rows 0..n-1.
    cprime_[0] = 0.0;  // row 0 is the identity
    inv_[0] = 1.0;
    for (int i = 1; i < n_; ++i) {
      const bool boundary = i == n_ - 1;
      const double a = boundary ? 0.0 : -lambda[i];
      const double b = boundary ? 1.0 : 1.0 + 2.0 * lambda[i];
      const double c = boundary ? 0.0 : -lambda[i];
      const double denom = b - a * cprime_[i - 1];
      inv_[i] = 1.0 / denom;
      cprime_[i] = c * inv_[i];
    }
  }

  void solve(std::vector<double>& rhs) const {
    for (int i = 1; i < n_; ++i) rhs[i] = (rhs[i] - lower_[i] * rhs[i - 1]) * inv_[i];
    for (int i = n_ - 2; i >= 0; --i) rhs[i] -= cprime_[i] * rhs[i + 1];
  }

 private:
  int n_;
  std::vector<double> lower_;
  std::vector<double> cprime_;
  std::vector<double> inv_;
};

void central_gradient(const std::vector<double>& v, double dx, std::vector<double>& g) {
  const int n = static_cast<int>(v.size()) - 1;
  g[0] = (v[1] - v[0]) / dx;
  g[n] = (v[n] - v[n - 1]) / dx;
  for (int i = 1; i < n; ++i) g[i] = (v[i + 1] - v[i - 1]) / (2.0 * dx);
}

// rhs = theta + h (drift * upwind(theta) + cost)
void explicit_part(const std::vector<double>& theta, const std::vector<double>& drift, const std::vector<double>& cost,
                   double h, double dx, std::vector<double>& rhs) {
  const int n = static_cast<int>(theta.size()) - 1;
  for (int i = 0; i <= n; ++i) {
    double grad;
    if (drift[i] > 0.0) {
      grad = i < n ? (theta[i + 1] - theta[i]) / dx : (theta[n] - theta[n - 1]) / dx;
    } else {
      grad = i > 0 ? (theta[i] - theta[i - 1]) / dx : (theta[1] - theta[0]) / dx;
    }
    rhs[i] = theta[i] + h * (drift[i] * grad + cost[i]);
  }
}

void check_cfl(const std::vector<double>& drift, double h, double dx, double t) {
  double amax = 0.0;
  for (double a : drift) {
    if (!std::isfinite(a)) throw NumericalError("solve_hjb_family: non-finite drift");
    amax = std::max(amax, std::abs(a));
  }
  if (amax * h / dx > 1.0 + 1e-12) {
    std::ostringstream os;
    os << "solve_hjb_family: monotonicity bound violated at t=" << t << " (max|a| dt/dx = " << amax * h / dx
       << "); need dt <= " << dx / amax;
    throw NumericalError(os.str());
  }
}

}  // namespace

ValueSurface solve_hjb_family(const ModelSpec& model, const DistributionCurve& mu, const HjbOptions& options) {
  const XDomain dom = options.domain ? *options.domain : default_x_domain(mu);
  return solve_hjb_family(model, mu.grid(), mu.node_moments(model.functionals), dom, options);
}

ValueSurface solve_hjb_family(const ModelSpec& model, const TimeGrid& grid, const std::vector<MomentVector>& law,
                              XDomain domain, const HjbOptions& options) {
  model.validate();
  if (model.dim != 1) throw std::invalid_argument("solve_hjb_family: model dimension must be 1");
  if (std::abs(grid.end() - model.horizon) > 1e-12 * std::max(1.0, model.horizon)) {
    throw std::invalid_argument("solve_hjb_family: curve grid does not end at the model horizon");
  }
  if (static_cast<int>(law.size()) != grid.size()) {
    throw std::invalid_argument("solve_hjb_family: one MomentVector per grid node required");
  }
  if (options.x_steps < 2) throw std::invalid_argument("solve_hjb_family: need at least two x steps");
  if (!(domain.hi > domain.lo)) throw std::invalid_argument("solve_hjb_family: empty x domain");

  const int K = grid.steps();
  const int nx = options.x_steps;
  const int n = nx + 1;
  const int l = model.control_dim;
  const double h = grid.step();
  const int stride = options.theta_stride > 0 ? options.theta_stride : std::max(1, K / 50);
  ValueSurface surface(grid, domain, nx, stride);
  const double dx = surface.dx();
  std::vector<double> xs(n);
  for (int i = 0; i < n; ++i) xs[i] = surface.x(i);

  auto keep_slice = [&](int j, int k) { return j != k && j % stride == 0 && (k % stride == 0 || k == K); };

  std::vector<std::vector<double>> rows(K + 1, std::vector<double>(n));
  for (int j = 0; j <= K; ++j) {
    for (int i = 0; i < n; ++i) rows[j][i] = model.terminal(grid.node(j), {&xs[i], 1}, law[K]);
    if (keep_slice(j, K)) surface.set_slice(j, K, rows[j]);
  }
  for (double v : rows[K])
    if (!std::isfinite(v)) throw NumericalError("solve_hjb_family: non-finite terminal cost");
  surface.set_diag(K, rows[K]);

  std::vector<double> lambda(n), base_drift(n), drift(n), controls(static_cast<std::size_t>(n) * l);
  std::vector<double> pred(n), grad(n), cost(n);
  std::vector<double> tmp1(1), tmp_u(l);

  // u_i = psi(t, x_i, q_i), or the frozen strategy; drift = a1 + a2(u).
  auto fill_controls = [&](double t, const std::vector<double>& q) {
    for (int i = 0; i < n; ++i) {
      VecView u(controls.data() + static_cast<std::size_t>(i) * l, l);
      if (options.frozen_strategy) {
        options.frozen_strategy->evaluate(t, {&xs[i], 1}, u);
      } else {
        eval_psi(model, t, {&xs[i], 1}, {&q[i], 1}, u);
      }
      model.drift_control(t, {&xs[i], 1}, u, tmp1);
      drift[i] = base_drift[i] + tmp1[0];
    }
  };
  auto row_cost = [&](int j, double t, const MomentVector& m, std::vector<double>& out) {
    const double tau = grid.node(j);
    for (int i = 0; i < n; ++i) {
      const ConstVecView u(controls.data() + static_cast<std::size_t>(i) * l, l);
      out[i] = model.running_state(tau, t, {&xs[i], 1}, m) + model.running_control(tau, t, {&xs[i], 1}, u);
    }
  };

  for (int k = K - 1; k >= 0; --k) {
    const double t = grid.node(k);
    const MomentVector& m = law[k];
    for (int i = 0; i < n; ++i) {
      model.diffusion(t, {&xs[i], 1}, m, tmp1);
      if (!(std::abs(tmp1[0]) > 1e-12)) {
        std::ostringstream os;
        os << "solve_hjb_family: diffusion vanishes at t=" << t << ", x=" << xs[i]
           << "; degenerate problems must use the Riccati path";
        throw NumericalError(os.str());
      }
      lambda[i] = 0.5 * h * tmp1[0] * tmp1[0] / (dx * dx);
      model.drift_state(t, {&xs[i], 1}, m, tmp1);
      base_drift[i] = tmp1[0];
    }
    const ImplicitDiffusion solver(lambda);

    // Predictor for the diagonal row with the lagged gradient.
    std::vector<double> lagged(n);
    for (int i = 0; i < n; ++i) lagged[i] = surface.diag_grad(k + 1, i);
    fill_controls(t, lagged);
    check_cfl(drift, h, dx, t);
    row_cost(k, t, m, cost);
    explicit_part(rows[k], drift, cost, h, dx, pred);
    solver.solve(pred);
    central_gradient(pred, dx, grad);

    // Corrector: all rows with the predicted diagonal gradient.
    fill_controls(t, grad);
    check_cfl(drift, h, dx, t);
    parallel_for(k + 1, options.workers, [&](int begin, int end) {
      std::vector<double> c(n), rhs(n);
      for (int j = begin; j < end; ++j) {
        row_cost(j, t, m, c);
        explicit_part(rows[j], drift, c, h, dx, rhs);
        solver.solve(rhs);
        rows[j].swap(rhs);
      }
    });

    for (int j = 0; j <= k; ++j) {
      for (double v : rows[j]) {
        if (!std::isfinite(v)) {
          std::ostringstream os;
          os << "solve_hjb_family: non-finite value at tau=" << grid.node(j) << ", t=" << t;
          throw NumericalError(os.str());
        }
      }
      if (keep_slice(j, k)) surface.set_slice(j, k, rows[j]);
    }
    surface.set_diag(k, rows[k]);
  }
  return surface;
}

std::shared_ptr<GridStrategy> extract_strategy_grid(const ValueSurface& surface, const ModelSpec& model) {
  const TimeGrid& grid = surface.grid();
  const int n = surface.x_steps() + 1;
  const int l = model.control_dim;
  std::vector<double> values(static_cast<std::size_t>(grid.size()) * n * l);
  for (int k = 0; k < grid.size(); ++k) {
    for (int i = 0; i < n; ++i) {
      const double x = surface.x(i);
      const double q = surface.diag_grad(k, i);
      eval_psi(model, grid.node(k), {&x, 1}, {&q, 1},
               {values.data() + (static_cast<std::size_t>(k) * n + i) * l, static_cast<std::size_t>(l)});
    }
  }
  return std::make_shared<GridStrategy>(grid, surface.domain().lo, surface.domain().hi, surface.x_steps(), l,
                                        std::move(values));
}

RegularityReport regularity_report(const ValueSurface& surface) {
  RegularityReport r;
  const int nx = surface.x_steps();
  const double dx = surface.dx();
  const double s0 = std::clamp((0.0 - surface.domain().lo) / dx, 0.0, static_cast<double>(nx));
  const int i0 = std::min(static_cast<int>(s0), nx - 1);
  const double w = s0 - i0;
  for (int k = 0; k < surface.grid().size(); ++k) {
    const double g0 = (1.0 - w) * surface.diag_grad(k, i0) + w * surface.diag_grad(k, i0 + 1);
    r.grad_at_zero = std::max(r.grad_at_zero, std::abs(g0));
    for (int i = 1; i < nx; ++i) {
      const double d2 = (surface.diag(k, i + 1) - 2.0 * surface.diag(k, i) + surface.diag(k, i - 1)) / (dx * dx);
      r.second_derivative = std::max(r.second_derivative, std::abs(d2));
    }
    for (int i = 0; i < nx; ++i) {
      r.grad_lipschitz =
          std::max(r.grad_lipschitz, std::abs(surface.diag_grad(k, i + 1) - surface.diag_grad(k, i)) / dx);
    }
  }
  return r;
}

}  // namespace ticmkv
