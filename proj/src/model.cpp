#include "ticmkv/model.hpp"

#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <sstream>
#include <stdexcept>

#include "ticmkv/rng.hpp"

namespace ticmkv {

void ModelSpec::validate() const {
  if (dim < 1 || control_dim < 1) throw std::invalid_argument("ModelSpec '" + name + "': dimensions must be positive");
  if (!(horizon > 0.0)) throw std::invalid_argument("ModelSpec '" + name + "': horizon must be positive");
  if (!drift_state || !drift_control || !diffusion || !running_state || !running_control || !terminal) {
    throw std::invalid_argument("ModelSpec '" + name + "': missing coefficient callable");
  }
  if (!psi) {
    if (control_grid.points < 1) throw std::invalid_argument("ModelSpec '" + name + "': empty control grid");
    if (control_grid.lower.size() != control_dim || control_grid.upper.size() != control_dim) {
      throw std::invalid_argument("ModelSpec '" + name + "': control grid box has wrong dimension");
    }
  }
}

namespace {

void check_symmetric(const Mat& m, const std::string& what, double t) {
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
    std::ostringstream os;
    os << what << " is not symmetric at t=" << t;
    throw std::invalid_argument(os.str());
  }
}

}  // namespace

void LqModelSpec::validate(const TimeGrid& grid) const {
  if (!A || !B || !a || !b || !Q || !R || !G || !F || !H) {
    throw std::invalid_argument("LqModelSpec '" + name + "': missing coefficient");
  }
  MomentVector zero;
  zero.mean = Vec::Zero(dim);
  zero.generalized.assign(functionals.size(), 0.0);
  for (int k = 0; k < grid.size(); ++k) {
    const double t = grid.node(k);
    if (A(t).rows() != dim || A(t).cols() != dim) throw std::invalid_argument("LqModelSpec: A has wrong shape");
    if (B(t).rows() != dim || B(t).cols() != control_dim) throw std::invalid_argument("LqModelSpec: B has wrong shape");
    if (a(t, zero).size() != dim || b(t, zero).size() != dim) {
      throw std::invalid_argument("LqModelSpec: a or b has wrong length");
    }
    const Mat r = R(t, t);
    check_symmetric(r, "R(t;t)", t);
    check_symmetric(Q(t, t), "Q(t;t)", t);
    const Mat g = G(t);
    check_symmetric(g, "G(tau)", t);
    Eigen::SelfAdjointEigenSolver<Mat> er(r);
    if (er.eigenvalues().minCoeff() <= 0.0) {
      std::ostringstream os;
      os << "LqModelSpec: R(t;t) is not positive definite at t=" << t;
      throw std::invalid_argument(os.str());
    }
    Eigen::SelfAdjointEigenSolver<Mat> eg(g);
    if (eg.eigenvalues().minCoeff() < -1e-12) {
      std::ostringstream os;
      os << "LqModelSpec: G(tau) is not positive semidefinite at tau=" << t;
      throw std::invalid_argument(os.str());
    }
  }
}

void eval_psi(const ModelSpec& model, double t, ConstVecView x, ConstVecView q, VecView out) {
  if (model.psi) {
    model.psi(t, x, q, out);
    return;
  }
  const ControlGrid& cg = model.control_grid;
  const int l = model.control_dim;
  if (cg.points < 1) throw std::invalid_argument("eval_psi: empty control grid");
  std::vector<double> v(l), best(l), a2(model.dim);
  std::vector<int> index(l, 0);
  double best_value = std::numeric_limits<double>::infinity();
  bool found = false;
  while (true) {
    for (int j = 0; j < l; ++j) {
      v[j] = cg.points == 1 ? cg.lower[j]
                            : cg.lower[j] + (cg.upper[j] - cg.lower[j]) * index[j] / (cg.points - 1);
    }
    model.drift_control(t, x, v, a2);
    double value = model.running_control(t, t, x, v);
    for (int i = 0; i < model.dim; ++i) value += q[i] * a2[i];
    if (!std::isfinite(value)) throw NumericalError("eval_psi: non-finite objective on the control grid");
    if (value < best_value) {  // strict: the first (smallest) index wins ties
      best_value = value;
      best = v;
      found = true;
    }
    int j = 0;
    while (j < l && ++index[j] == cg.points) index[j++] = 0;
    if (j == l) break;
  }
  if (!found) throw NumericalError("eval_psi: no finite objective value");
  for (int j = 0; j < l; ++j) out[j] = best[j];
}

Vec eval_psi(const ModelSpec& model, double t, ConstVecView x, ConstVecView q) {
  Vec out(model.control_dim);
  eval_psi(model, t, x, q, {out.data(), static_cast<std::size_t>(out.size())});
  return out;
}

namespace {

bool same_moments(const MomentVector& a, const MomentVector& b) {
  return a.second_moment == b.second_moment && a.mean.size() == b.mean.size() && a.mean == b.mean &&
         a.generalized == b.generalized;
}

// Last value of one LQ coefficient per thread. Simulations sweep all
// particles at one time node before moving on, so this turns the per-path
// matrix evaluations into one evaluation per node.
template <class V>
struct Memo {
  std::uint64_t id = 0;
  double k1 = std::numeric_limits<double>::quiet_NaN();
  double k2 = std::numeric_limits<double>::quiet_NaN();
  MomentVector m;
  bool has_m = false;
  V value{};

  template <class Fn>
  const V& get(std::uint64_t owner, double a, double b, Fn&& fn) {
    if (id != owner || k1 != a || k2 != b || has_m) {
      value = fn();
      id = owner;
      k1 = a;
      k2 = b;
      has_m = false;
    }
    return value;
  }
  template <class Fn>
  const V& get(std::uint64_t owner, double a, double b, const MomentVector& mv, Fn&& fn) {
    if (id != owner || k1 != a || k2 != b || !has_m || !same_moments(m, mv)) {
      value = fn();
      id = owner;
      k1 = a;
      k2 = b;
      m = mv;
      has_m = true;
    }
    return value;
  }
};

std::uint64_t next_model_id() {
  static std::atomic<std::uint64_t> counter{0};
  return ++counter;
}

}  // namespace

ModelSpec as_general(const LqModelSpec& lq_in) {
  auto lq = std::make_shared<const LqModelSpec>(lq_in);
  const std::uint64_t id = next_model_id();
  ModelSpec m;
  m.name = lq->name;
  m.dim = lq->dim;
  m.control_dim = lq->control_dim;
  m.horizon = lq->horizon;
  m.functionals = lq->functionals;
  m.measure_dependent = lq->measure_dependent;
  const int d = lq->dim;
  const int l = lq->control_dim;
  m.drift_state = [lq, d, id](double t, ConstVecView x, const MomentVector& mv, VecView out) {
    thread_local Memo<Mat> A;
    thread_local Memo<Vec> a;
    const Mat& Am = A.get(id, t, 0.0, [&] { return lq->A(t); });
    const Vec& av = a.get(id, t, 0.0, mv, [&] { return lq->a(t, mv); });
    for (int r = 0; r < d; ++r) {
      double s = av[r];
      for (int c = 0; c < d; ++c) s += Am(r, c) * x[c];
      out[r] = s;
    }
  };
  m.drift_control = [lq, d, l, id](double t, ConstVecView, ConstVecView v, VecView out) {
    thread_local Memo<Mat> B;
    const Mat& Bm = B.get(id, t, 0.0, [&] { return lq->B(t); });
    for (int r = 0; r < d; ++r) {
      double s = 0.0;
      for (int c = 0; c < l; ++c) s += Bm(r, c) * v[c];
      out[r] = s;
    }
  };
  m.diffusion = [lq, d, id](double t, ConstVecView, const MomentVector& mv, VecView out) {
    thread_local Memo<Vec> b;
    const Vec& bv = b.get(id, t, 0.0, mv, [&] { return lq->b(t, mv); });
    for (int r = 0; r < d; ++r) out[r] = bv[r];
  };
  m.running_state = [lq, d, id](double tau, double t, ConstVecView x, const MomentVector& mv) {
    thread_local Memo<Mat> Q;
    thread_local Memo<double> F;
    const Mat& Qm = Q.get(id, tau, t, [&] { return lq->Q(tau, t); });
    double s = F.get(id, tau, t, mv, [&] { return lq->F(tau, t, mv); });
    for (int r = 0; r < d; ++r)
      for (int c = 0; c < d; ++c) s += x[r] * Qm(r, c) * x[c];
    return s;
  };
  m.running_control = [lq, l, id](double tau, double t, ConstVecView, ConstVecView v) {
    thread_local Memo<Mat> R;
    const Mat& Rm = R.get(id, tau, t, [&] { return lq->R(tau, t); });
    double s = 0.0;
    for (int r = 0; r < l; ++r)
      for (int c = 0; c < l; ++c) s += v[r] * Rm(r, c) * v[c];
    return s;
  };
  m.terminal = [lq, d, id](double tau, ConstVecView x, const MomentVector& mv) {
    thread_local Memo<Mat> G;
    thread_local Memo<double> H;
    const Mat& Gm = G.get(id, tau, 0.0, [&] { return lq->G(tau); });
    double s = H.get(id, tau, 0.0, mv, [&] { return lq->H(tau, mv); });
    for (int r = 0; r < d; ++r)
      for (int c = 0; c < d; ++c) s += x[r] * Gm(r, c) * x[c];
    return s;
  };
  m.psi = [lq, d, l](double t, ConstVecView, ConstVecView q, VecView out) {
    const Vec rhs = lq->B(t).transpose() * Eigen::Map<const Vec>(q.data(), d);
    Eigen::Map<Vec>(out.data(), l) = -0.5 * lq->R(t, t).llt().solve(rhs);
  };
  return m;
}

LipschitzReport lipschitz_probe(const ModelSpec& model, int n_samples, double box, std::uint64_t seed) {
  if (!std::isfinite(box) || box <= 0.0) throw std::invalid_argument("lipschitz_probe: box must be finite and positive");
  const int d = model.dim;
  const int l = model.control_dim;
  const CounterRng rng(seed);
  std::uint32_t draw = 0;
  auto uniform_box = [&](std::vector<double>& v) {
    for (std::size_t j = 0; j < v.size(); j += 2) {
      const auto u = rng.uniforms(draw, static_cast<std::uint32_t>(j / 2), CounterRng::kUniform);
      v[j] = box * (2.0 * u[0] - 1.0);
      if (j + 1 < v.size()) v[j + 1] = box * (2.0 * u[1] - 1.0);
    }
    ++draw;
  };
  MomentVector m;
  m.mean = Vec::Zero(d);
  m.second_moment = 1.0;
  m.generalized.assign(model.functionals.size(), 0.0);
  auto norm_diff = [](const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
  };
  LipschitzReport report;
  std::vector<double> x1(d), x2(d), v1(l), v2(l), q1(d), q2(d), tv(1);
  std::vector<double> a1(d), a2(d), c1(d), c2(d), u1(l), u2(l);
  for (int s = 0; s < n_samples; ++s) {
    uniform_box(tv);
    const double t = model.horizon * 0.5 * (tv[0] / box + 1.0);
    uniform_box(x1);
    uniform_box(x2);
    uniform_box(v1);
    uniform_box(v2);
    uniform_box(q1);
    uniform_box(q2);
    const double dx = norm_diff(x1, x2);
    const double dv = norm_diff(v1, v2);
    if (dx > 0.0) {
      model.drift_state(t, x1, m, a1);
      model.drift_control(t, x1, v1, c1);
      model.drift_state(t, x2, m, a2);
      model.drift_control(t, x2, v1, c2);
      for (int i = 0; i < d; ++i) {
        a1[i] += c1[i];
        a2[i] += c2[i];
      }
      report.drift_x = std::max(report.drift_x, norm_diff(a1, a2) / dx);
      model.diffusion(t, x1, m, a1);
      model.diffusion(t, x2, m, a2);
      report.diffusion_x = std::max(report.diffusion_x, norm_diff(a1, a2) / dx);
    }
    if (dv > 0.0) {
      model.drift_control(t, x1, v1, c1);
      model.drift_control(t, x1, v2, c2);
      report.drift_v = std::max(report.drift_v, norm_diff(c1, c2) / dv);
    }
    const double dz = dx + norm_diff(q1, q2);
    if (dz > 0.0) {
      eval_psi(model, t, x1, q1, u1);
      eval_psi(model, t, x2, q2, u2);
      report.psi = std::max(report.psi, norm_diff(u1, u2) / dz);
    }
  }
  auto check = [&](double observed, const std::optional<double>& declared, const char* what) {
    if (declared && observed > 1.1 * *declared) {
      std::ostringstream os;
      os << what << " ratio " << observed << " exceeds declared constant " << *declared;
      report.warnings.push_back(os.str());
    }
  };
  check(report.drift_x, model.kappa0, "drift (x)");
  check(report.drift_v, model.kappa0, "drift (v)");
  check(report.diffusion_x, model.kappa0, "diffusion (x)");
  check(report.psi, model.beta_psi, "psi");
  return report;
}

}  // namespace ticmkv
