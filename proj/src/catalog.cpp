#include <cmath>
#include <set>
#include <stdexcept>

#include "ticmkv/model.hpp"

namespace ticmkv {

namespace {

class Params {
 public:
  Params(const std::string& model, const CatalogParams& given, std::set<std::string> known)
      : model_(model), given_(given) {
    for (const auto& [key, value] : given_) {
      if (!known.count(key)) throw std::invalid_argument("catalog '" + model + "': unknown parameter '" + key + "'");
      if (!std::isfinite(value)) throw std::invalid_argument("catalog '" + model + "': parameter '" + key + "' is not finite");
    }
  }

  double get(const std::string& key, double fallback) const {
    const auto it = given_.find(key);
    return it == given_.end() ? fallback : it->second;
  }

  double positive(const std::string& key, double fallback) const {
    const double v = get(key, fallback);
    if (!(v > 0.0)) throw std::invalid_argument("catalog '" + model_ + "': parameter '" + key + "' must be positive");
    return v;
  }

  double nonnegative(const std::string& key, double fallback) const {
    const double v = get(key, fallback);
    if (v < 0.0) throw std::invalid_argument("catalog '" + model_ + "': parameter '" + key + "' must be nonnegative");
    return v;
  }

  int dimension(const std::string& key) const {
    const double v = get(key, 1.0);
    if (v < 1.0 || v != std::floor(v) || v > 64.0) {
      throw std::invalid_argument("catalog '" + model_ + "': parameter '" + key + "' must be an integer in [1, 64]");
    }
    return static_cast<int>(v);
  }

 private:
  std::string model_;
  CatalogParams given_;
};

Mat scalar_mat(double v) { return Mat::Constant(1, 1, v); }

// Hyperbolic discount 1 / (1 + k s).
double hyperbolic(double k, double s) { return 1.0 / (1.0 + k * s); }

LqModelSpec time_consistent_baseline(const CatalogParams& given) {
  const Params p("time_consistent_baseline", given, {"A", "B", "Q", "R", "g", "T", "sigma", "c", "F", "H"});
  const double A = p.get("A", 0.0);
  const double B = p.get("B", 1.0);
  const double Q = p.nonnegative("Q", 0.0);
  const double R = p.positive("R", 1.0);
  const double g = p.nonnegative("g", 1.0);
  const double sigma = p.get("sigma", 1.0);
  const double c = p.get("c", 0.0);
  const double F = p.nonnegative("F", 0.0);
  const double H = p.nonnegative("H", 0.0);
  LqModelSpec lq;
  lq.name = "time_consistent_baseline";
  lq.horizon = p.positive("T", 1.0);
  lq.A = [A](double) { return scalar_mat(A); };
  lq.B = [B](double) { return scalar_mat(B); };
  lq.a = [c](double, const MomentVector& m) { return Vec::Constant(1, c * m.mean[0]); };
  lq.b = [sigma](double, const MomentVector&) { return Vec::Constant(1, sigma); };
  lq.Q = [Q](double, double) { return scalar_mat(Q); };
  lq.R = [R](double, double) { return scalar_mat(R); };
  lq.G = [g](double) { return scalar_mat(g); };
  lq.F = [F](double, double, const MomentVector&) { return F; };
  lq.H = [H](double, const MomentVector&) { return H; };
  lq.measure_dependent = c != 0.0;
  return lq;
}

LqModelSpec dissipative_meanfield(const CatalogParams& given) {
  const Params p("dissipative_meanfield", given,
                 {"dim", "L0", "A0", "c", "sigma", "Q0", "R0", "G0", "k", "T", "F_var", "H_var"});
  const int d = p.dimension("dim");
  const double L0 = p.get("L0", 10.0);
  if (!(L0 > 0.0)) throw std::invalid_argument("catalog 'dissipative_meanfield': L0 must be positive");
  const double A0 = p.get("A0", 0.0);
  const double c = p.get("c", 0.5);
  const double sigma = p.get("sigma", 1.0);
  const double Q0 = p.positive("Q0", 10.0);
  const double R0 = p.positive("R0", 1.0);
  const double G0 = p.nonnegative("G0", 1.0);
  const double k = p.nonnegative("k", 1.0);
  const double T = p.positive("T", 1.0);
  const double F_var = p.nonnegative("F_var", 0.0);
  const double H_var = p.nonnegative("H_var", 0.0);
  LqModelSpec lq;
  lq.name = "dissipative_meanfield";
  lq.dim = d;
  lq.control_dim = d;
  lq.horizon = T;
  lq.L0 = L0;
  const Mat I = Mat::Identity(d, d);
  lq.A = [I, L0, A0](double) -> Mat { return (A0 - L0) * I; };
  lq.B = [I](double) -> Mat { return I; };
  lq.a = [c](double, const MomentVector& m) -> Vec { return c * m.mean; };
  lq.b = [sigma, d](double, const MomentVector&) -> Vec { return Vec::Constant(d, sigma); };
  lq.Q = [I, Q0, k](double tau, double t) -> Mat { return hyperbolic(k, t - tau) * Q0 * I; };
  lq.R = [I, R0, k](double tau, double t) -> Mat { return hyperbolic(k, t - tau) * R0 * I; };
  lq.G = [I, G0, k, T](double tau) -> Mat { return hyperbolic(k, T - tau) * G0 * I; };
  lq.F = [F_var, k](double tau, double t, const MomentVector& m) {
    return F_var * hyperbolic(k, t - tau) * std::max(0.0, m.variance());
  };
  lq.H = [H_var, k, T](double tau, const MomentVector& m) {
    return H_var * hyperbolic(k, T - tau) * std::max(0.0, m.variance());
  };
  lq.measure_dependent = c != 0.0 || F_var != 0.0 || H_var != 0.0;
  return lq;
}

LqModelSpec tau_weighted_terminal(const CatalogParams& given) {
  const Params p("tau_weighted_terminal", given, {"A", "B", "Q", "R", "g", "T", "sigma", "c"});
  const double A = p.get("A", 0.0);
  const double B = p.get("B", 1.0);
  const double Q = p.nonnegative("Q", 1.0);
  const double R = p.positive("R", 1.0);
  const double g = p.nonnegative("g", 1.0);
  const double T = p.positive("T", 1.0);
  const double sigma = p.get("sigma", 1.0);
  const double c = p.get("c", 0.5);
  LqModelSpec lq;
  lq.name = "tau_weighted_terminal";
  lq.horizon = T;
  lq.A = [A](double) { return scalar_mat(A); };
  lq.B = [B](double) { return scalar_mat(B); };
  lq.a = [c](double, const MomentVector& m) { return Vec::Constant(1, c * m.mean[0]); };
  lq.b = [sigma](double, const MomentVector&) { return Vec::Constant(1, sigma); };
  lq.Q = [Q](double tau, double t) { return scalar_mat(Q * std::exp(-(t - tau))); };
  lq.R = [R](double, double) { return scalar_mat(R); };
  lq.G = [g, T](double tau) { return scalar_mat(std::exp(-(T - tau)) * g); };
  lq.F = [](double, double, const MomentVector&) { return 0.0; };
  lq.H = [](double, const MomentVector&) { return 0.0; };
  lq.measure_dependent = c != 0.0;
  return lq;
}

ModelSpec scalar_quadratic_model(const std::string& name, double q0, double r, double g0, double k, double T) {
  ModelSpec m;
  m.name = name;
  m.horizon = T;
  m.running_state = [q0, k](double tau, double t, ConstVecView x, const MomentVector&) {
    return q0 * hyperbolic(k, t - tau) * x[0] * x[0];
  };
  m.running_control = [r, k](double tau, double t, ConstVecView, ConstVecView v) {
    return r * hyperbolic(k, t - tau) * v[0] * v[0];
  };
  m.terminal = [g0, k, T](double tau, ConstVecView x, const MomentVector&) {
    return g0 * hyperbolic(k, T - tau) * x[0] * x[0];
  };
  m.psi = [r](double, ConstVecView, ConstVecView q, VecView out) { out[0] = -q[0] / (2.0 * r); };
  m.beta_psi = 1.0 / (2.0 * r);
  m.control_grid = {Vec::Constant(1, -10.0), Vec::Constant(1, 10.0), 201};
  return m;
}

ModelSpec brownian(const CatalogParams& given) {
  const Params p("brownian", given, {"drift", "sigma", "T"});
  const double drift = p.get("drift", 0.0);
  const double sigma = p.get("sigma", 1.0);
  ModelSpec m = scalar_quadratic_model("brownian", 0.0, 1.0, 0.0, 0.0, p.positive("T", 1.0));
  m.drift_state = [drift](double, ConstVecView, const MomentVector&, VecView out) { out[0] = drift; };
  m.drift_control = [](double, ConstVecView, ConstVecView, VecView out) { out[0] = 0.0; };
  m.diffusion = [sigma](double, ConstVecView, const MomentVector&, VecView out) { out[0] = sigma; };
  m.psi = [](double, ConstVecView, ConstVecView, VecView out) { out[0] = 0.0; };
  m.kappa0 = 0.0;
  m.beta_psi = 0.0;
  m.measure_dependent = false;
  return m;
}

ModelSpec ou_meanfield(const CatalogParams& given) {
  const Params p("ou_meanfield", given, {"theta", "c", "sigma", "q0", "r", "g0", "k", "T"});
  const double theta = p.get("theta", 1.0);
  const double c = p.get("c", 0.0);
  const double sigma = p.get("sigma", 1.0);
  ModelSpec m = scalar_quadratic_model("ou_meanfield", p.nonnegative("q0", 0.0), p.positive("r", 1.0),
                                       p.nonnegative("g0", 0.0), p.nonnegative("k", 0.0), p.positive("T", 1.0));
  m.drift_state = [theta, c](double, ConstVecView x, const MomentVector& mv, VecView out) {
    out[0] = -theta * x[0] + c * mv.mean[0];
  };
  m.drift_control = [](double, ConstVecView, ConstVecView v, VecView out) { out[0] = v[0]; };
  m.diffusion = [sigma](double, ConstVecView, const MomentVector&, VecView out) { out[0] = sigma; };
  m.kappa0 = std::max(std::abs(theta), 1.0);
  m.measure_dependent = c != 0.0;
  return m;
}

ModelSpec nonlinear_controlled(const CatalogParams& given) {
  const Params p("nonlinear_controlled", given,
                 {"theta", "alpha", "c", "sigma", "q0", "r", "g0", "k", "T", "grid_psi"});
  const double theta = p.get("theta", 1.0);
  const double alpha = p.get("alpha", 0.5);
  const double c = p.get("c", 0.3);
  const double sigma = p.positive("sigma", 1.0);
  ModelSpec m = scalar_quadratic_model("nonlinear_controlled", p.nonnegative("q0", 1.0), p.positive("r", 1.0),
                                       p.nonnegative("g0", 1.0), p.nonnegative("k", 1.0), p.positive("T", 1.0));
  m.drift_state = [theta, alpha, c](double, ConstVecView x, const MomentVector& mv, VecView out) {
    out[0] = -theta * x[0] + alpha * std::sin(x[0]) + c * mv.mean[0];
  };
  m.drift_control = [](double, ConstVecView, ConstVecView v, VecView out) { out[0] = v[0]; };
  m.diffusion = [sigma](double, ConstVecView, const MomentVector&, VecView out) { out[0] = sigma; };
  m.kappa0 = std::max(std::abs(theta) + std::abs(alpha), 1.0);
  m.measure_dependent = c != 0.0;
  if (p.get("grid_psi", 0.0) != 0.0) m.psi = nullptr;
  return m;
}

}  // namespace

std::vector<std::string> lq_catalog_names() {
  return {"time_consistent_baseline", "dissipative_meanfield", "tau_weighted_terminal"};
}

std::vector<std::string> general_catalog_names() { return {"brownian", "ou_meanfield", "nonlinear_controlled"}; }

LqModelSpec build_lq_catalog(const std::string& name, const CatalogParams& params) {
  if (name == "time_consistent_baseline") return time_consistent_baseline(params);
  if (name == "dissipative_meanfield") return dissipative_meanfield(params);
  if (name == "tau_weighted_terminal") return tau_weighted_terminal(params);
  throw std::invalid_argument("unknown LQ catalog model '" + name + "'");
}

ModelSpec build_general_catalog(const std::string& name, const CatalogParams& params) {
  if (name == "brownian") return brownian(params);
  if (name == "ou_meanfield") return ou_meanfield(params);
  if (name == "nonlinear_controlled") return nonlinear_controlled(params);
  throw std::invalid_argument("unknown general catalog model '" + name + "'");
}

}  // namespace ticmkv
