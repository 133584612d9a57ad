#include "ticmkv/simulate.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "ticmkv/parallel.hpp"

namespace ticmkv {

InitialLaw InitialLaw::gaussian(Vec mean, Vec sd) {
  if (mean.size() != sd.size() || mean.size() == 0) throw std::invalid_argument("InitialLaw: mean/sd size mismatch");
  if ((sd.array() < 0.0).any()) throw std::invalid_argument("InitialLaw: negative standard deviation");
  InitialLaw law;
  law.kind_ = Kind::gaussian;
  law.mean_ = std::move(mean);
  law.sd_ = std::move(sd);
  return law;
}

InitialLaw InitialLaw::dirac(Vec point) {
  if (point.size() == 0) throw std::invalid_argument("InitialLaw: empty point");
  InitialLaw law;
  law.kind_ = Kind::dirac;
  law.mean_ = std::move(point);
  law.sd_ = Vec::Zero(law.mean_.size());
  return law;
}

InitialLaw InitialLaw::from_cloud(EmpiricalMeasure cloud) {
  InitialLaw law;
  law.kind_ = Kind::cloud;
  law.cloud_ = std::move(cloud);
  return law;
}

int InitialLaw::dim() const { return kind_ == Kind::cloud ? cloud_.dim() : static_cast<int>(mean_.size()); }

void InitialLaw::sample(const CounterRng& rng, int i, VecView out) const {
  const int d = dim();
  switch (kind_) {
    case Kind::dirac:
      for (int j = 0; j < d; ++j) out[j] = mean_[j];
      return;
    case Kind::gaussian:
      for (int j = 0; j < d; j += 2) {
        const auto z = rng.normals(static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j / 2),
                                   CounterRng::kInitial);
        out[j] = mean_[j] + sd_[j] * z[0];
        if (j + 1 < d) out[j + 1] = mean_[j + 1] + sd_[j + 1] * z[1];
      }
      return;
    case Kind::cloud: {
      const auto p = cloud_.point(i % cloud_.count());
      for (int j = 0; j < d; ++j) out[j] = p[j];
      return;
    }
  }
}

EmpiricalMeasure InitialLaw::sample_cloud(std::uint64_t seed, int n) const {
  const int d = dim();
  const CounterRng rng(seed);
  std::vector<double> coords(static_cast<std::size_t>(n) * d);
  for (int i = 0; i < n; ++i) sample(rng, i, {coords.data() + static_cast<std::size_t>(i) * d, static_cast<std::size_t>(d)});
  return EmpiricalMeasure(d, std::move(coords));
}

double InitialLaw::second_moment() const {
  switch (kind_) {
    case Kind::dirac: return mean_.squaredNorm();
    case Kind::gaussian: return mean_.squaredNorm() + sd_.squaredNorm();
    case Kind::cloud: return moments(cloud_).second_moment;
  }
  return 0.0;
}

std::string InitialLaw::describe() const {
  std::ostringstream os;
  switch (kind_) {
    case Kind::dirac: os << "dirac(" << mean_.transpose() << ")"; break;
    case Kind::gaussian: os << "gaussian(mean=" << mean_.transpose() << ", sd=" << sd_.transpose() << ")"; break;
    case Kind::cloud: os << "cloud(N=" << cloud_.count() << ")"; break;
  }
  return os.str();
}

namespace {

enum class LawSource { empirical, given, leave_one_out };

void check_grid(const ModelSpec& model, const SimOptions& opts) {
  if (opts.n_particles < 2) throw std::invalid_argument("simulate: need at least two particles");
  if (std::abs(opts.grid.end() - model.horizon) > 1e-12 * std::max(1.0, model.horizon)) {
    throw std::invalid_argument("simulate: grid does not end at the model horizon");
  }
}

MomentVector leave_one_out(const MomentVector& full, int n, ConstVecView x,
                           const std::vector<MomentFunctional>& functionals) {
  MomentVector m;
  const double scale = 1.0 / (n - 1);
  m.mean = full.mean * (static_cast<double>(n) * scale);
  double sq = 0.0;
  for (int j = 0; j < static_cast<int>(x.size()); ++j) {
    m.mean[j] -= x[j] * scale;
    sq += x[j] * x[j];
  }
  m.second_moment = (full.second_moment * n - sq) * scale;
  m.generalized.resize(full.generalized.size());
  for (std::size_t f = 0; f < functionals.size(); ++f) {
    m.generalized[f] = (full.generalized[f] * n - functionals[f].phi(x)) * scale;
  }
  return m;
}

// Noise of path i at step k. Steps 2j and 2j+1 share one Box-Muller pair,
// drawn at step-counter j; `spare` carries the second half to the odd step.
inline double step_noise(const CounterRng& rng, int i, int k, double& spare, bool have_spare) {
  if (k % 2 == 1 && have_spare) return spare;
  const auto z = rng.normals(static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(k / 2), CounterRng::kNoise);
  spare = z[1];
  return z[k % 2];
}

ParticlePaths propagate(const ModelSpec& model, const FeedbackStrategy& strategy, const InitialLaw& init,
                        const SimOptions& opts, LawSource source, const std::vector<MomentVector>* law) {
  model.validate();
  check_grid(model, opts);
  if (init.dim() != model.dim) throw std::invalid_argument("simulate: initial law dimension mismatch");
  const int n = opts.n_particles;
  const int d = model.dim;
  const int l = model.control_dim;
  const TimeGrid& grid = opts.grid;
  const int K = grid.steps();
  const double h = grid.step();
  const double sqrt_h = std::sqrt(h);
  const CounterRng rng(opts.seed);
  const std::size_t row = static_cast<std::size_t>(n) * d;

  std::vector<std::vector<double>> nodes(K + 1, std::vector<double>(row));
  std::vector<double> spare(n, 0.0);
  parallel_for(n, opts.workers, [&](int begin, int end) {
    for (int i = begin; i < end; ++i) {
      init.sample(rng, i, {nodes[0].data() + static_cast<std::size_t>(i) * d, static_cast<std::size_t>(d)});
    }
  });

  for (int k = 0; k < K; ++k) {
    const double t = grid.node(k);
    const std::vector<double>& cur = nodes[k];
    std::vector<double>& next = nodes[k + 1];
    MomentVector shared;
    if (source == LawSource::given) {
      shared = (*law)[k];
    } else {
      shared = moments(EmpiricalMeasure(d, cur), model.functionals);
    }
    parallel_for(n, opts.workers, [&](int begin, int end) {
      std::vector<double> a1(d), a2(d), b(d), u(l);
      for (int i = begin; i < end; ++i) {
        const ConstVecView x(cur.data() + static_cast<std::size_t>(i) * d, d);
        MomentVector own;
        const MomentVector* m = &shared;
        if (source == LawSource::leave_one_out) {
          own = leave_one_out(shared, n, x, model.functionals);
          m = &own;
        }
        strategy.evaluate(t, x, u);
        model.drift_state(t, x, *m, a1);
        model.drift_control(t, x, u, a2);
        model.diffusion(t, x, *m, b);
        const double z = step_noise(rng, i, k, spare[i], true);
        double* out = next.data() + static_cast<std::size_t>(i) * d;
        for (int j = 0; j < d; ++j) out[j] = x[j] + (a1[j] + a2[j]) * h + b[j] * sqrt_h * z;
      }
    });
    for (double v : next) {
      if (!std::isfinite(v) || std::abs(v) > 1e8) {
        std::ostringstream os;
        os << "simulate: particle blow-up (|X| > 1e8 or non-finite) at t=" << grid.node(k + 1);
        throw NumericalError(os.str());
      }
    }
  }

  std::vector<EmpiricalMeasure> measures;
  measures.reserve(K + 1);
  for (auto& v : nodes) measures.emplace_back(d, std::move(v));
  ParticlePaths paths;
  paths.curve = DistributionCurve(grid, std::move(measures));
  paths.seed = opts.seed;
  paths.strategy_id = strategy.kind();
  return paths;
}

}  // namespace

ParticlePaths simulate_t1(const ModelSpec& model, const FeedbackStrategy& strategy, const InitialLaw& init,
                          const SimOptions& opts) {
  return propagate(model, strategy, init, opts, LawSource::empirical, nullptr);
}

ParticlePaths simulate_given_law(const ModelSpec& model, const FeedbackStrategy& strategy,
                                 const InitialLaw& init, const std::vector<MomentVector>& law,
                                 const SimOptions& opts) {
  if (static_cast<int>(law.size()) != opts.grid.size()) {
    throw std::invalid_argument("simulate_given_law: one MomentVector per grid node required");
  }
  return propagate(model, strategy, init, opts, LawSource::given, &law);
}

ParticlePaths simulate_n_player(const ModelSpec& model, const FeedbackStrategy& strategy, const InitialLaw& init,
                                const SimOptions& opts) {
  return propagate(model, strategy, init, opts, LawSource::leave_one_out, nullptr);
}

std::vector<double> CostSamples::total() const {
  std::vector<double> out(running.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = running[i] + terminal[i];
  return out;
}

CostSamples simulate_frozen(const ModelSpec& model, const FeedbackStrategy& control,
                            const DistributionCurve& frozen_curve, double t0, ConstVecView x0, double tau,
                            const SimOptions& opts) {
  return simulate_frozen(model, control, frozen_curve.grid(), frozen_curve.node_moments(model.functionals), t0, x0,
                         tau, opts);
}

CostSamples simulate_frozen(const ModelSpec& model, const FeedbackStrategy& control, const TimeGrid& grid,
                            const std::vector<MomentVector>& frozen_moments, double t0, ConstVecView x0,
                            double tau, const SimOptions& opts) {
  model.validate();
  if (static_cast<int>(frozen_moments.size()) != grid.size()) {
    throw std::invalid_argument("simulate_frozen: frozen curve too short for its grid");
  }
  if (std::abs(grid.end() - model.horizon) > 1e-12 * std::max(1.0, model.horizon)) {
    throw std::invalid_argument("simulate_frozen: frozen curve does not cover [t0, T]");
  }
  const auto k0_opt = grid.index_of(t0);
  if (!k0_opt) throw std::invalid_argument("simulate_frozen: t0 is not a grid node");
  if (static_cast<int>(x0.size()) != model.dim) throw std::invalid_argument("simulate_frozen: x0 has wrong dimension");
  if (opts.n_particles < 1) throw std::invalid_argument("simulate_frozen: need at least one path");
  const int k0 = *k0_opt;
  const int K = grid.steps();
  const int n = opts.n_particles;
  const int d = model.dim;
  const int l = model.control_dim;
  const double h = grid.step();
  const double sqrt_h = std::sqrt(h);
  const CounterRng rng(opts.seed);
  CostSamples out;
  out.running.assign(n, 0.0);
  out.terminal.assign(n, 0.0);
  parallel_for(n, opts.workers, [&](int begin, int end) {
    // Node-major sweep over the chunk: coefficient evaluations at one node
    // run back to back, which lets models reuse per-node work.
    const int count = end - begin;
    std::vector<double> ys(static_cast<std::size_t>(count) * d);
    for (int i = 0; i < count; ++i) std::copy(x0.begin(), x0.end(), ys.begin() + static_cast<std::ptrdiff_t>(i) * d);
    std::vector<double> running(count, 0.0);
    std::vector<double> spare(count, 0.0);
    std::vector<double> a1(d), a2(d), b(d), u(l);
    for (int k = k0; k < K; ++k) {
      const double t = grid.node(k);
      const MomentVector& m = frozen_moments[k];
      for (int i = 0; i < count; ++i) {
        const VecView y(ys.data() + static_cast<std::size_t>(i) * d, d);
        control.evaluate(t, y, u);
        running[i] += (model.running_state(tau, t, y, m) + model.running_control(tau, t, y, u)) * h;
        model.drift_state(t, y, m, a1);
        model.drift_control(t, y, u, a2);
        model.diffusion(t, y, m, b);
        const double z = step_noise(rng, begin + i, k, spare[i], k > k0);
        for (int j = 0; j < d; ++j) y[j] += (a1[j] + a2[j]) * h + b[j] * sqrt_h * z;
      }
    }
    for (int i = 0; i < count; ++i) {
      const VecView y(ys.data() + static_cast<std::size_t>(i) * d, d);
      for (double v : y) {
        if (!std::isfinite(v) || std::abs(v) > 1e8) throw NumericalError("simulate_frozen: path blow-up");
      }
      out.running[begin + i] = running[i];
      out.terminal[begin + i] = model.terminal(tau, y, frozen_moments[K]);
    }
  });
  return out;
}

PicardResult picard_iterate_law(const ModelSpec& model, const FeedbackStrategy& strategy, const InitialLaw& init,
                                const SimOptions& opts, double tol, int max_iter) {
  if (max_iter < 1) throw std::invalid_argument("picard_iterate_law: max_iter must be positive");
  PicardResult result;
  const EmpiricalMeasure start = init.sample_cloud(opts.seed, opts.n_particles);
  DistributionCurve current = DistributionCurve::constant(opts.grid, start);
  for (int it = 1; it <= max_iter; ++it) {
    ParticlePaths next =
        simulate_given_law(model, strategy, init, current.node_moments(model.functionals), opts);
    const double dist = curve_distance_m(next.curve, current);
    result.distances.push_back(dist);
    result.iterations = it;
    current = std::move(next.curve);
    if (dist < tol) {
      result.curve = std::move(current);
      return result;
    }
  }
  std::ostringstream os;
  os << "picard_iterate_law: no convergence to " << tol << " within " << max_iter << " iterations (last distance "
     << result.distances.back() << ")";
  throw std::runtime_error(os.str());
}

MomentReport moment_report(const ParticlePaths& paths, double delta) {
  const DistributionCurve& c = paths.curve;
  const int n = c.count();
  const int d = c.dim();
  MomentReport report;
  for (int i = 0; i < n; ++i) {
    double sup = 0.0;
    for (int k = 0; k < c.size(); ++k) {
      const auto x = c.at(k).point(i);
      double s = 0.0;
      for (int j = 0; j < d; ++j) s += x[j] * x[j];
      sup = std::max(sup, s);
    }
    report.sup_second += sup;
    report.sup_2plus += std::pow(sup, 1.0 + 0.5 * delta);
  }
  report.sup_second /= n;
  report.sup_2plus /= n;
  report.holder = c.size() > 1 ? holder_profile(c) : 0.0;
  return report;
}

namespace {

template <typename T>
void put_le(std::ostream& out, T value) {
  static_assert(sizeof(T) == 8);
  std::uint64_t bits;
  std::memcpy(&bits, &value, 8);
  if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
  out.write(reinterpret_cast<const char*>(&bits), 8);
}

template <typename T>
T get_le(std::istream& in) {
  std::uint64_t bits = 0;
  if (!in.read(reinterpret_cast<char*>(&bits), 8)) throw std::runtime_error("read_paths_binary: truncated file");
  if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
  T value;
  std::memcpy(&value, &bits, 8);
  return value;
}

}  // namespace

void write_paths_binary(const std::string& path, const ParticlePaths& paths) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_paths_binary: cannot open " + path);
  const DistributionCurve& c = paths.curve;
  put_le<std::uint64_t>(out, static_cast<std::uint64_t>(c.size()));
  put_le<std::uint64_t>(out, static_cast<std::uint64_t>(c.count()));
  put_le<std::uint64_t>(out, static_cast<std::uint64_t>(c.dim()));
  put_le<std::uint64_t>(out, paths.seed);
  for (const auto& m : c.measures())
    for (double v : m.coordinates()) put_le<double>(out, v);
  if (!out) throw std::runtime_error("write_paths_binary: write failed for " + path);
}

ParticlePaths read_paths_binary(const std::string& path, const TimeGrid& grid) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_paths_binary: cannot open " + path);
  const auto nodes = get_le<std::uint64_t>(in);
  const auto n = get_le<std::uint64_t>(in);
  const auto d = get_le<std::uint64_t>(in);
  ParticlePaths paths;
  paths.seed = get_le<std::uint64_t>(in);
  if (nodes != static_cast<std::uint64_t>(grid.size())) throw std::runtime_error("read_paths_binary: grid size mismatch");
  std::vector<EmpiricalMeasure> measures;
  for (std::uint64_t k = 0; k < nodes; ++k) {
    std::vector<double> coords(n * d);
    for (auto& v : coords) v = get_le<double>(in);
    measures.emplace_back(static_cast<int>(d), std::move(coords));
  }
  paths.curve = DistributionCurve(grid, std::move(measures));
  paths.strategy_id = "loaded";
  return paths;
}

}  // namespace ticmkv
