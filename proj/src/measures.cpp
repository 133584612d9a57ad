#include "ticmkv/measures.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <string>

#include "ticmkv/csv.hpp"
#include "ticmkv/rng.hpp"

namespace ticmkv {

EmpiricalMeasure::EmpiricalMeasure(int dim, std::vector<double> coordinates)
    : dim_(dim), data_(std::move(coordinates)) {
  if (dim < 1) throw std::invalid_argument("EmpiricalMeasure: dimension must be positive");
  if (data_.empty()) throw std::invalid_argument("EmpiricalMeasure: empty measure");
  if (data_.size() % static_cast<std::size_t>(dim) != 0) {
    throw std::invalid_argument("EmpiricalMeasure: coordinate count is not a multiple of the dimension");
  }
  check_finite();
}

EmpiricalMeasure EmpiricalMeasure::from_scalars(std::vector<double> values) {
  return EmpiricalMeasure(1, std::move(values));
}

void EmpiricalMeasure::check_finite() const {
  for (std::size_t i = 0; i < data_.size(); ++i) {
    if (!std::isfinite(data_[i])) {
      throw NumericalError("EmpiricalMeasure: non-finite coordinate at point " +
                           std::to_string(i / static_cast<std::size_t>(dim_)));
    }
  }
}

MomentVector moments(const EmpiricalMeasure& mu, const std::vector<MomentFunctional>& functionals) {
  const int n = mu.count();
  const int d = mu.dim();
  MomentVector m;
  m.mean = Vec::Zero(d);
  m.generalized.assign(functionals.size(), 0.0);
  double second = 0.0;
  for (int i = 0; i < n; ++i) {
    const auto x = mu.point(i);
    for (int j = 0; j < d; ++j) {
      m.mean[j] += x[j];
      second += x[j] * x[j];
    }
    for (std::size_t f = 0; f < functionals.size(); ++f) m.generalized[f] += functionals[f].phi(x);
  }
  m.mean /= n;
  m.second_moment = second / n;
  for (auto& g : m.generalized) g /= n;
  return m;
}

DistributionCurve::DistributionCurve(TimeGrid grid, std::vector<EmpiricalMeasure> measures)
    : grid_(grid), measures_(std::move(measures)) {
  if (static_cast<int>(measures_.size()) != grid_.size()) {
    throw std::invalid_argument("DistributionCurve: number of measures does not match the grid");
  }
  for (const auto& m : measures_) {
    if (m.dim() != measures_.front().dim() || m.count() != measures_.front().count()) {
      throw std::invalid_argument("DistributionCurve: measures must share dimension and count");
    }
  }
}

DistributionCurve DistributionCurve::constant(const TimeGrid& grid, const EmpiricalMeasure& mu) {
  return DistributionCurve(grid, std::vector<EmpiricalMeasure>(grid.size(), mu));
}

DistributionCurve DistributionCurve::tail(int first) const {
  return DistributionCurve(grid_.tail(first),
                           std::vector<EmpiricalMeasure>(measures_.begin() + first, measures_.end()));
}

std::vector<MomentVector> DistributionCurve::node_moments(const std::vector<MomentFunctional>& functionals) const {
  std::vector<MomentVector> out;
  out.reserve(measures_.size());
  for (const auto& m : measures_) out.push_back(moments(m, functionals));
  return out;
}

W2Method W2Method::resolve(int dim, int count) const {
  if (kind != Kind::automatic) return *this;
  if (dim == 1) return exact1d();
  if (count <= 512) return assignment();
  return sliced(64, seed);
}

std::string W2Method::name() const {
  switch (kind) {
    case Kind::automatic: return "automatic";
    case Kind::exact1d: return "exact1d";
    case Kind::assignment: return "assignment";
    case Kind::sliced: return "sliced(" + std::to_string(projections) + ")";
  }
  return "unknown";
}

namespace {

// Squared W2 between two 1-D empirical measures given sorted samples:
// integral over s in (0,1) of (Qa(s) - Qb(s))^2.
double w2_squared_sorted(const std::vector<double>& a, const std::vector<double>& b) {
  const std::size_t n = a.size();
  const std::size_t m = b.size();
  if (n == m) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double diff = a[i] - b[i];
      acc += diff * diff;
    }
    return acc / static_cast<double>(n);
  }
  double acc = 0.0;
  std::size_t i = 0, j = 0;
  double s = 0.0;
  while (i < n && j < m) {
    const double next_a = static_cast<double>(i + 1) / static_cast<double>(n);
    const double next_b = static_cast<double>(j + 1) / static_cast<double>(m);
    const double next = std::min(next_a, next_b);
    const double diff = a[i] - b[j];
    acc += (next - s) * diff * diff;
    s = next;
    // Advance every sequence whose breakpoint was reached; comparing index
    // products avoids rounding in the breakpoint test.
    const auto lhs = (i + 1) * m;
    const auto rhs = (j + 1) * n;
    if (lhs <= rhs) ++i;
    if (rhs <= lhs) ++j;
  }
  return acc;
}

std::vector<double> sorted_copy(const std::vector<double>& v) {
  std::vector<double> s(v);
  std::sort(s.begin(), s.end());
  return s;
}

// Minimum-cost perfect matching (Hungarian method with potentials).
double assignment_w2_squared(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu) {
  const int n = mu.count();
  const int d = mu.dim();
  auto cost = [&](int i, int j) {
    const auto x = mu.point(i);
    const auto y = nu.point(j);
    double c = 0.0;
    for (int k = 0; k < d; ++k) c += (x[k] - y[k]) * (x[k] - y[k]);
    return c;
  };
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  double total = 0.0;
  for (int j = 1; j <= n; ++j) total += cost(p[j] - 1, j - 1);
  return total / n;
}

std::vector<double> project(const EmpiricalMeasure& mu, const std::vector<double>& direction) {
  std::vector<double> out(mu.count());
  for (int i = 0; i < mu.count(); ++i) {
    const auto x = mu.point(i);
    double s = 0.0;
    for (int k = 0; k < mu.dim(); ++k) s += x[k] * direction[k];
    out[i] = s;
  }
  std::sort(out.begin(), out.end());
  return out;
}

double sliced_w2_squared(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu, int projections,
                         std::uint64_t seed) {
  if (projections < 1) throw std::invalid_argument("wasserstein2: sliced method needs n_proj >= 1");
  const int d = mu.dim();
  const CounterRng rng(seed);
  double acc = 0.0;
  std::vector<double> dir(d);
  for (int p = 0; p < projections; ++p) {
    double norm2 = 0.0;
    for (int k = 0; k < d; k += 2) {
      const auto z = rng.normals(static_cast<std::uint32_t>(p), static_cast<std::uint32_t>(k / 2),
                                 CounterRng::kDirection);
      dir[k] = z[0];
      if (k + 1 < d) dir[k + 1] = z[1];
    }
    for (double c : dir) norm2 += c * c;
    const double norm = std::sqrt(norm2);
    for (double& c : dir) c /= norm;
    acc += w2_squared_sorted(project(mu, dir), project(nu, dir));
  }
  return acc / projections;
}

}  // namespace

double wasserstein2(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu, W2Method method) {
  if (mu.coordinates().empty() || nu.coordinates().empty()) {
    throw std::invalid_argument("wasserstein2: empty measure");
  }
  if (mu.dim() != nu.dim()) throw std::invalid_argument("wasserstein2: dimension mismatch");
  const W2Method m = method.resolve(mu.dim(), std::max(mu.count(), nu.count()));
  double w2sq = 0.0;
  switch (m.kind) {
    case W2Method::Kind::exact1d:
      if (mu.dim() != 1) throw std::invalid_argument("wasserstein2: exact1d requires dimension 1");
      w2sq = w2_squared_sorted(sorted_copy(mu.coordinates()), sorted_copy(nu.coordinates()));
      break;
    case W2Method::Kind::assignment:
      if (mu.count() != nu.count()) throw std::invalid_argument("wasserstein2: assignment requires equal counts");
      w2sq = assignment_w2_squared(mu, nu);
      break;
    case W2Method::Kind::sliced:
      w2sq = sliced_w2_squared(mu, nu, m.projections, m.seed);
      break;
    case W2Method::Kind::automatic:
      break;
  }
  return std::sqrt(std::max(0.0, w2sq));
}

double curve_distance_m(const DistributionCurve& c1, const DistributionCurve& c2, W2Method method) {
  if (!c1.grid().same_as(c2.grid())) throw std::invalid_argument("curve_distance_m: grid mismatch");
  if (c1.dim() != c2.dim()) throw std::invalid_argument("curve_distance_m: dimension mismatch");
  double sup = 0.0;
  for (int k = 0; k < c1.size(); ++k) sup = std::max(sup, wasserstein2(c1.at(k), c2.at(k), method));
  return sup;
}

CouplingBoundReport coupling_bound_check(const EmpiricalMeasure& paired_x, const EmpiricalMeasure& paired_y) {
  if (paired_x.count() != paired_y.count() || paired_x.dim() != paired_y.dim()) {
    throw std::invalid_argument("coupling_bound_check: paired samples must have equal count and dimension");
  }
  CouplingBoundReport report;
  double acc = 0.0;
  for (int i = 0; i < paired_x.count(); ++i) {
    const auto x = paired_x.point(i);
    const auto y = paired_y.point(i);
    for (int k = 0; k < paired_x.dim(); ++k) acc += (x[k] - y[k]) * (x[k] - y[k]);
  }
  report.l2 = acc / paired_x.count();
  report.w2 = wasserstein2(paired_x, paired_y);
  report.ok = report.w2 * report.w2 <= report.l2 + 1e-9;
  return report;
}

double holder_profile(const DistributionCurve& c, W2Method method) {
  if (c.size() < 2) throw std::invalid_argument("holder_profile: need at least two nodes");
  const TimeGrid& grid = c.grid();
  const W2Method m = method.resolve(c.dim(), c.count());
  double best = 0.0;
  if (m.kind == W2Method::Kind::exact1d) {
    std::vector<std::vector<double>> sorted;
    sorted.reserve(c.size());
    for (const auto& node : c.measures()) sorted.push_back(sorted_copy(node.coordinates()));
    for (int s = 0; s < c.size(); ++s) {
      for (int t = s + 1; t < c.size(); ++t) {
        const double ratio = w2_squared_sorted(sorted[s], sorted[t]) / (grid.node(t) - grid.node(s));
        best = std::max(best, ratio);
      }
    }
    return best;
  }
  for (int s = 0; s < c.size(); ++s) {
    for (int t = s + 1; t < c.size(); ++t) {
      const double w = wasserstein2(c.at(s), c.at(t), m);
      best = std::max(best, w * w / (grid.node(t) - grid.node(s)));
    }
  }
  return best;
}

void write_curve_csv(std::ostream& out, const DistributionCurve& c) {
  const int d = c.dim();
  out << "t";
  for (int j = 1; j <= d; ++j) out << ",mean_" << j;
  out << ",second_moment";
  if (d == 1) {
    for (int q = 10; q <= 90; q += 10) out << ",q" << q;
  }
  out << '\n';
  for (int k = 0; k < c.size(); ++k) {
    const MomentVector m = moments(c.at(k));
    out << csv::num(c.grid().node(k));
    for (int j = 0; j < d; ++j) out << ',' << csv::num(m.mean[j]);
    out << ',' << csv::num(m.second_moment);
    if (d == 1) {
      const std::vector<double> s = sorted_copy(c.at(k).coordinates());
      const double n1 = static_cast<double>(s.size() - 1);
      for (int q = 1; q <= 9; ++q) {
        const double pos = n1 * q / 10.0;
        const auto lo = static_cast<std::size_t>(std::floor(pos));
        const std::size_t hi = std::min(lo + 1, s.size() - 1);
        const double frac = pos - static_cast<double>(lo);
        out << ',' << csv::num(s[lo] + frac * (s[hi] - s[lo]));
      }
    }
    out << '\n';
  }
}

}  // namespace ticmkv
