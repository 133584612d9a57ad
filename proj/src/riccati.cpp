#include "ticmkv/riccati.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "ticmkv/csv.hpp"
#include "ticmkv/parallel.hpp"

namespace ticmkv {

RiccatiFamily::RiccatiFamily(TimeGrid grid, int dim) : grid_(grid), dim_(dim) {
  const std::size_t n = static_cast<std::size_t>(grid.size()) * (grid.size() + 1) / 2;
  P_.assign(n * dim * dim, 0.0);
  p_.assign(n * dim, 0.0);
  eta_.assign(n, 0.0);
}

std::size_t RiccatiFamily::index(int j, int k) const {
  const std::size_t n = grid_.size();
  const auto jj = static_cast<std::size_t>(j);
  return jj * n - jj * (jj - 1) / 2 + static_cast<std::size_t>(k - j);
}

void RiccatiFamily::write_diagonal_csv(std::ostream& out) const {
  out << "t";
  for (int c = 1; c <= dim_; ++c)
    for (int r = 1; r <= dim_; ++r) out << ",P_" << r << '_' << c;
  for (int r = 1; r <= dim_; ++r) out << ",p_" << r;
  out << ",eta\n";
  for (int k = 0; k < grid_.size(); ++k) {
    out << csv::num(grid_.node(k));
    const auto P_kk = P(k, k);
    for (int c = 0; c < dim_; ++c)
      for (int r = 0; r < dim_; ++r) out << ',' << csv::num(P_kk(r, c));
    const auto p_kk = p(k, k);
    for (int r = 0; r < dim_; ++r) out << ',' << csv::num(p_kk[r]);
    out << ',' << csv::num(eta(k, k)) << '\n';
  }
}

namespace {

// Coefficients at one time node that do not depend on the row.
struct NodeCoeffs {
  double t = 0.0;
  Mat A, B, Rinv, M;
  Vec a, b;
  const MomentVector* m = nullptr;
};

NodeCoeffs node_coeffs(const LqModelSpec& lq, double t, const MomentVector& m) {
  NodeCoeffs c;
  c.t = t;
  c.A = lq.A(t);
  c.B = lq.B(t);
  const Mat R = lq.R(t, t);
  Eigen::LLT<Mat> llt(R);
  if (llt.info() != Eigen::Success) {
    std::ostringstream os;
    os << "solve_riccati_family: R(t;t) is not invertible at t=" << t;
    throw NumericalError(os.str());
  }
  c.Rinv = llt.solve(Mat::Identity(R.rows(), R.cols()));
  c.M = c.B * c.Rinv * c.B.transpose();
  c.a = lq.a(t, m);
  c.b = lq.b(t, m);
  c.m = &m;
  return c;
}

struct Rates {
  Mat dP;
  Vec dp;
  double deta = 0.0;
};

Rates rates(const LqModelSpec& lq, OffsetForm form, const NodeCoeffs& c, double tau, const Mat& P, const Vec& p,
            const Mat& D, const Vec& d) {
  const Mat S = c.Rinv * lq.R(tau, c.t) * c.Rinv;
  const Mat BSB = c.B * S * c.B.transpose();
  const Mat MD = c.M * D;
  Rates r;
  r.dP = P * c.A + c.A.transpose() * P + lq.Q(tau, c.t) - (P * MD + MD.transpose() * P) + D * BSB * D;
  const Vec drift_offset = c.a - c.M * d;
  if (form == OffsetForm::derived) {
    r.dp = (c.A - MD).transpose() * p + P * drift_offset + D * BSB * d;
    r.deta = c.b.dot(P * c.b) + 2.0 * p.dot(drift_offset) + d.dot(BSB * d) + lq.F(tau, c.t, *c.m);
  } else {
    r.dp = P * drift_offset + (D * BSB * D).col(0);
    r.deta = c.b.dot(P * c.b) + p.dot(BSB * p) + lq.F(tau, c.t, *c.m);
  }
  return r;
}

}  // namespace

RiccatiFamily solve_riccati_family(const LqModelSpec& lq, const DistributionCurve& mu, const RiccatiOptions& options) {
  return solve_riccati_family(lq, mu.grid(), mu.node_moments(lq.functionals), options);
}

RiccatiFamily solve_riccati_family(const LqModelSpec& lq, const TimeGrid& grid, const std::vector<MomentVector>& law,
                                   const RiccatiOptions& options) {
  if (std::abs(grid.end() - lq.horizon) > 1e-12 * std::max(1.0, lq.horizon)) {
    throw std::invalid_argument("solve_riccati_family: curve grid does not end at the model horizon");
  }
  if (static_cast<int>(law.size()) != grid.size()) {
    throw std::invalid_argument("solve_riccati_family: one MomentVector per grid node required");
  }
  if (options.offset_form == OffsetForm::as_printed && lq.dim != 1) {
    throw std::invalid_argument("solve_riccati_family: the as-printed offset form is defined for scalar state only");
  }
  const int d = lq.dim;
  const int K = grid.steps();
  const double h = grid.step();
  RiccatiFamily fam(grid, d);

  for (int j = 0; j <= K; ++j) {
    fam.P(j, K) = lq.G(grid.node(j));
    fam.p(j, K).setZero();
    fam.eta(j, K) = lq.H(grid.node(j), law[K]);
  }

  std::vector<Mat> P_pred(K + 1);
  std::vector<Vec> p_pred(K + 1);
  std::vector<double> eta_pred(K + 1);
  std::vector<Rates> first(K + 1);

  NodeCoeffs next = node_coeffs(lq, grid.node(K), law[K]);
  for (int k = K - 1; k >= 0; --k) {
    const NodeCoeffs cur = node_coeffs(lq, grid.node(k), law[k]);
    const Mat D_next = fam.P(k + 1, k + 1);
    const Vec d_next = fam.p(k + 1, k + 1);

    parallel_for(k + 1, options.workers, [&](int begin, int end) {
      for (int j = begin; j < end; ++j) {
        const Mat P = fam.P(j, k + 1);
        const Vec p = fam.p(j, k + 1);
        first[j] = rates(lq, options.offset_form, next, grid.node(j), P, p, D_next, d_next);
        P_pred[j] = P + h * first[j].dP;
        p_pred[j] = p + h * first[j].dp;
        eta_pred[j] = fam.eta(j, k + 1) + h * first[j].deta;
      }
    });

    const Mat D_pred = P_pred[k];
    const Vec d_pred = p_pred[k];
    parallel_for(k + 1, options.workers, [&](int begin, int end) {
      for (int j = begin; j < end; ++j) {
        const Rates second = rates(lq, options.offset_form, cur, grid.node(j), P_pred[j], p_pred[j], D_pred, d_pred);
        const Mat P = fam.P(j, k + 1) + 0.5 * h * (first[j].dP + second.dP);
        fam.P(j, k) = 0.5 * (P + P.transpose());
        fam.p(j, k) = fam.p(j, k + 1) + 0.5 * h * (first[j].dp + second.dp);
        fam.eta(j, k) = fam.eta(j, k + 1) + 0.5 * h * (first[j].deta + second.deta);
      }
    });

    for (int j = 0; j <= k; ++j) {
      if (!fam.P(j, k).allFinite() || !fam.p(j, k).allFinite() || !std::isfinite(fam.eta(j, k))) {
        std::ostringstream os;
        os << "solve_riccati_family: non-finite value at tau=" << grid.node(j) << ", t=" << grid.node(k);
        throw NumericalError(os.str());
      }
    }
    next = cur;
  }
  return fam;
}

std::shared_ptr<AffineStrategy> extract_strategy_lq(const RiccatiFamily& fam, const LqModelSpec& lq) {
  const TimeGrid& grid = fam.grid();
  std::vector<Mat> gains(grid.size());
  std::vector<Vec> offsets(grid.size());
  for (int k = 0; k < grid.size(); ++k) {
    const double t = grid.node(k);
    const Mat R = lq.R(t, t);
    const Mat BtR = R.llt().solve(lq.B(t).transpose());  // R^-1 B'
    gains[k] = -BtR * fam.P(k, k);
    offsets[k] = -BtR * fam.p(k, k);
  }
  return std::make_shared<AffineStrategy>(grid, std::move(gains), std::move(offsets));
}

namespace {

double quadratic_value(const RiccatiFamily& fam, int j, int k, ConstVecView x) {
  const Eigen::Map<const Vec> xv(x.data(), fam.dim());
  return xv.dot(fam.P(j, k) * xv) + 2.0 * fam.p(j, k).dot(xv) + fam.eta(j, k);
}

}  // namespace

double value_lq(const RiccatiFamily& fam, double tau, double t, ConstVecView x) {
  if (tau > t + 1e-12) throw std::invalid_argument("value_lq: tau must not exceed t");
  if (static_cast<int>(x.size()) != fam.dim()) throw std::invalid_argument("value_lq: x has wrong dimension");
  const TimeGrid& grid = fam.grid();
  auto position = [&](double s, int& i, double& w) {
    const double r = std::clamp((s - grid.start()) / grid.step(), 0.0, static_cast<double>(grid.steps()));
    i = std::min(static_cast<int>(std::floor(r)), grid.steps());
    w = r - i;
    if (w < 1e-9) w = 0.0;
    if (w > 1.0 - 1e-9) {
      ++i;
      w = 0.0;
    }
    if (i >= grid.steps()) {
      i = grid.steps();
      w = 0.0;
    }
  };
  int j, k;
  double wj, wk;
  position(tau, j, wj);
  position(t, k, wk);
  // Along a row, interpolate in t; rows are clamped so that j <= k holds.
  auto row_value = [&](int row) {
    const int k0 = std::max(k, row);
    const double v0 = quadratic_value(fam, row, k0, x);
    if (wk == 0.0 || k0 + 1 > grid.steps() || k0 != k) return v0;
    return (1.0 - wk) * v0 + wk * quadratic_value(fam, row, k0 + 1, x);
  };
  const double v = row_value(j);
  if (wj == 0.0) return v;
  const int j1 = std::min(j + 1, k + (wk > 0.0 ? 1 : 0));
  return (1.0 - wj) * v + wj * row_value(j1);
}

}  // namespace ticmkv
