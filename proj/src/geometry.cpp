#include "corml/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "corml/error.hpp"

namespace corml {

namespace {

constexpr double kNegativeFloor = -1e-9;

void check_user_item(const SignalFeatureSpace& s, Index u, Index i) {
  if (u >= s.interactions().n_users() || i >= s.interactions().n_items()) {
    throw DimensionError("geometry: user or item index out of range");
  }
}

void check_weight(const SignalFeatureSpace& s, const MetricWeight& w) {
  const Index n = s.interactions().n_items();
  if (w.h.n() != n || w.x.size() != n) throw DimensionError("geometry: metric weight has wrong size");
}

// p_u^T H e_k for a single column k: sum over the user's items j of
// d_j^{-t} H_jk.
double user_h_column(const SignalFeatureSpace& s, const SparseSquareMatrix& h, Index u, Index k) {
  double acc = 0.0;
  for (const auto& [j, pj] : s.user_feature(u)) acc += pj * h.at(j, k);
  return acc;
}

}  // namespace

SignalFeatureSpace::SignalFeatureSpace(const InteractionMatrix& r, double t)
    : r_(r),
      t_(t),
      item_pow_t_(degree_power(r.item_degrees(), t)),
      item_pow_neg_t_(degree_power(r.item_degrees(), -t)) {}

std::vector<std::pair<Index, double>> SignalFeatureSpace::user_feature(Index u) const {
  std::vector<std::pair<Index, double>> p;
  for (Index i : r_.row(u)) p.emplace_back(i, item_pow_neg_t_[i]);
  return p;
}

Vector SignalFeatureSpace::default_base() const {
  return degree_power(r_.item_degrees(), -2.0 * t_);
}

double psd_completion_omega(const SparseSquareMatrix& h, const Vector& x) {
  if (x.size() != h.n()) throw DimensionError("psd_completion_omega: x has wrong length");
  if (!h.is_symmetric()) throw DataError("psd_completion_omega: H is not symmetric");
  double omega = 0.0;
  for (Index i = 0; i < h.n(); ++i) {
    if (!(x[i] > 0.0)) throw DataError("psd_completion_omega: x must be strictly positive");
    if (h.at(i, i) != 0.0) throw DataError("psd_completion_omega: H is not hollow");
    double row = 0.0;
    for (double v : h.row_values(i)) row += std::abs(v);
    omega = std::max(omega, row / x[i]);
  }
  return omega;
}

double psd_completion_omega(const DenseMatrix& h, const Vector& x) {
  if (h.rows() != h.cols()) throw DimensionError("psd_completion_omega: H is not square");
  if (h != h.transpose()) throw DataError("psd_completion_omega: H is not symmetric");
  return psd_completion_omega(SparseSquareMatrix::from_dense(h), x);
}

std::vector<GershgorinInterval> gershgorin_intervals(const DenseMatrix& a) {
  if (a.rows() != a.cols()) throw DimensionError("gershgorin_intervals: matrix is not square");
  if (a != a.transpose()) throw DataError("gershgorin_intervals: matrix is not symmetric");
  std::vector<GershgorinInterval> out;
  out.reserve(static_cast<std::size_t>(a.rows()));
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    out.push_back({a(i, i), a.row(i).cwiseAbs().sum() - std::abs(a(i, i))});
  }
  return out;
}

double mahalanobis_distance_sq(const SignalFeatureSpace& space, const MetricWeight& w, Index u,
                               Index i) {
  check_user_item(space, u, i);
  check_weight(space, w);
  const auto p = space.user_feature(u);
  const double qi = space.item_feature(i);

  // p^T W p = sum_{a,b in I_u} p_a H_ab p_b + omega sum_a x_a p_a^2
  double ppp = 0.0;
  for (const auto& [a, pa] : p) {
    ppp += w.omega * w.x[a] * pa * pa;
    for (const auto& [b, pb] : p) ppp += pa * w.h.at(a, b) * pb;
  }
  // q^T W q = W_ii q_i^2 (H is hollow)
  const double qwq = (w.h.at(i, i) + w.omega * w.x[i]) * qi * qi;
  // p^T W q = q_i (sum_a p_a H_ai + omega x_i p_i)
  double p_i = 0.0;
  for (const auto& [a, pa] : p) {
    if (a == i) p_i = pa;
  }
  const double pwq = qi * (user_h_column(space, w.h, u, i) + w.omega * w.x[i] * p_i);

  const double d2 = ppp + qwq - 2.0 * pwq;
  if (d2 < 0.0 && d2 >= kNegativeFloor) return 0.0;
  return d2;
}

double distance_residual(const SignalFeatureSpace& space, const MetricWeight& w, Index u,
                         Index i, Index j) {
  check_user_item(space, u, i);
  check_user_item(space, u, j);
  check_weight(space, w);
  const auto& r = space.interactions();
  const double t2 = 2.0 * space.t();
  const Vector& d = r.item_degrees();
  auto pow2t = [&](Index k) { return d[k] > 0.0 ? std::pow(d[k], t2) : 0.0; };
  auto w_diag = [&](Index k) { return w.h.at(k, k) + w.omega * w.x[k]; };
  const double rui = r.contains(u, i) ? 1.0 : 0.0;
  const double ruj = r.contains(u, j) ? 1.0 : 0.0;
  return w_diag(i) * (pow2t(i) - 2.0 * rui) - w_diag(j) * (pow2t(j) - 2.0 * ruj) -
         2.0 * preference_residual(space, w.h, u, i, j);
}

double preference_residual(const SignalFeatureSpace& space, const SparseSquareMatrix& h,
                           Index u, Index i, Index j) {
  return preference_score(space, h, u, i) - preference_score(space, h, u, j);
}

double preference_score(const SignalFeatureSpace& space, const SparseSquareMatrix& h, Index u,
                        Index i) {
  check_user_item(space, u, i);
  if (h.n() != space.interactions().n_items()) throw DimensionError("geometry: H has wrong size");
  return user_h_column(space, h, u, i) * space.item_feature(i);
}

}  // namespace corml
