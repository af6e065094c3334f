#pragma once

// Generalized Mahalanobis geometry over the signal feature space
//   p_u = D_I^{-t} R^T e_u   (user features),   q_i = D_I^{t} e_i   (item features)
// with metric weight W = H + omega diag(x). H is hollow and symmetric, so W is
// made positive semidefinite by choosing omega from the Gershgorin bound.
// Everything is evaluated from expanded quadratic forms; W is never formed.

#include <span>
#include <vector>

#include "corml/sparse.hpp"

namespace corml {

/// Non-owning view of the feature space of an interaction matrix at
/// normalization strength t. Features are computed on demand.
class SignalFeatureSpace {
 public:
  SignalFeatureSpace(const InteractionMatrix& r, double t);

  const InteractionMatrix& interactions() const { return r_; }
  double t() const { return t_; }

  /// p_u as (item, value) pairs over the user's items.
  std::vector<std::pair<Index, double>> user_feature(Index u) const;
  /// The single nonzero of q_i: d_i^t at position i.
  double item_feature(Index i) const { return item_pow_t_[i]; }
  /// d_i^{-2t}, the default diagonal base x.
  Vector default_base() const;

 private:
  const InteractionMatrix& r_;
  double t_;
  Vector item_pow_t_;
  Vector item_pow_neg_t_;
};

/// W = H + omega diag(x).
struct MetricWeight {
  const SparseSquareMatrix& h;
  double omega;
  Vector x;
};

/// omega = max_i (sum_{j != i} |H_ij|) / x_i. Throws DataError when H is not
/// symmetric or not hollow, or some x_i <= 0.
double psd_completion_omega(const SparseSquareMatrix& h, const Vector& x);
double psd_completion_omega(const DenseMatrix& h, const Vector& x);

struct GershgorinInterval {
  double center;
  double radius;
  double lower() const { return center - radius; }
  double upper() const { return center + radius; }
};

/// (A_ii, sum_{j != i} |A_ij|) per row. Throws DataError for non-symmetric A.
std::vector<GershgorinInterval> gershgorin_intervals(const DenseMatrix& a);

/// Squared distance d^2(p_u, q_i), expanded as
/// p_u^T W p_u + q_i^T W q_i - 2 p_u^T W q_i. Values in [-1e-9, 0) clamp to 0.
double mahalanobis_distance_sq(const SignalFeatureSpace& space, const MetricWeight& w, Index u,
                               Index i);

/// d^2(p_u, q_i) - d^2(p_u, q_j) through the residual form
/// W_ii (d_i^{2t} - 2 R_ui) - W_jj (d_j^{2t} - 2 R_uj) - 2 p_u^T H (q_i - q_j).
double distance_residual(const SignalFeatureSpace& space, const MetricWeight& w, Index u,
                         Index i, Index j);

/// y_ui - y_uj = p_u^T H (q_i - q_j).
double preference_residual(const SignalFeatureSpace& space, const SparseSquareMatrix& h,
                           Index u, Index i, Index j);

/// y_ui = p_u^T H q_i.
double preference_score(const SignalFeatureSpace& space, const SparseSquareMatrix& h, Index u,
                        Index i);

}  // namespace corml
