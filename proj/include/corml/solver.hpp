#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "corml/signal.hpp"
#include "corml/sparse.hpp"

namespace corml {

/// Per-item weights used by the ADMM penalty and the Lyapunov Z-step.
enum class PenaltyWeights : std::uint8_t { degree = 0, uniform = 1 };

struct CoRMLHyperparams {
  double t = 0.05;        // normalization strength
  double t_u = 0.5;       // user-degree scaling exponent
  double epsilon = 0.1;   // global scaling
  double theta = 0.1;     // L2 strength
  double lambda = 0.7;    // weight of the learned branch
  Index rank = 64;        // SVD rank k
  double rho = 5.0;
  double tol = 1e-4;
  Index max_iters = 50;
  std::uint64_t seed = 42;
  Index power_iters = 4;
  PenaltyWeights weights = PenaltyWeights::degree;

  /// Throws UsageError on an out-of-range field.
  void validate() const;
};

/// phi_u = epsilon * (d_u / max d_u)^(-t_u)
Vector compute_phi(const Vector& user_degrees, double epsilon, double t_u);

/// alpha covers `interacted` in the given order; beta covers every other item
/// in ascending index order.
struct RankingWeights {
  std::vector<double> alpha;
  std::vector<double> beta;
  std::vector<Index> uninteracted;
};

/// Rank-count weights of the triplet residual margin loss (strict
/// comparisons, ties contribute nothing).
RankingWeights exact_ranking_weights(std::span<const double> scores,
                                     std::span<const Index> interacted);

/// alpha~ = phi*y - 1 on interacted items, beta~ = phi*y elsewhere.
RankingWeights approx_ranking_weights(std::span<const double> scores,
                                      std::span<const Index> interacted, double phi_u);

/// sum_u sum_i y_ui (phi_u y_ui - R_ui)
double corml_loss(const DenseMatrix& y, const InteractionMatrix& r, const Vector& phi);

/// Y = R (lambda D^{-t} H D^{t} + (1 - lambda) D^{-1/2} G D^{1/2}) for the
/// requested users (all users when `users` is empty), one row per user.
DenseMatrix hybrid_scores(const InteractionMatrix& r, const SparseSquareMatrix& h,
                          const FilterMatrix& g, double lambda, double t,
                          const Vector& item_degrees, std::span<const Index> users = {});
DenseMatrix hybrid_scores(const InteractionMatrix& r, const DenseMatrix& h,
                          const FilterMatrix& g, double lambda, double t,
                          const Vector& item_degrees, std::span<const Index> users = {});

/// The degree-transformed training objective written as a quadratic in H:
///   f(H) = 1/2 tr(H^T A H) + tr(H^T L) + c
/// where, with X = R D^{-t} and B the fixed filter branch of X-space scores,
///   A = 2 lambda^2 X^T Phi X + theta D,  L = lambda (2 X^T Phi B - X^T X).
struct QuadraticObjective {
  DenseMatrix hessian;
  DenseMatrix linear;
  double constant = 0.0;

  double value(const DenseMatrix& h) const;
  DenseMatrix gradient(const DenseMatrix& h) const;
};

QuadraticObjective build_objective(const InteractionMatrix& r, const DenseMatrix& g,
                                   const CoRMLHyperparams& hp);

/// Same objective evaluated directly from the scores:
///   sum_ui ys_ui (phi_u ys_ui - X_ui) + theta/2 sum_ij d_i H_ij^2
/// with ys = (lambda X H + B). Independent of QuadraticObjective's algebra.
double transformed_objective(const InteractionMatrix& r, const DenseMatrix& h,
                             const DenseMatrix& g, const CoRMLHyperparams& hp);

/// Per-item ADMM weights a_i: item degrees (zero degree -> 1) or all ones.
Vector penalty_weights(const Vector& item_degrees, PenaltyWeights mode);

struct AdmmState {
  DenseMatrix h;
  DenseMatrix z;
  DenseMatrix dual;
  Index iteration = 0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;

  static AdmmState zeros(Index n);
};

/// Caches P = (A + rho diag(a))^{-1} once; each H-step is then one product.
class HStepSolver {
 public:
  HStepSolver(const DenseMatrix& hessian, const Vector& weights, double rho);

  /// argmin 1/2 tr(H^T A H) + tr(H^T L) + rho/2 ||diag(a)^{1/2} (H - Z + U)||^2
  /// subject to diag(H) = 0.
  DenseMatrix solve(const DenseMatrix& z, const DenseMatrix& dual,
                    const DenseMatrix& linear) const;

  double rho() const { return rho_; }
  const Vector& weights() const { return weights_; }

 private:
  DenseMatrix inverse_;
  Vector weights_;
  double rho_;
};

DenseMatrix admm_h_step(const AdmmState& state, const HStepSolver& solver,
                        const DenseMatrix& linear);

/// Z_ij = relu((a_i M_ij + a_j M_ji) / (a_i + a_j)) with M = H + U.
DenseMatrix admm_z_step(const AdmmState& state, const Vector& weights);

/// U += H - Z; records both residuals.
void admm_dual_step(AdmmState& state, const DenseMatrix& z_prev, double rho);

struct IterationLog {
  Index iteration;
  double primal_residual;
  double dual_residual;
  double objective;  // transformed objective at the feasible iterate Z
};

struct AdmmResult {
  DenseMatrix h;  // final Z with its diagonal zeroed: hollow, symmetric, >= 0
  AdmmState state;
  bool converged = false;
  std::vector<IterationLog> log;
};

/// Runs ADMM on a prepared objective. Throws NumericalError when the Hessian
/// cannot be factorized or an iterate stops being finite.
AdmmResult solve_admm(const QuadraticObjective& objective, const Vector& weights,
                      const CoRMLHyperparams& hp);

struct CoRMLFit {
  GraphFilterFactor filter;
  DenseMatrix g;
  AdmmResult admm;
  SparseSquareMatrix h;  // sparsified final H
};

/// Full training pipeline: SVD, G, objective, ADMM, sparsification.
CoRMLFit fit_corml(const InteractionMatrix& r, const CoRMLHyperparams& hp,
                   std::size_t nnz_budget);

/// Default stored-value budget for a learned item x item matrix: the
/// parameter count of a 64-dim embedding model, halved for CSR overhead.
std::size_t default_nnz_budget(Index n_users, Index n_items);

}  // namespace corml
