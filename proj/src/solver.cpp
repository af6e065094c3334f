#include "corml/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Cholesky>

#include "corml/error.hpp"

namespace corml {

void CoRMLHyperparams::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw UsageError(what);
  };
  require(std::isfinite(t), "t must be finite");
  require(std::isfinite(t_u), "t_u must be finite");
  require(epsilon > 0.0 && std::isfinite(epsilon), "epsilon must be positive");
  require(theta > 0.0 && std::isfinite(theta), "theta must be positive");
  require(lambda >= 0.0 && lambda <= 1.0, "lambda must lie in [0, 1]");
  require(rank >= 1, "rank must be at least 1");
  require(rho > 0.0 && std::isfinite(rho), "rho must be positive");
  require(tol > 0.0, "tol must be positive");
  require(max_iters >= 1, "max_iters must be at least 1");
}

Vector compute_phi(const Vector& user_degrees, double epsilon, double t_u) {
  const double max_degree = user_degrees.size() > 0 ? user_degrees.maxCoeff() : 0.0;
  if (!(max_degree > 0.0)) throw DataError("compute_phi: every user degree is zero");
  return epsilon * degree_power(user_degrees / max_degree, -t_u);
}

namespace {

std::vector<Index> complement(std::size_t n, std::span<const Index> interacted) {
  std::vector<char> mark(n, 0);
  for (Index i : interacted) {
    if (i >= n) throw DimensionError("ranking weights: item index out of range");
    mark[i] = 1;
  }
  std::vector<Index> out;
  for (Index i = 0; i < n; ++i) {
    if (!mark[i]) out.push_back(i);
  }
  return out;
}

void check_split(std::size_t n_interacted, std::size_t n_other) {
  if (n_interacted == 0) throw DataError("ranking weights: no interacted items");
  if (n_other == 0) throw DataError("ranking weights: no uninteracted items");
}

}  // namespace

RankingWeights exact_ranking_weights(std::span<const double> scores,
                                     std::span<const Index> interacted) {
  RankingWeights w;
  w.uninteracted = complement(scores.size(), interacted);
  check_split(interacted.size(), w.uninteracted.size());

  std::vector<double> pos, neg;
  for (Index i : interacted) pos.push_back(scores[i]);
  for (Index j : w.uninteracted) neg.push_back(scores[j]);
  std::sort(pos.begin(), pos.end());
  std::sort(neg.begin(), neg.end());
  const double n_neg = static_cast<double>(neg.size());
  const double n_pos = static_cast<double>(pos.size());

  for (Index i : interacted) {
    // uninteracted items scoring strictly above y_i
    const auto above = neg.end() - std::upper_bound(neg.begin(), neg.end(), scores[i]);
    w.alpha.push_back(-static_cast<double>(above) / n_neg);
  }
  for (Index j : w.uninteracted) {
    // interacted items scoring strictly below y_j
    const auto below = std::lower_bound(pos.begin(), pos.end(), scores[j]) - pos.begin();
    w.beta.push_back(static_cast<double>(below) / n_pos);
  }
  return w;
}

RankingWeights approx_ranking_weights(std::span<const double> scores,
                                      std::span<const Index> interacted, double phi_u) {
  if (!(phi_u > 0.0)) throw UsageError("approx_ranking_weights: phi_u must be positive");
  RankingWeights w;
  w.uninteracted = complement(scores.size(), interacted);
  for (Index i : interacted) w.alpha.push_back(phi_u * scores[i] - 1.0);
  for (Index j : w.uninteracted) w.beta.push_back(phi_u * scores[j]);
  return w;
}

double corml_loss(const DenseMatrix& y, const InteractionMatrix& r, const Vector& phi) {
  if (y.rows() != r.n_users() || y.cols() != r.n_items() || phi.size() != r.n_users()) {
    throw DimensionError("corml_loss: shapes disagree");
  }
  double loss = 0.0;
  for (Index u = 0; u < r.n_users(); ++u) {
    double row = phi[u] * y.row(u).squaredNorm();
    for (Index i : r.row(u)) row -= y(u, i);
    loss += row;
  }
  return loss;
}

namespace {

template <class AddHRow>
DenseMatrix hybrid_scores_impl(const InteractionMatrix& r, Index h_dim, AddHRow add_h_row,
                               const FilterMatrix& g, double lambda, double t,
                               const Vector& item_degrees, std::span<const Index> users) {
  const Index n = r.n_items();
  if (h_dim != n || g.n() != n || item_degrees.size() != n) {
    throw DimensionError("hybrid_scores: item dimensions disagree");
  }
  if (lambda < 0.0 || lambda > 1.0) throw UsageError("hybrid_scores: lambda must lie in [0, 1]");
  std::vector<Index> all;
  if (users.empty()) {
    all.resize(r.n_users());
    for (Index u = 0; u < r.n_users(); ++u) all[u] = u;
    users = all;
  }
  for (Index u : users) {
    if (u >= r.n_users()) throw DimensionError("hybrid_scores: user index out of range");
  }
  const Vector h_in = degree_power(item_degrees, -t);
  const Vector h_out = degree_power(item_degrees, t);
  const Vector g_in = degree_power(item_degrees, -0.5);
  const Vector g_out = degree_power(item_degrees, 0.5);

  DenseMatrix y(static_cast<Eigen::Index>(users.size()), n);
  const auto count = static_cast<std::int64_t>(users.size());
#pragma omp parallel
  {
    std::vector<double> acc_h(n), acc_g(n);
#pragma omp for schedule(dynamic, 16)
    for (std::int64_t k = 0; k < count; ++k) {
      std::fill(acc_h.begin(), acc_h.end(), 0.0);
      std::fill(acc_g.begin(), acc_g.end(), 0.0);
      for (Index j : r.row(users[k])) {
        if (lambda > 0.0) add_h_row(j, h_in[j], std::span<double>(acc_h));
        if (lambda < 1.0) g.add_row(j, g_in[j], acc_g);
      }
      for (Index i = 0; i < n; ++i) {
        y(k, i) = lambda * acc_h[i] * h_out[i] + (1.0 - lambda) * acc_g[i] * g_out[i];
      }
    }
  }
  return y;
}

}  // namespace

DenseMatrix hybrid_scores(const InteractionMatrix& r, const SparseSquareMatrix& h,
                          const FilterMatrix& g, double lambda, double t,
                          const Vector& item_degrees, std::span<const Index> users) {
  auto add = [&h](Index j, double coeff, std::span<double> out) {
    const auto c = h.row_cols(j);
    const auto v = h.row_values(j);
    for (std::size_t k = 0; k < c.size(); ++k) out[c[k]] += coeff * v[k];
  };
  return hybrid_scores_impl(r, h.n(), add, g, lambda, t, item_degrees, users);
}

DenseMatrix hybrid_scores(const InteractionMatrix& r, const DenseMatrix& h,
                          const FilterMatrix& g, double lambda, double t,
                          const Vector& item_degrees, std::span<const Index> users) {
  if (h.rows() != h.cols()) throw DimensionError("hybrid_scores: H is not square");
  auto add = [&h](Index j, double coeff, std::span<double> out) {
    Eigen::Map<Eigen::RowVectorXd>(out.data(), static_cast<Eigen::Index>(out.size())) +=
        coeff * h.row(j);
  };
  return hybrid_scores_impl(r, static_cast<Index>(h.rows()), add, g, lambda, t, item_degrees,
                            users);
}

double QuadraticObjective::value(const DenseMatrix& h) const {
  const DenseMatrix ah = kernels::omp::gemm(hessian, h);
  return 0.5 * h.cwiseProduct(ah).sum() + h.cwiseProduct(linear).sum() + constant;
}

DenseMatrix QuadraticObjective::gradient(const DenseMatrix& h) const {
  DenseMatrix g = kernels::omp::gemm(hessian, h);
  g += linear;
  return g;
}

QuadraticObjective build_objective(const InteractionMatrix& r, const DenseMatrix& g,
                                   const CoRMLHyperparams& hp) {
  const Index n = r.n_items();
  if (g.rows() != n || g.cols() != n) throw DimensionError("build_objective: G has wrong shape");
  const Vector& d = r.item_degrees();
  const Vector phi = compute_phi(r.user_degrees(), hp.epsilon, hp.t_u);
  const Vector ones_items = Vector::Ones(n);
  const Vector inv_t = degree_power(d, -hp.t);
  const double lam = hp.lambda;

  const DenseMatrix gram_phi = gram(r, phi);
  const DenseMatrix gram_one = gram(r, Vector::Ones(r.n_users()));
  // D^{-1/2} G D^{1/2 - t}: the filter branch mapped into X-space, B = (1-lam) R gs.
  const DenseMatrix gs = scale_rows_cols(g, degree_power(d, -0.5), degree_power(d, 0.5 - hp.t));
  const DenseMatrix phi_gs = kernels::omp::gemm(gram_phi, gs);  // R^T Phi R gs

  QuadraticObjective obj;
  obj.hessian = 2.0 * lam * lam * scale_rows_cols(gram_phi, inv_t, inv_t);
  obj.hessian.diagonal() += hp.theta * d;
  obj.linear = lam * (2.0 * (1.0 - lam) * scale_rows_cols(phi_gs, inv_t, ones_items) -
                      scale_rows_cols(gram_one, inv_t, inv_t));
  const DenseMatrix gram_one_x = scale_rows_cols(gram_one, ones_items, inv_t);  // R^T X
  obj.constant = (1.0 - lam) * (1.0 - lam) * gs.cwiseProduct(phi_gs).sum() -
                 (1.0 - lam) * gs.cwiseProduct(gram_one_x).sum();
  return obj;
}

double transformed_objective(const InteractionMatrix& r, const DenseMatrix& h,
                             const DenseMatrix& g, const CoRMLHyperparams& hp) {
  const Vector& d = r.item_degrees();
  const Vector phi = compute_phi(r.user_degrees(), hp.epsilon, hp.t_u);
  const Vector inv_t = degree_power(d, -hp.t);
  const Vector ones = Vector::Ones(r.n_items());
  const DenseMatrix xh = spmm(r, scale_rows_cols(h, inv_t, ones));
  const DenseMatrix b =
      spmm(r, scale_rows_cols(g, degree_power(d, -0.5), degree_power(d, 0.5 - hp.t)));
  const DenseMatrix ys = hp.lambda * xh + (1.0 - hp.lambda) * b;

  double total = 0.0;
  for (Index u = 0; u < r.n_users(); ++u) {
    double row = phi[u] * ys.row(u).squaredNorm();
    for (Index i : r.row(u)) row -= ys(u, i) * inv_t[i];
    total += row;
  }
  for (Index i = 0; i < r.n_items(); ++i) total += 0.5 * hp.theta * d[i] * h.row(i).squaredNorm();
  return total;
}

Vector penalty_weights(const Vector& item_degrees, PenaltyWeights mode) {
  if (mode == PenaltyWeights::uniform) return Vector::Ones(item_degrees.size());
  return item_degrees.unaryExpr([](double v) { return v > 0.0 ? v : 1.0; });
}

AdmmState AdmmState::zeros(Index n) {
  AdmmState s;
  s.h = DenseMatrix::Zero(n, n);
  s.z = DenseMatrix::Zero(n, n);
  s.dual = DenseMatrix::Zero(n, n);
  return s;
}

HStepSolver::HStepSolver(const DenseMatrix& hessian, const Vector& weights, double rho)
    : weights_(weights), rho_(rho) {
  const Eigen::Index n = hessian.rows();
  if (hessian.cols() != n || weights.size() != n) {
    throw DimensionError("HStepSolver: Hessian and weights disagree");
  }
  DenseMatrix system = hessian;
  system.diagonal() += rho * weights;
  Eigen::LLT<DenseMatrix> llt(system);
  if (llt.info() != Eigen::Success) {
    const auto diag = system.diagonal();
    throw NumericalError("ADMM Hessian factorization failed (diag min " +
                         std::to_string(diag.minCoeff()) + ", max " +
                         std::to_string(diag.maxCoeff()) + ", n " + std::to_string(n) + ")");
  }
  inverse_ = llt.solve(DenseMatrix::Identity(n, n));
  // The inverse of a symmetric matrix is symmetric; remove round-off asymmetry.
  inverse_ = (0.5 * (inverse_ + inverse_.transpose())).eval();
}

DenseMatrix HStepSolver::solve(const DenseMatrix& z, const DenseMatrix& dual,
                               const DenseMatrix& linear) const {
  const DenseMatrix rhs = rho_ * (weights_.asDiagonal() * (z - dual)) - linear;
  DenseMatrix h = kernels::omp::gemm(inverse_, rhs);
  // Per-column multipliers mu_j = (P rhs)_jj / P_jj enforce H_jj = 0.
  const Eigen::Index n = h.rows();
  Vector mu(n);
  for (Eigen::Index j = 0; j < n; ++j) mu[j] = h(j, j) / inverse_(j, j);
  h -= inverse_ * mu.asDiagonal();
  h.diagonal().setZero();
  return h;
}

DenseMatrix admm_h_step(const AdmmState& state, const HStepSolver& solver,
                        const DenseMatrix& linear) {
  return solver.solve(state.z, state.dual, linear);
}

DenseMatrix admm_z_step(const AdmmState& state, const Vector& weights) {
  const Eigen::Index n = state.h.rows();
  if (weights.size() != n) throw DimensionError("admm_z_step: weight length mismatch");
  DenseMatrix z(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    z(i, i) = std::max(state.h(i, i) + state.dual(i, i), 0.0);
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double mij = state.h(i, j) + state.dual(i, j);
      const double mji = state.h(j, i) + state.dual(j, i);
      const double v = (weights[i] * mij + weights[j] * mji) / (weights[i] + weights[j]);
      z(i, j) = z(j, i) = std::max(v, 0.0);
    }
  }
  return z;
}

void admm_dual_step(AdmmState& state, const DenseMatrix& z_prev, double rho) {
  const DenseMatrix gap = state.h - state.z;
  state.dual += gap;
  state.primal_residual = gap.norm();
  state.dual_residual = rho * (state.z - z_prev).norm();
}

AdmmResult solve_admm(const QuadraticObjective& objective, const Vector& weights,
                      const CoRMLHyperparams& hp) {
  hp.validate();
  const auto n = static_cast<Index>(objective.hessian.rows());
  const HStepSolver solver(objective.hessian, weights, hp.rho);

  AdmmResult result;
  result.state = AdmmState::zeros(n);
  AdmmState& s = result.state;
  double best_objective = std::numeric_limits<double>::infinity();
  DenseMatrix best = s.z;

  for (Index it = 1; it <= hp.max_iters; ++it) {
    const DenseMatrix z_prev = s.z;
    s.h = admm_h_step(s, solver, objective.linear);
    s.z = admm_z_step(s, weights);
    s.z.diagonal().setZero();
    admm_dual_step(s, z_prev, hp.rho);
    s.iteration = it;

    const double f = objective.value(s.z);
    if (!std::isfinite(f) || !std::isfinite(s.primal_residual) ||
        !std::isfinite(s.dual_residual)) {
      throw NumericalError("ADMM iterate became non-finite at iteration " + std::to_string(it));
    }
    result.log.push_back({it, s.primal_residual, s.dual_residual, f});
    if (f < best_objective) {
      best_objective = f;
      best = s.z;
    }
    if (s.primal_residual <= hp.tol && s.dual_residual <= hp.tol) {
      result.converged = true;
      break;
    }
  }
  result.h = result.converged ? s.z : best;
  return result;
}

CoRMLFit fit_corml(const InteractionMatrix& r, const CoRMLHyperparams& hp,
                   std::size_t nnz_budget) {
  hp.validate();
  if (r.nnz() == 0) throw DataError("fit_corml: training matrix is empty");
  CoRMLFit fit;
  SvdOptions svd;
  svd.rank = std::min({hp.rank, r.n_users(), r.n_items()});
  svd.seed = hp.seed;
  svd.power_iters = hp.power_iters;
  fit.filter = truncated_svd(r, svd);
  fit.g = build_G(fit.filter);
  const QuadraticObjective objective = build_objective(r, fit.g, hp);
  fit.admm = solve_admm(objective, penalty_weights(r.item_degrees(), hp.weights), hp);
  fit.h = sparsify(fit.admm.h, nnz_budget, SparsifyMode::symmetric);
  return fit;
}

std::size_t default_nnz_budget(Index n_users, Index n_items) {
  return 32 * (static_cast<std::size_t>(n_users) + n_items);
}

}  // namespace corml
