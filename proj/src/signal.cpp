#include "corml/signal.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <random>

#include <Eigen/Cholesky>
#include <Eigen/QR>
#include <Eigen/SVD>

#include "corml/error.hpp"

namespace corml {

namespace {

DenseMatrix orthonormalize(const DenseMatrix& y) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(y);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(y.rows(), y.cols());
  return q;
}

// The normalized matrix A = D_U^{-1/2} R D_I^{-1/2} applied without forming it.
struct NormalizedOperator {
  const InteractionMatrix& r;
  Vector user_scale;
  Vector item_scale;

  explicit NormalizedOperator(const InteractionMatrix& m)
      : r(m),
        user_scale(degree_power(m.user_degrees(), -0.5)),
        item_scale(degree_power(m.item_degrees(), -0.5)) {}

  DenseMatrix apply(const DenseMatrix& x) const {
    DenseMatrix scaled = item_scale.asDiagonal() * x;
    return user_scale.asDiagonal() * spmm(r, scaled);
  }

  DenseMatrix apply_transpose(const DenseMatrix& y) const {
    DenseMatrix scaled = user_scale.asDiagonal() * y;
    return item_scale.asDiagonal() * spmm_transpose(r, scaled);
  }
};

}  // namespace

GraphFilterFactor truncated_svd(const InteractionMatrix& r, const SvdOptions& opts) {
  const Index min_dim = std::min(r.n_users(), r.n_items());
  if (opts.rank < 1 || opts.rank > min_dim) {
    throw UsageError("truncated_svd: rank must lie in [1, " + std::to_string(min_dim) + "]");
  }
  const Index width = std::min<Index>(opts.rank + opts.oversampling, min_dim);
  const NormalizedOperator op(r);

  std::mt19937_64 gen(opts.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  DenseMatrix omega(r.n_items(), width);
  for (Eigen::Index i = 0; i < omega.rows(); ++i) {
    for (Eigen::Index j = 0; j < omega.cols(); ++j) omega(i, j) = normal(gen);
  }

  DenseMatrix q = orthonormalize(op.apply(omega));
  for (Index it = 0; it < opts.power_iters; ++it) {
    q = orthonormalize(op.apply_transpose(q));
    q = orthonormalize(op.apply(q));
  }
  // B^T = A^T Q (items x width); its left singular vectors are the right
  // singular vectors of A restricted to range(Q).
  const Eigen::MatrixXd bt = op.apply_transpose(q);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(bt, Eigen::ComputeThinU);

  const Vector& sv = svd.singularValues();
  const double cutoff = 1e-10 * std::max(sv.size() > 0 ? sv[0] : 0.0, 1e-300);
  Index achievable = 0;
  while (achievable < opts.rank && achievable < sv.size() && sv[achievable] > cutoff) {
    ++achievable;
  }

  GraphFilterFactor f;
  f.v = svd.matrixU().leftCols(achievable);
  f.singular_values = sv.head(achievable);
  f.item_degrees = r.item_degrees();
  f.rank_deficient = achievable < opts.rank;
  // Fix the sign of each column (largest-magnitude entry positive) so the
  // factor does not depend on the SVD's arbitrary sign choice.
  for (Eigen::Index c = 0; c < f.v.cols(); ++c) {
    Eigen::Index arg = 0;
    f.v.col(c).cwiseAbs().maxCoeff(&arg);
    if (f.v(arg, c) < 0.0) f.v.col(c) *= -1.0;
  }
  return f;
}

EaseModel fit_ease(const InteractionMatrix& r, double l2) {
  if (!(l2 > 0.0)) throw UsageError("fit_ease: l2 must be positive");
  const Index n = r.n_items();
  DenseMatrix system = gram(r, Vector::Ones(r.n_users()));
  system.diagonal().array() += l2;
  Eigen::LLT<DenseMatrix> llt(system);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("fit_ease: R^T R + l2 I is not positive definite");
  }
  const DenseMatrix p = llt.solve(DenseMatrix::Identity(n, n));
  EaseModel m;
  m.l2 = l2;
  m.c.resize(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) m.c(i, j) = i == j ? 0.0 : -p(i, j) / p(j, j);
  }
  return m;
}

DenseMatrix score_gfcf(const InteractionMatrix& r, const GraphFilterFactor& factor) {
  if (factor.v.rows() != r.n_items()) throw DimensionError("score_gfcf: factor/item count mismatch");
  const Vector inv_sqrt = degree_power(factor.item_degrees, -0.5);
  const Vector sqrt_deg = degree_power(factor.item_degrees, 0.5);
  const DenseMatrix left = spmm(r, inv_sqrt.asDiagonal() * factor.v);   // users x k
  const DenseMatrix right_t = (sqrt_deg.asDiagonal() * factor.v).transpose();  // k x items
  return kernels::omp::gemm(left, right_t);
}

DenseMatrix build_G(const GraphFilterFactor& factor) {
  const DenseMatrix vt = factor.v.transpose();
  DenseMatrix g = kernels::omp::gemm(factor.v, vt);
  const Eigen::Index n = g.rows();
  for (Eigen::Index i = 0; i < n; ++i) {
    g(i, i) = 0.0;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double v = std::max(g(i, j), 0.0);
      g(i, j) = v;
      g(j, i) = v;
    }
  }
  return g;
}

SparseSquareMatrix build_G_sparse(const GraphFilterFactor& factor, std::size_t nnz_budget,
                                  Index block_rows) {
  struct Entry {
    double value;
    Index row;
    Index col;
  };
  // Used as the heap order, so the top is the weakest kept pair.
  auto stronger = [](const Entry& a, const Entry& b) {
    if (a.value != b.value) return a.value > b.value;
    return std::pair(a.row, a.col) < std::pair(b.row, b.col);
  };
  std::priority_queue<Entry, std::vector<Entry>, decltype(stronger)> heap(stronger);
  const std::size_t max_pairs = nnz_budget / 2;
  const auto n = static_cast<Index>(factor.v.rows());
  const DenseMatrix vt = factor.v.transpose();
  block_rows = std::max<Index>(block_rows, 1);

  for (Index r0 = 0; r0 < n && max_pairs > 0; r0 += block_rows) {
    const Index rows = std::min(block_rows, n - r0);
    const DenseMatrix block = factor.v.middleRows(r0, rows) * vt;
    for (Index bi = 0; bi < rows; ++bi) {
      const Index i = r0 + bi;
      for (Index j = i + 1; j < n; ++j) {
        const double v = block(bi, j);
        if (v <= 0.0) continue;
        const Entry e{v, i, j};
        if (heap.size() < max_pairs) {
          heap.push(e);
        } else if (stronger(e, heap.top())) {
          heap.pop();
          heap.push(e);
        }
      }
    }
  }
  std::vector<std::pair<std::pair<Index, Index>, double>> kept;
  kept.reserve(heap.size() * 2);
  while (!heap.empty()) {
    const Entry e = heap.top();
    heap.pop();
    kept.push_back({{e.row, e.col}, e.value});
    kept.push_back({{e.col, e.row}, e.value});
  }
  std::sort(kept.begin(), kept.end());
  std::vector<Index> rows, cols;
  std::vector<double> vals;
  for (const auto& [rc, v] : kept) {
    rows.push_back(rc.first);
    cols.push_back(rc.second);
    vals.push_back(v);
  }
  return SparseSquareMatrix::from_sorted_triples(n, std::move(rows), std::move(cols),
                                                 std::move(vals));
}

FilterMatrix FilterMatrix::build(const GraphFilterFactor& factor,
                                 std::size_t dense_item_limit, std::size_t nnz_budget) {
  if (static_cast<std::size_t>(factor.v.rows()) <= dense_item_limit) {
    return FilterMatrix(build_G(factor));
  }
  return FilterMatrix(build_G_sparse(factor, nnz_budget));
}

Index FilterMatrix::n() const {
  if (const auto* d = std::get_if<DenseMatrix>(&g_)) return static_cast<Index>(d->rows());
  return std::get<SparseSquareMatrix>(g_).n();
}

void FilterMatrix::add_row(Index row, double coeff, std::span<double> out) const {
  if (const auto* d = std::get_if<DenseMatrix>(&g_)) {
    Eigen::Map<Eigen::RowVectorXd>(out.data(), static_cast<Eigen::Index>(out.size())) +=
        coeff * d->row(row);
    return;
  }
  const auto& s = std::get<SparseSquareMatrix>(g_);
  const auto c = s.row_cols(row);
  const auto v = s.row_values(row);
  for (std::size_t k = 0; k < c.size(); ++k) out[c[k]] += coeff * v[k];
}

DenseMatrix FilterMatrix::to_dense() const {
  if (const auto* d = std::get_if<DenseMatrix>(&g_)) return *d;
  return std::get<SparseSquareMatrix>(g_).to_dense();
}

}  // namespace corml
