#include "corml/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "corml/error.hpp"

namespace corml {

InteractionMatrix InteractionMatrix::from_pairs(
    Index n_users, Index n_items, std::vector<std::pair<Index, Index>> pairs) {
  for (const auto& [u, i] : pairs) {
    if (u >= n_users || i >= n_items) {
      throw DimensionError("interaction (" + std::to_string(u) + ", " +
                           std::to_string(i) + ") outside " +
                           std::to_string(n_users) + " x " + std::to_string(n_items));
    }
  }
  std::sort(pairs.begin(), pairs.end());
  pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());

  InteractionMatrix m;
  m.n_users_ = n_users;
  m.n_items_ = n_items;
  m.row_ptr_.assign(n_users + 1, 0);
  m.col_ptr_.assign(n_items + 1, 0);
  m.item_idx_.reserve(pairs.size());
  for (const auto& [u, i] : pairs) {
    ++m.row_ptr_[u + 1];
    ++m.col_ptr_[i + 1];
    m.item_idx_.push_back(i);
  }
  for (Index u = 0; u < n_users; ++u) m.row_ptr_[u + 1] += m.row_ptr_[u];
  for (Index i = 0; i < n_items; ++i) m.col_ptr_[i + 1] += m.col_ptr_[i];

  // Pairs are row-major sorted, so filling columns in this order leaves each
  // column's users ascending.
  m.user_idx_.resize(pairs.size());
  std::vector<std::size_t> fill(m.col_ptr_.begin(), m.col_ptr_.end() - 1);
  for (const auto& [u, i] : pairs) m.user_idx_[fill[i]++] = u;

  m.user_degrees_.resize(n_users);
  for (Index u = 0; u < n_users; ++u) {
    m.user_degrees_[u] = static_cast<double>(m.row_ptr_[u + 1] - m.row_ptr_[u]);
  }
  m.item_degrees_.resize(n_items);
  for (Index i = 0; i < n_items; ++i) {
    m.item_degrees_[i] = static_cast<double>(m.col_ptr_[i + 1] - m.col_ptr_[i]);
  }
  return m;
}

std::span<const Index> InteractionMatrix::row(Index u) const {
  return std::span<const Index>(item_idx_).subspan(row_ptr_[u], row_ptr_[u + 1] - row_ptr_[u]);
}

std::span<const Index> InteractionMatrix::col(Index i) const {
  return std::span<const Index>(user_idx_).subspan(col_ptr_[i], col_ptr_[i + 1] - col_ptr_[i]);
}

bool InteractionMatrix::contains(Index u, Index i) const {
  const auto r = row(u);
  return std::binary_search(r.begin(), r.end(), i);
}

CsrView InteractionMatrix::csr() const {
  return CsrView{n_users_, n_items_, row_ptr_, item_idx_, {}};
}

CsrView InteractionMatrix::csc() const {
  return CsrView{n_items_, n_users_, col_ptr_, user_idx_, {}};
}

DenseMatrix InteractionMatrix::to_dense() const {
  DenseMatrix d = DenseMatrix::Zero(n_users_, n_items_);
  for (Index u = 0; u < n_users_; ++u) {
    for (Index i : row(u)) d(u, i) = 1.0;
  }
  return d;
}

std::vector<std::pair<Index, Index>> InteractionMatrix::pairs() const {
  std::vector<std::pair<Index, Index>> out;
  out.reserve(nnz());
  for (Index u = 0; u < n_users_; ++u) {
    for (Index i : row(u)) out.emplace_back(u, i);
  }
  return out;
}

SparseSquareMatrix SparseSquareMatrix::from_sorted_triples(
    Index n, std::vector<Index> rows, std::vector<Index> cols,
    std::vector<double> values) {
  if (rows.size() != cols.size() || rows.size() != values.size()) {
    throw DataError("coordinate arrays differ in length");
  }
  SparseSquareMatrix m(n);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (rows[k] >= n || cols[k] >= n) throw DataError("coordinate out of range");
    if (values[k] == 0.0 || !std::isfinite(values[k])) {
      throw DataError("explicit zero or non-finite value in sparse matrix");
    }
    if (k > 0 && std::pair(rows[k - 1], cols[k - 1]) >= std::pair(rows[k], cols[k])) {
      throw DataError("coordinates not strictly sorted by (row, col)");
    }
    ++m.row_ptr_[rows[k] + 1];
  }
  for (Index i = 0; i < n; ++i) m.row_ptr_[i + 1] += m.row_ptr_[i];
  m.cols_ = std::move(cols);
  m.values_ = std::move(values);
  return m;
}

SparseSquareMatrix SparseSquareMatrix::from_dense(const DenseMatrix& d) {
  if (d.rows() != d.cols()) throw DimensionError("from_dense: matrix is not square");
  SparseSquareMatrix m(static_cast<Index>(d.rows()));
  for (Eigen::Index i = 0; i < d.rows(); ++i) {
    for (Eigen::Index j = 0; j < d.cols(); ++j) {
      if (d(i, j) != 0.0) {
        m.cols_.push_back(static_cast<Index>(j));
        m.values_.push_back(d(i, j));
      }
    }
    m.row_ptr_[i + 1] = m.cols_.size();
  }
  return m;
}

std::span<const Index> SparseSquareMatrix::row_cols(Index i) const {
  return std::span<const Index>(cols_).subspan(row_ptr_[i], row_ptr_[i + 1] - row_ptr_[i]);
}

std::span<const double> SparseSquareMatrix::row_values(Index i) const {
  return std::span<const double>(values_).subspan(row_ptr_[i], row_ptr_[i + 1] - row_ptr_[i]);
}

double SparseSquareMatrix::at(Index i, Index j) const {
  const auto c = row_cols(i);
  const auto it = std::lower_bound(c.begin(), c.end(), j);
  if (it == c.end() || *it != j) return 0.0;
  return row_values(i)[static_cast<std::size_t>(it - c.begin())];
}

CsrView SparseSquareMatrix::csr() const { return CsrView{n_, n_, row_ptr_, cols_, values_}; }

DenseMatrix SparseSquareMatrix::to_dense() const {
  DenseMatrix d = DenseMatrix::Zero(n_, n_);
  for (Index i = 0; i < n_; ++i) {
    const auto c = row_cols(i);
    const auto v = row_values(i);
    for (std::size_t k = 0; k < c.size(); ++k) d(i, c[k]) = v[k];
  }
  return d;
}

bool SparseSquareMatrix::is_symmetric() const {
  for (Index i = 0; i < n_; ++i) {
    const auto c = row_cols(i);
    const auto v = row_values(i);
    for (std::size_t k = 0; k < c.size(); ++k) {
      if (at(c[k], i) != v[k]) return false;
    }
  }
  return true;
}

std::vector<Index> SparseSquareMatrix::entry_rows() const {
  std::vector<Index> rows(nnz());
  for (Index i = 0; i < n_; ++i) {
    std::fill(rows.begin() + static_cast<std::ptrdiff_t>(row_ptr_[i]),
              rows.begin() + static_cast<std::ptrdiff_t>(row_ptr_[i + 1]), i);
  }
  return rows;
}

Vector degree_power(const Vector& degrees, double exponent) {
  if (!std::isfinite(exponent)) throw UsageError("degree_power: exponent must be finite");
  Vector out(degrees.size());
  for (Eigen::Index i = 0; i < degrees.size(); ++i) {
    out[i] = degrees[i] > 0.0 ? std::pow(degrees[i], exponent) : 0.0;
  }
  return out;
}

DenseMatrix scale_rows_cols(const DenseMatrix& m, const Vector& left, const Vector& right) {
  if (left.size() != m.rows() || right.size() != m.cols()) {
    throw DimensionError("scale_rows_cols: vector lengths do not match the matrix");
  }
  DenseMatrix out(m.rows(), m.cols());
  const auto rows = static_cast<std::int64_t>(m.rows());
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < rows; ++i) {
    out.row(i) = left[i] * m.row(i).cwiseProduct(right.transpose());
  }
  return out;
}

SparseSquareMatrix scale_rows_cols(const SparseSquareMatrix& m, const Vector& left,
                                   const Vector& right) {
  if (left.size() != m.n() || right.size() != m.n()) {
    throw DimensionError("scale_rows_cols: vector lengths do not match the matrix");
  }
  std::vector<Index> rows, cols;
  std::vector<double> vals;
  for (Index i = 0; i < m.n(); ++i) {
    const auto c = m.row_cols(i);
    const auto v = m.row_values(i);
    for (std::size_t k = 0; k < c.size(); ++k) {
      const double s = left[i] * v[k] * right[c[k]];
      if (s != 0.0) {
        rows.push_back(i);
        cols.push_back(c[k]);
        vals.push_back(s);
      }
    }
  }
  return SparseSquareMatrix::from_sorted_triples(m.n(), std::move(rows), std::move(cols),
                                                 std::move(vals));
}

DenseMatrix spmm(const InteractionMatrix& a, const DenseMatrix& b) {
  return kernels::omp::spmm(a.csr(), b);
}

DenseMatrix spmm(const SparseSquareMatrix& a, const DenseMatrix& b) {
  return kernels::omp::spmm(a.csr(), b);
}

DenseMatrix spmm_transpose(const InteractionMatrix& a, const DenseMatrix& b) {
  return kernels::omp::spmm_transpose(a.csc(), b);
}

DenseMatrix gram(const InteractionMatrix& r, const Vector& row_scale) {
  return kernels::omp::gram(r.csr(), r.csc(),
                            std::span<const double>(row_scale.data(),
                                                    static_cast<std::size_t>(row_scale.size())));
}

namespace {

struct Candidate {
  double magnitude;
  Index row;
  Index col;
};

// Larger magnitude first, then (row, col) ascending.
bool ranks_before(const Candidate& a, const Candidate& b) {
  if (a.magnitude != b.magnitude) return a.magnitude > b.magnitude;
  return std::pair(a.row, a.col) < std::pair(b.row, b.col);
}

template <class Lookup>
SparseSquareMatrix select(Index n, std::vector<Candidate> cands, std::size_t budget,
                          SparsifyMode mode, Lookup value_at) {
  std::sort(cands.begin(), cands.end(), ranks_before);
  std::vector<std::pair<Index, Index>> keep;
  std::size_t used = 0;
  for (const auto& c : cands) {
    const std::size_t cost = (mode == SparsifyMode::symmetric && c.row != c.col) ? 2 : 1;
    if (used + cost > budget) break;
    used += cost;
    keep.emplace_back(c.row, c.col);
    if (cost == 2) keep.emplace_back(c.col, c.row);
  }
  std::sort(keep.begin(), keep.end());
  std::vector<Index> rows, cols;
  std::vector<double> vals;
  rows.reserve(keep.size());
  cols.reserve(keep.size());
  vals.reserve(keep.size());
  for (const auto& [i, j] : keep) {
    rows.push_back(i);
    cols.push_back(j);
    vals.push_back(value_at(i, j));
  }
  return SparseSquareMatrix::from_sorted_triples(n, std::move(rows), std::move(cols),
                                                 std::move(vals));
}

}  // namespace

SparseSquareMatrix sparsify(const DenseMatrix& m, std::size_t nnz_budget, SparsifyMode mode) {
  if (m.rows() != m.cols()) throw DimensionError("sparsify: matrix is not square");
  const auto n = static_cast<Index>(m.rows());
  if (mode == SparsifyMode::symmetric && m != m.transpose()) {
    throw DataError("sparsify: symmetric mode needs a symmetric matrix");
  }
  std::vector<Candidate> cands;
  for (Index i = 0; i < n; ++i) {
    for (Index j = (mode == SparsifyMode::symmetric ? i : 0); j < n; ++j) {
      if (m(i, j) != 0.0) cands.push_back({std::abs(m(i, j)), i, j});
    }
  }
  return select(n, std::move(cands), nnz_budget, mode,
                [&](Index i, Index j) { return m(i, j); });
}

SparseSquareMatrix sparsify(const SparseSquareMatrix& m, std::size_t nnz_budget,
                            SparsifyMode mode) {
  if (mode == SparsifyMode::symmetric && !m.is_symmetric()) {
    throw DataError("sparsify: symmetric mode needs a symmetric matrix");
  }
  if (nnz_budget >= m.nnz()) return m;
  std::vector<Candidate> cands;
  for (Index i = 0; i < m.n(); ++i) {
    const auto c = m.row_cols(i);
    const auto v = m.row_values(i);
    for (std::size_t k = 0; k < c.size(); ++k) {
      if (mode == SparsifyMode::symmetric && c[k] < i) continue;
      cands.push_back({std::abs(v[k]), i, c[k]});
    }
  }
  return select(m.n(), std::move(cands), nnz_budget, mode,
                [&](Index i, Index j) { return m.at(i, j); });
}

}  // namespace corml
