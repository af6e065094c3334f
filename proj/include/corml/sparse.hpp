#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "corml/kernels.hpp"

namespace corml {

using Vector = Eigen::VectorXd;

/// Binary user x item matrix of implicit feedback. Stored twice, row-major
/// (items of each user) and column-major (users of each item), both with
/// strictly increasing indices. Immutable after construction.
class InteractionMatrix {
 public:
  InteractionMatrix() = default;

  /// Builds from (user, item) pairs. Duplicates collapse to one entry; an
  /// index outside [0, n_users) x [0, n_items) throws DimensionError.
  static InteractionMatrix from_pairs(Index n_users, Index n_items,
                                      std::vector<std::pair<Index, Index>> pairs);

  Index n_users() const { return n_users_; }
  Index n_items() const { return n_items_; }
  std::size_t nnz() const { return item_idx_.size(); }

  std::span<const Index> row(Index u) const;
  std::span<const Index> col(Index i) const;
  bool contains(Index u, Index i) const;

  /// d_u, d_i as doubles (exact integer counts).
  const Vector& user_degrees() const { return user_degrees_; }
  const Vector& item_degrees() const { return item_degrees_; }

  CsrView csr() const;
  CsrView csc() const;
  DenseMatrix to_dense() const;

  /// All (u, i) pairs in row-major order.
  std::vector<std::pair<Index, Index>> pairs() const;

  friend bool operator==(const InteractionMatrix& a, const InteractionMatrix& b) {
    return a.n_users_ == b.n_users_ && a.n_items_ == b.n_items_ &&
           a.row_ptr_ == b.row_ptr_ && a.item_idx_ == b.item_idx_;
  }

 private:
  Index n_users_ = 0;
  Index n_items_ = 0;
  std::vector<std::size_t> row_ptr_{0};
  std::vector<Index> item_idx_;
  std::vector<std::size_t> col_ptr_{0};
  std::vector<Index> user_idx_;
  Vector user_degrees_;
  Vector item_degrees_;
};

/// Square matrix in compressed-row form with explicit values. Column indices
/// strictly increase per row and no explicit zeros are stored.
class SparseSquareMatrix {
 public:
  SparseSquareMatrix() = default;
  explicit SparseSquareMatrix(Index n) : n_(n), row_ptr_(n + 1, 0) {}

  /// Takes coordinate triples; they must be sorted by (row, col), unique and
  /// nonzero. Throws DataError otherwise.
  static SparseSquareMatrix from_sorted_triples(
      Index n, std::vector<Index> rows, std::vector<Index> cols,
      std::vector<double> values);
  static SparseSquareMatrix from_dense(const DenseMatrix& m);

  Index n() const { return n_; }
  std::size_t nnz() const { return values_.size(); }

  std::span<const Index> row_cols(Index i) const;
  std::span<const double> row_values(Index i) const;
  double at(Index i, Index j) const;

  CsrView csr() const;
  DenseMatrix to_dense() const;
  bool is_symmetric() const;

  /// Row index of every stored entry, in storage order.
  std::vector<Index> entry_rows() const;
  std::span<const Index> cols() const { return cols_; }
  std::span<const double> values() const { return values_; }

  friend bool operator==(const SparseSquareMatrix&, const SparseSquareMatrix&) = default;

 private:
  Index n_ = 0;
  std::vector<std::size_t> row_ptr_{0};
  std::vector<Index> cols_;
  std::vector<double> values_;
};

/// out[i] = degrees[i]^exponent; a zero degree maps to 0 for every exponent
/// so never-seen items and users carry no signal.
Vector degree_power(const Vector& degrees, double exponent);

/// out[i][j] = left[i] * m[i][j] * right[j]
DenseMatrix scale_rows_cols(const DenseMatrix& m, const Vector& left,
                            const Vector& right);
SparseSquareMatrix scale_rows_cols(const SparseSquareMatrix& m, const Vector& left,
                                   const Vector& right);

DenseMatrix spmm(const InteractionMatrix& a, const DenseMatrix& b);
DenseMatrix spmm(const SparseSquareMatrix& a, const DenseMatrix& b);
/// R^T * B
DenseMatrix spmm_transpose(const InteractionMatrix& a, const DenseMatrix& b);

/// R^T diag(row_scale) R, exactly symmetric.
DenseMatrix gram(const InteractionMatrix& r, const Vector& row_scale);

enum class SparsifyMode {
  /// Each stored entry competes on its own.
  general,
  /// Entries (i, j) and (j, i) are kept or dropped together; the input must
  /// be symmetric. A pair costs two stored values, a diagonal entry one.
  symmetric,
};

/// Keeps the `nnz_budget` largest-magnitude entries (ties: lower (row, col)
/// first) and drops the rest. In symmetric mode selection walks the upper
/// triangle and stops at the first pair that no longer fits.
SparseSquareMatrix sparsify(const DenseMatrix& m, std::size_t nnz_budget,
                            SparsifyMode mode = SparsifyMode::general);
SparseSquareMatrix sparsify(const SparseSquareMatrix& m, std::size_t nnz_budget,
                            SparsifyMode mode = SparsifyMode::general);

}  // namespace corml
