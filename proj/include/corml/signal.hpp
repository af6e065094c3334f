#pragma once

#include <cstdint>
#include <span>
#include <variant>

#include "corml/sparse.hpp"

namespace corml {

/// Top-k right singular factor of D_U^{-1/2} R D_I^{-1/2}.
struct GraphFilterFactor {
  DenseMatrix v;            // n_items x k, orthonormal columns
  Vector singular_values;   // k, nonincreasing
  Vector item_degrees;
  /// Set when fewer than the requested k directions had a nonzero singular
  /// value; `v` then holds only the achievable ones.
  bool rank_deficient = false;

  Index rank() const { return static_cast<Index>(v.cols()); }
};

struct SvdOptions {
  Index rank = 64;
  std::uint64_t seed = 0;
  Index power_iters = 4;
  Index oversampling = 10;
};

/// Randomized range finder (Gaussian test matrix, QR-orthonormalized power
/// iterations) followed by an exact SVD of the small projected matrix.
GraphFilterFactor truncated_svd(const InteractionMatrix& r, const SvdOptions& opts);

/// Closed-form linear autoencoder: C = I - P diag(1 / diag(P)) with
/// P = (R^T R + l2 I)^{-1}. diag(C) is exactly zero.
struct EaseModel {
  DenseMatrix c;
  double l2 = 0.0;
};

EaseModel fit_ease(const InteractionMatrix& r, double l2);

/// R D_I^{-1/2} V V^T D_I^{1/2}, evaluated right to left through the k-wide
/// factor so V V^T is never formed.
DenseMatrix score_gfcf(const InteractionMatrix& r, const GraphFilterFactor& factor);

/// G = relu(V V^T with its diagonal zeroed): hollow, symmetric, nonnegative.
DenseMatrix build_G(const GraphFilterFactor& factor);

/// Same matrix built one row block at a time and kept sparse: only the
/// `nnz_budget` largest entries survive (pair-wise, so symmetry holds).
SparseSquareMatrix build_G_sparse(const GraphFilterFactor& factor, std::size_t nnz_budget,
                                  Index block_rows = 256);

/// G as used for scoring: dense up to `dense_item_limit` items, otherwise the
/// blockwise sparsified form.
class FilterMatrix {
 public:
  static constexpr std::size_t kDefaultDenseItemLimit = 20000;

  FilterMatrix() = default;
  static FilterMatrix build(const GraphFilterFactor& factor,
                            std::size_t dense_item_limit, std::size_t nnz_budget);
  explicit FilterMatrix(DenseMatrix g) : g_(std::move(g)) {}
  explicit FilterMatrix(SparseSquareMatrix g) : g_(std::move(g)) {}

  bool is_dense() const { return std::holds_alternative<DenseMatrix>(g_); }
  Index n() const;

  /// out += coeff * G[row, :]
  void add_row(Index row, double coeff, std::span<double> out) const;
  DenseMatrix to_dense() const;

 private:
  std::variant<DenseMatrix, SparseSquareMatrix> g_;
};

}  // namespace corml
