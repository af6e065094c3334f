#pragma once

// Row-parallel compute kernels. Every kernel exists twice: `serial` is the
// straightforward reference kept for testing, `omp` is the OpenMP version the
// library calls. The omp kernels fix the per-output-element reduction order
// so results are bitwise identical for any thread count.

#include <cstddef>
#include <cstdint>
#include <span>

#include <Eigen/Core>

namespace corml {

using Index = std::uint32_t;
using DenseMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Non-owning compressed-row view. An empty `values` span means every stored
/// entry is an implicit 1.0 (binary interaction data).
struct CsrView {
  Index n_rows = 0;
  Index n_cols = 0;
  std::span<const std::size_t> row_ptr;
  std::span<const Index> cols;
  std::span<const double> values;

  double value(std::size_t k) const { return values.empty() ? 1.0 : values[k]; }
  std::size_t nnz() const { return cols.size(); }
};

namespace kernels {

namespace serial {

/// out = A * B
DenseMatrix spmm(const CsrView& a, const DenseMatrix& b);

/// out = A^T * B, accumulated in row order of A.
DenseMatrix spmm_transpose(const CsrView& a, const DenseMatrix& b);

/// out = R^T diag(row_scale) R for an implicit-ones R; upper triangle
/// accumulated in ascending row order, then mirrored.
DenseMatrix gram(const CsrView& r, std::span<const double> row_scale);

/// Naive triple loop, ascending inner index.
DenseMatrix gemm(const DenseMatrix& a, const DenseMatrix& b);

}  // namespace serial

namespace omp {

DenseMatrix spmm(const CsrView& a, const DenseMatrix& b);

/// `a_t` is the transpose of A in compressed-row form (i.e. A in CSC).
/// Rows of the output are independent, so each is owned by one thread.
DenseMatrix spmm_transpose(const CsrView& a_t, const DenseMatrix& b);

/// `r_t` is R^T in compressed-row form. Output row i sums over the users of
/// item i in ascending order, which matches the serial accumulation order.
DenseMatrix gram(const CsrView& r, const CsrView& r_t,
                 std::span<const double> row_scale);

/// Column-blocked product with a fixed block width, so every block has the
/// same shape (and the same Eigen kernel path) whatever the thread count.
DenseMatrix gemm(const DenseMatrix& a, const DenseMatrix& b);

}  // namespace omp

/// Sets the worker count used by the omp kernels (0 = runtime default).
void set_threads(int n);
int max_threads();

}  // namespace kernels
}  // namespace corml
