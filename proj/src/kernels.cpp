#include "corml/kernels.hpp"

#include <algorithm>

#include <omp.h>

#include "corml/error.hpp"

namespace corml::kernels {

namespace {

constexpr Eigen::Index kGemmBlock = 64;

void check_inner(Index a_cols, Eigen::Index b_rows, const char* what) {
  if (static_cast<Eigen::Index>(a_cols) != b_rows) {
    throw DimensionError(std::string(what) + ": inner dimensions disagree");
  }
}

}  // namespace

namespace serial {

DenseMatrix spmm(const CsrView& a, const DenseMatrix& b) {
  check_inner(a.n_cols, b.rows(), "spmm");
  DenseMatrix out = DenseMatrix::Zero(a.n_rows, b.cols());
  for (Index r = 0; r < a.n_rows; ++r) {
    for (std::size_t k = a.row_ptr[r]; k < a.row_ptr[r + 1]; ++k) {
      out.row(r) += a.value(k) * b.row(a.cols[k]);
    }
  }
  return out;
}

DenseMatrix spmm_transpose(const CsrView& a, const DenseMatrix& b) {
  check_inner(a.n_rows, b.rows(), "spmm_transpose");
  DenseMatrix out = DenseMatrix::Zero(a.n_cols, b.cols());
  for (Index r = 0; r < a.n_rows; ++r) {
    for (std::size_t k = a.row_ptr[r]; k < a.row_ptr[r + 1]; ++k) {
      out.row(a.cols[k]) += a.value(k) * b.row(r);
    }
  }
  return out;
}

DenseMatrix gram(const CsrView& r, std::span<const double> row_scale) {
  if (row_scale.size() != r.n_rows) {
    throw DimensionError("gram: row_scale length must equal the row count");
  }
  DenseMatrix out = DenseMatrix::Zero(r.n_cols, r.n_cols);
  for (Index u = 0; u < r.n_rows; ++u) {
    const double s = row_scale[u];
    for (std::size_t p = r.row_ptr[u]; p < r.row_ptr[u + 1]; ++p) {
      for (std::size_t q = p; q < r.row_ptr[u + 1]; ++q) {
        out(r.cols[p], r.cols[q]) += s;
      }
    }
  }
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < out.cols(); ++j) out(j, i) = out(i, j);
  }
  return out;
}

DenseMatrix gemm(const DenseMatrix& a, const DenseMatrix& b) {
  check_inner(static_cast<Index>(a.cols()), b.rows(), "gemm");
  DenseMatrix out = DenseMatrix::Zero(a.rows(), b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      for (Eigen::Index j = 0; j < b.cols(); ++j) out(i, j) += aik * b(k, j);
    }
  }
  return out;
}

}  // namespace serial

namespace omp {

DenseMatrix spmm(const CsrView& a, const DenseMatrix& b) {
  check_inner(a.n_cols, b.rows(), "spmm");
  DenseMatrix out = DenseMatrix::Zero(a.n_rows, b.cols());
  const auto n = static_cast<std::int64_t>(a.n_rows);
#pragma omp parallel for schedule(static)
  for (std::int64_t r = 0; r < n; ++r) {
    for (std::size_t k = a.row_ptr[r]; k < a.row_ptr[r + 1]; ++k) {
      out.row(r) += a.value(k) * b.row(a.cols[k]);
    }
  }
  return out;
}

DenseMatrix spmm_transpose(const CsrView& a_t, const DenseMatrix& b) {
  // a_t rows are the output rows; its column indices are rows of A.
  check_inner(a_t.n_cols, b.rows(), "spmm_transpose");
  return spmm(a_t, b);
}

DenseMatrix gram(const CsrView& r, const CsrView& r_t,
                 std::span<const double> row_scale) {
  if (row_scale.size() != r.n_rows) {
    throw DimensionError("gram: row_scale length must equal the row count");
  }
  if (r_t.n_rows != r.n_cols || r_t.n_cols != r.n_rows) {
    throw DimensionError("gram: transpose view does not match");
  }
  const Index n = r.n_cols;
  DenseMatrix out = DenseMatrix::Zero(n, n);
  const auto n64 = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(dynamic, 16)
  for (std::int64_t i = 0; i < n64; ++i) {
    // Users of item i, ascending; for each, items j >= i of that user.
    for (std::size_t p = r_t.row_ptr[i]; p < r_t.row_ptr[i + 1]; ++p) {
      const Index u = r_t.cols[p];
      const double s = row_scale[u];
      const auto begin = r.cols.begin() + static_cast<std::ptrdiff_t>(r.row_ptr[u]);
      const auto end = r.cols.begin() + static_cast<std::ptrdiff_t>(r.row_ptr[u + 1]);
      for (auto it = std::lower_bound(begin, end, static_cast<Index>(i)); it != end; ++it) {
        out(i, *it) += s;
      }
    }
  }
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n64; ++i) {
    for (std::int64_t j = i + 1; j < n64; ++j) out(j, i) = out(i, j);
  }
  return out;
}

DenseMatrix gemm(const DenseMatrix& a, const DenseMatrix& b) {
  check_inner(static_cast<Index>(a.cols()), b.rows(), "gemm");
  DenseMatrix out(a.rows(), b.cols());
  const Eigen::Index n_blocks = (b.cols() + kGemmBlock - 1) / kGemmBlock;
#pragma omp parallel for schedule(dynamic, 1)
  for (Eigen::Index blk = 0; blk < n_blocks; ++blk) {
    const Eigen::Index c0 = blk * kGemmBlock;
    const Eigen::Index w = std::min(kGemmBlock, b.cols() - c0);
    out.middleCols(c0, w).noalias() = a * b.middleCols(c0, w);
  }
  return out;
}

}  // namespace omp

void set_threads(int n) {
  if (n > 0) omp_set_num_threads(n);
}

int max_threads() { return omp_get_max_threads(); }

}  // namespace corml::kernels
