#include <doctest.h>

#include <cmath>

#include "corml/error.hpp"
#include "corml/signal.hpp"
#include "oracles.hpp"
#include "synthetic.hpp"
#include "test_util.hpp"

using namespace corml;

TEST_SUITE("signal") {
  TEST_CASE("EASE matches the constrained least-squares oracle") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const auto r = testing::random_interactions(20, 12, 0.3, seed);
      const auto ease = fit_ease(r, 2.0);
      CHECK(testing::max_abs_diff(ease.c, testing::ease_kkt_oracle(r.to_dense(), 2.0)) < 1e-8);
      CHECK(ease.c.diagonal().cwiseAbs().maxCoeff() == 0.0);
    }
    CHECK_THROWS_AS(fit_ease(testing::random_interactions(5, 4, 0.5, 1), -1.0), UsageError);
  }

  TEST_CASE("truncated SVD recovers the leading singular values") {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      const auto r = testing::random_interactions(30, 20, 0.2, seed);
      SvdOptions opts;
      opts.rank = 5;
      opts.seed = seed;
      const auto f = truncated_svd(r, opts);
      const Vector exact = testing::dense_singular_values(testing::normalized_dense(r.to_dense()));
      REQUIRE(f.rank() == 5);
      for (Index k = 0; k < 5; ++k) CHECK(std::abs(f.singular_values[k] - exact[k]) < 1e-6);
      const DenseMatrix gram = f.v.transpose() * f.v;
      CHECK(testing::max_abs_diff(gram, DenseMatrix::Identity(5, 5)) < 1e-10);
    }
  }

  TEST_CASE("extra power iterations sharpen a flat spectrum") {
    // 40x30 at rank 8 leaves a small spectral gap; 4 iterations land near 1e-4
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const auto r = testing::random_interactions(40, 30, 0.2, seed);
      const Vector exact = testing::dense_singular_values(testing::normalized_dense(r.to_dense()));
      double prev = INFINITY;
      for (Index iters : {2, 4, 8}) {
        SvdOptions opts;
        opts.rank = 8;
        opts.seed = seed;
        opts.power_iters = iters;
        const auto f = truncated_svd(r, opts);
        double worst = 0.0;
        for (Index k = 0; k < 8; ++k) worst = std::max(worst, std::abs(f.singular_values[k] - exact[k]));
        CHECK(worst <= prev);
        prev = worst;
      }
      CHECK(prev < 1e-6);
    }
  }

  TEST_CASE("SVD is deterministic for a seed and validates the rank") {
    const auto r = testing::random_interactions(25, 15, 0.2, 3);
    SvdOptions opts;
    opts.rank = 5;
    opts.seed = 4;
    const auto a = truncated_svd(r, opts);
    const auto b = truncated_svd(r, opts);
    CHECK(a.v == b.v);
    opts.rank = 16;
    CHECK_THROWS_AS(truncated_svd(r, opts), UsageError);
    opts.rank = 0;
    CHECK_THROWS_AS(truncated_svd(r, opts), UsageError);
  }

  TEST_CASE("rank-deficient input is flagged") {
    // two identical users -> rank 1
    const auto r = InteractionMatrix::from_pairs(2, 3, {{0, 0}, {0, 1}, {1, 0}, {1, 1}, {0, 2}, {1, 2}});
    SvdOptions opts;
    opts.rank = 2;
    const auto f = truncated_svd(r, opts);
    CHECK(f.rank_deficient);
    CHECK(f.rank() == 1);
  }

  TEST_CASE("GF-CF scores match the dense product") {
    const auto r = testing::random_interactions(30, 20, 0.2, 6);
    SvdOptions opts;
    opts.rank = 6;
    const auto f = truncated_svd(r, opts);
    CHECK(testing::max_abs_diff(score_gfcf(r, f), testing::gfcf_dense_oracle(r.to_dense(), f.v)) < 1e-10);
  }

  TEST_CASE("GF-CF at full rank reproduces R") {
    const auto r = testing::random_interactions(15, 10, 0.3, 8);
    SvdOptions opts;
    opts.rank = 10;
    const auto f = truncated_svd(r, opts);
    REQUIRE_FALSE(f.rank_deficient);
    CHECK(testing::max_abs_diff(score_gfcf(r, f), r.to_dense()) < 1e-9);
  }

  TEST_CASE("G is hollow, symmetric and nonnegative; the sparse form keeps its largest pairs") {
    const auto r = testing::random_interactions(40, 25, 0.15, 12);
    SvdOptions opts;
    opts.rank = 6;
    const auto f = truncated_svd(r, opts);
    const DenseMatrix g = build_G(f);
    CHECK(g == g.transpose());
    CHECK(g.diagonal().cwiseAbs().maxCoeff() == 0.0);
    CHECK(g.minCoeff() >= 0.0);
    const DenseMatrix vv = f.v * f.v.transpose();
    for (Index i = 0; i < 25; ++i) {
      for (Index j = 0; j < 25; ++j) {
        if (i != j) CHECK(g(i, j) == doctest::Approx(std::max(0.0, vv(i, j))).epsilon(1e-12).scale(1.0));
      }
    }
    for (std::size_t budget : {10u, 60u, 10000u}) {
      const auto s = build_G_sparse(f, budget, 7);
      CHECK(s.nnz() <= budget);
      CHECK(s.is_symmetric());
      CHECK(testing::max_abs_diff(s.to_dense(), sparsify(g, budget, SparsifyMode::symmetric).to_dense()) < 1e-12);
    }
  }

  TEST_CASE("filter matrix rows accumulate") {
    const auto r = testing::random_interactions(30, 12, 0.2, 2);
    SvdOptions opts;
    opts.rank = 4;
    const auto f = truncated_svd(r, opts);
    const auto dense = FilterMatrix::build(f, 100, 1000);
    const auto sparse = FilterMatrix::build(f, 5, 1000);
    CHECK(dense.is_dense());
    CHECK_FALSE(sparse.is_dense());
    std::vector<double> a(12, 1.0), b(12, 1.0);
    dense.add_row(3, 2.0, a);
    sparse.add_row(3, 2.0, b);
    const DenseMatrix g = build_G(f);
    for (Index j = 0; j < 12; ++j) {
      CHECK(a[j] == doctest::Approx(1.0 + 2.0 * g(3, j)));
      CHECK(b[j] == doctest::Approx(a[j]));
    }
  }
}
