#include <doctest.h>

#include <cmath>

#include "corml/error.hpp"
#include "corml/solver.hpp"
#include "oracles.hpp"
#include "synthetic.hpp"
#include "test_util.hpp"

using namespace corml;

namespace {

struct Instance {
  InteractionMatrix r;
  DenseMatrix g;
  CoRMLHyperparams hp;
};

Instance make_instance(std::uint64_t seed, Index users, Index items, double t) {
  Instance in;
  in.r = testing::random_interactions(users, items, 0.25, seed);
  in.hp.t = t;
  in.hp.rank = std::min<Index>(4, std::min(users, items));
  in.hp.seed = seed;
  SvdOptions svd;
  svd.rank = in.hp.rank;
  svd.seed = seed;
  in.g = build_G(truncated_svd(in.r, svd));
  return in;
}

AdmmResult toy_run(double rho) {
  const auto r = InteractionMatrix::from_pairs(3, 3, {{0, 0}, {0, 1}, {1, 1}, {1, 2}, {2, 0}, {2, 2}});
  CoRMLHyperparams hp;
  hp.t = 0.0;
  hp.rank = 2;
  hp.tol = 1e-6;
  hp.rho = rho;
  SvdOptions svd;
  svd.rank = 2;
  const auto obj = build_objective(r, build_G(truncated_svd(r, svd)), hp);
  return solve_admm(obj, penalty_weights(r.item_degrees(), hp.weights), hp);
}

}  // namespace

TEST_SUITE("solver_defaults") {
  TEST_CASE("the 3x3 toy converges within 50 iterations at the default penalty") {
    const auto res = toy_run(CoRMLHyperparams{}.rho);
    CHECK(res.converged);
    CHECK(res.log.back().primal_residual < 1e-6);
    CHECK(res.log.back().dual_residual < 1e-6);
  }
}

TEST_SUITE("solver") {
  TEST_CASE("hyperparameters are validated") {
    CoRMLHyperparams hp;
    CHECK_NOTHROW(hp.validate());
    hp.lambda = 1.5;
    CHECK_THROWS_AS(hp.validate(), UsageError);
    hp = {};
    hp.rho = 0.0;
    CHECK_THROWS_AS(hp.validate(), UsageError);
    hp = {};
    hp.t = NAN;
    CHECK_THROWS_AS(hp.validate(), UsageError);
  }

  TEST_CASE("phi scales by relative user degree") {
    Vector d(3);
    d << 1.0, 4.0, 16.0;
    const Vector phi = compute_phi(d, 0.1, 0.5);
    CHECK(phi[2] == doctest::Approx(0.1));
    CHECK(phi[1] == doctest::Approx(0.2));
    CHECK(phi[0] == doctest::Approx(0.4));
    CHECK_THROWS_AS(compute_phi(Vector::Zero(3), 0.1, 0.5), DataError);
  }

  TEST_CASE("exact ranking weights count strict violations") {
    const std::vector<double> y{3.0, 1.0, 2.0, 2.0};
    const std::vector<Index> pos{1, 2};
    const auto w = exact_ranking_weights(y, pos);
    CHECK(w.uninteracted == std::vector<Index>{0, 3});
    CHECK(w.alpha == std::vector<double>{-1.0, -0.5});
    CHECK(w.beta == std::vector<double>{1.0, 0.5});
  }

  TEST_CASE("approximate weights at zero scores") {
    const std::vector<double> y(5, 0.0);
    const std::vector<Index> pos{0, 3};
    const auto w = approx_ranking_weights(y, pos, 0.3);
    CHECK(w.alpha == std::vector<double>{-1.0, -1.0});
    CHECK(w.beta == std::vector<double>{0.0, 0.0, 0.0});
    CHECK_THROWS_AS(approx_ranking_weights(y, pos, 0.0), UsageError);
  }

  TEST_CASE("loss follows its definition") {
    const auto r = testing::random_interactions(6, 5, 0.4, 2);
    const DenseMatrix y = DenseMatrix::Random(6, 5);
    const Vector phi = Vector::LinSpaced(6, 0.1, 0.6);
    double expect = 0.0;
    for (Index u = 0; u < 6; ++u) {
      for (Index i = 0; i < 5; ++i) expect += y(u, i) * (phi[u] * y(u, i) - (r.contains(u, i) ? 1.0 : 0.0));
    }
    CHECK(corml_loss(y, r, phi) == doctest::Approx(expect).epsilon(1e-12));
  }

  TEST_CASE("hybrid scores match the dense formula for sparse and dense H") {
    const auto in = make_instance(3, 12, 9, 0.2);
    const DenseMatrix h = testing::random_hollow_symmetric(9, 0.5, 4, true);
    const Vector d = in.r.item_degrees();
    const Vector a = d.array().pow(-in.hp.t).matrix(), b = d.array().pow(in.hp.t).matrix();
    const Vector c = d.array().pow(-0.5).matrix(), e = d.array().pow(0.5).matrix();
    const double lam = 0.6;
    const DenseMatrix expect =
        in.r.to_dense() * (lam * a.asDiagonal() * h * b.asDiagonal() + (1 - lam) * c.asDiagonal() * in.g * e.asDiagonal());
    const FilterMatrix g(in.g);
    CHECK(testing::max_abs_diff(hybrid_scores(in.r, h, g, lam, in.hp.t, d), expect) < 1e-12);
    CHECK(testing::max_abs_diff(hybrid_scores(in.r, SparseSquareMatrix::from_dense(h), g, lam, in.hp.t, d), expect) < 1e-12);
    const std::vector<Index> users{5, 2};
    const DenseMatrix some = hybrid_scores(in.r, h, g, lam, in.hp.t, d, users);
    CHECK(testing::max_abs_diff(some.row(0), expect.row(5)) < 1e-12);
    CHECK(testing::max_abs_diff(some.row(1), expect.row(2)) < 1e-12);
  }

  TEST_CASE("the quadratic form equals the direct objective") {
    for (double t : {-0.2, 0.0, 0.1, 0.3}) {
      for (double lam : {0.0, 0.5, 1.0}) {
        auto in = make_instance(7, 15, 10, t);
        in.hp.lambda = lam;
        const auto obj = build_objective(in.r, in.g, in.hp);
        for (std::uint64_t s = 1; s <= 3; ++s) {
          const DenseMatrix h = testing::random_hollow_symmetric(10, 0.6, s, true);
          const double direct = transformed_objective(in.r, h, in.g, in.hp);
          CHECK(obj.value(h) == doctest::Approx(direct).epsilon(1e-10));
        }
        CHECK(obj.value(DenseMatrix::Zero(10, 10)) ==
              doctest::Approx(transformed_objective(in.r, DenseMatrix::Zero(10, 10), in.g, in.hp)).epsilon(1e-10));
      }
    }
  }

  TEST_CASE("gradient matches finite differences") {
    const auto in = make_instance(5, 10, 6, 0.1);
    const auto obj = build_objective(in.r, in.g, in.hp);
    const DenseMatrix h = testing::random_hollow_symmetric(6, 0.7, 9, true);
    const DenseMatrix grad = obj.gradient(h);
    const double step = 1e-6;
    for (Index i = 0; i < 6; ++i) {
      for (Index j = 0; j < 6; ++j) {
        DenseMatrix hp = h, hm = h;
        hp(i, j) += step;
        hm(i, j) -= step;
        CHECK(grad(i, j) == doctest::Approx((obj.value(hp) - obj.value(hm)) / (2 * step)).epsilon(1e-5));
      }
    }
  }

  TEST_CASE("H-step solves its constrained subproblem") {
    const auto in = make_instance(11, 14, 8, 0.05);
    const auto obj = build_objective(in.r, in.g, in.hp);
    const Vector a = penalty_weights(in.r.item_degrees(), PenaltyWeights::degree);
    const HStepSolver solver(obj.hessian, a, 2.0);
    const DenseMatrix z = testing::random_hollow_symmetric(8, 0.5, 1, true);
    const DenseMatrix u = DenseMatrix::Random(8, 8) * 0.1;
    const DenseMatrix h = solver.solve(z, u, obj.linear);
    CHECK(h.diagonal().cwiseAbs().maxCoeff() == 0.0);
    DenseMatrix system = obj.hessian;
    system.diagonal() += 2.0 * a;
    const DenseMatrix rhs = 2.0 * (a.asDiagonal() * (z - u)) - obj.linear;
    DenseMatrix stationarity = system * h - rhs;
    stationarity.diagonal().setZero();  // the multipliers live on the diagonal
    CHECK(stationarity.cwiseAbs().maxCoeff() < 1e-9);
  }

  TEST_CASE("Z-step is the weighted projection") {
    AdmmState s = AdmmState::zeros(5);
    s.h = DenseMatrix::Random(5, 5);
    s.dual = DenseMatrix::Random(5, 5) * 0.3;
    Vector a(5);
    a << 1.0, 2.0, 5.0, 1.0, 3.0;
    const DenseMatrix z = admm_z_step(s, a);
    CHECK(z == z.transpose());
    CHECK(z.minCoeff() >= 0.0);
    const DenseMatrix m = s.h + s.dual;
    for (Index i = 0; i < 5; ++i) {
      for (Index j = i + 1; j < 5; ++j) {
        // scan the scalar problem min a_i (v - m_ij)^2 + a_j (v - m_ji)^2 over v >= 0
        double best_v = 0.0, best_f = INFINITY;
        for (int k = 0; k <= 200000; ++k) {
          const double v = k * 1e-5;
          const double f = a[i] * std::pow(v - m(i, j), 2) + a[j] * std::pow(v - m(j, i), 2);
          if (f < best_f) {
            best_f = f;
            best_v = v;
          }
        }
        CHECK(z(i, j) == doctest::Approx(best_v).epsilon(1e-4).scale(1.0));
      }
    }
  }

  TEST_CASE("ADMM returns a feasible iterate that improves on zero") {
    auto in = make_instance(13, 20, 12, 0.1);
    in.hp.tol = 1e-7;
    in.hp.max_iters = 3000;
    const auto obj = build_objective(in.r, in.g, in.hp);
    const auto res = solve_admm(obj, penalty_weights(in.r.item_degrees(), in.hp.weights), in.hp);
    CHECK(res.converged);
    CHECK(res.h == res.h.transpose());
    CHECK(res.h.diagonal().cwiseAbs().maxCoeff() == 0.0);
    CHECK(res.h.minCoeff() >= 0.0);
    CHECK(obj.value(res.h) <= obj.value(DenseMatrix::Zero(12, 12)));
    CHECK(!res.log.empty());
    CHECK(res.log.back().iteration == res.state.iteration);
  }

  TEST_CASE("the 3x3 toy converges within 50 iterations at a matched penalty") {
    // The Hessian diagonal here is about 0.4, so rho * d_i = 0.4 balances it.
    const auto res = toy_run(0.2);
    CHECK(res.converged);
    CHECK(res.state.iteration <= 50);
    CHECK(res.log.back().primal_residual < 1e-6);
    CHECK(res.log.back().dual_residual < 1e-6);
  }

  TEST_CASE("Z-step pre-clamp solves the weighted Lyapunov equation") {
    AdmmState s = AdmmState::zeros(4);
    s.h = DenseMatrix::Random(4, 4);
    Vector a(4);
    a << 1.0, 3.0, 2.0, 7.0;
    const DenseMatrix m = s.h + s.dual;
    DenseMatrix pre(4, 4);
    for (Index i = 0; i < 4; ++i) {
      for (Index j = 0; j < 4; ++j) pre(i, j) = (a[i] * m(i, j) + a[j] * m(j, i)) / (a[i] + a[j]);
    }
    const DenseMatrix lhs = a.asDiagonal() * pre + pre * a.asDiagonal();
    const DenseMatrix rhs = a.asDiagonal() * m + m.transpose() * a.asDiagonal();
    CHECK(testing::max_abs_diff(lhs, rhs) < 1e-10);
    CHECK(testing::max_abs_diff(admm_z_step(s, a), pre.cwiseMax(0.0)) < 1e-15);
  }

  TEST_CASE("lambda zero learns nothing") {
    auto in = make_instance(2, 15, 9, 0.0);
    in.hp.lambda = 0.0;
    const auto fit = fit_corml(in.r, in.hp, 1000);
    CHECK(fit.h.nnz() == 0);
  }

  TEST_CASE("fit_corml honors the budget and returns a symmetric H") {
    auto in = make_instance(4, 30, 15, 0.1);
    const auto fit = fit_corml(in.r, in.hp, 40);
    CHECK(fit.h.nnz() <= 40);
    CHECK(fit.h.is_symmetric());
    for (double v : fit.h.values()) CHECK(v > 0.0);
    CHECK(default_nnz_budget(10, 5) == 480);
  }
}
