#include <Eigen/SVD>

#include "doctest.h"

#include "bipgd/core_qp.hpp"
#include "bipgd/problems.hpp"

using namespace bipgd;

namespace {

double Cond(const Mat& m) {
  const Vec s = Eigen::JacobiSVD<Mat>(m).singularValues();
  return s(0) / s(s.size() - 1);
}

}  // namespace

TEST_SUITE("problems") {
  TEST_CASE("make_conditioned_matrix") {
    const Mat a = make_conditioned_matrix(42, 20, 20, 10.0);
    const double cond = Cond(a);
    CHECK(cond >= 1.0);
    CHECK(cond <= 10.0 + 1e-9);
    CHECK(a == make_conditioned_matrix(42, 20, 20, 10.0));
    CHECK(a != make_conditioned_matrix(43, 20, 20, 10.0));
    CHECK(Cond(make_conditioned_matrix(1, 6, 6, 1.0)) == doctest::Approx(1.0));
    CHECK_THROWS_AS(make_conditioned_matrix(1, 0, 3, 2.0), ConfigError);
  }

  TEST_CASE("sc_synthetic") {
    const BenchmarkProblem p = make_sc_synthetic(0);
    CHECK(p.oracles.dim_x == 20);
    CHECK(p.oracles.dim_y == 20);
    CHECK(p.strongly_convex);
    const auto [x, y] = sample_point(p, 5);
    CHECK(eval_h(p.oracles, x, p.lower_solution(x)) <= 1e-20);
    CHECK(finite_diff_check(p, x, y).max_rel_error <= 1e-5);
    const BenchmarkProblem q = make_sc_synthetic(0);
    CHECK(q.oracles.f_eval(x, y) == p.oracles.f_eval(x, y));
  }

  TEST_CASE("sc_synthetic hypergradient matches differences of the implicit objective") {
    const BenchmarkProblem p = make_sc_synthetic(1, 5);
    const Vec x = sample_point(p, 2).first;
    auto ell = [&p](const Vec& z) { return p.oracles.f_eval(z, p.lower_solution(z)); };
    const Vec g = p.hypergradient(x);
    for (int i = 0; i < 5; ++i) {
      Vec xp = x, xm = x;
      xp(i) += 1e-6;
      xm(i) -= 1e-6;
      CHECK(g(i) == doctest::Approx((ell(xp) - ell(xm)) / 2e-6).epsilon(1e-5));
    }
  }

  TEST_CASE("nc_synthetic") {
    const BenchmarkProblem p = make_nc_synthetic(0);
    CHECK_FALSE(p.strongly_convex);
    const BenchmarkProblem sc = make_sc_synthetic(0);
    const Vec x = sample_point(p, 1).first;
    const Vec y = sc.lower_solution(x);
    CHECK(p.oracles.grad_y_g(x, y).norm() <= 1e-10);
    for (std::uint64_t s = 0; s < 10; ++s) {
      const auto [px, py] = sample_point(p, s);
      CHECK(hvp_symmetry_error(p.oracles, px, py, s) <= 1e-10);
      CHECK(finite_diff_check(p, px, py, 1e-6, s).max_rel_error <= 1e-5);
    }
  }

  TEST_CASE("coreset") {
    const BenchmarkProblem p = make_coreset();
    CHECK(p.oracles.dim_x == 4);
    CHECK(p.oracles.dim_y == 2);
    const Vec y_star = p.lower_solution(Vec::Zero(4));
    const Vec x = Vec::Zero(4);
    const BlockVec gf = p.oracles.grad_f(x, y_star);
    CHECK(eval_h(p.oracles, x, y_star) == 0.0);
    CHECK(gf.allFinite());
    const auto [sx, sy] = sample_point(p, 3);
    CHECK(finite_diff_check(p, sx, sy).max_rel_error <= 1e-5);
    auto ell = [&p](const Vec& z) { return p.oracles.f_eval(z, p.lower_solution(z)); };
    const Vec g = p.hypergradient(sx);
    for (int i = 0; i < 4; ++i) {
      Vec xp = sx, xm = sx;
      xp(i) += 1e-6;
      xm(i) -= 1e-6;
      const double fd = (ell(xp) - ell(xm)) / 2e-6;
      CHECK(std::abs(g(i) - fd) <= 1e-4 * std::max(1.0, g.norm()));
    }
  }

  TEST_CASE("coreset softmax is uniform on constant inputs") {
    const BenchmarkProblem p = make_coreset();
    const Vec at_zero = p.lower_solution(Vec::Zero(4));
    CHECK((p.lower_solution(Vec::Constant(4, 7.0)) - at_zero).norm() <= 1e-14);
    // Softmax Jacobian rows sum to zero.
    const Vec hyx = p.oracles.hvp_yx(Vec::Zero(4), at_zero + Vec::Ones(2), Vec::Ones(2));
    CHECK(std::abs(hyx.sum()) <= 1e-12);
  }

  TEST_CASE("dhc") {
    DhcParams params;
    params.n_features = 6;
    params.n_classes = 3;
    params.n_train = 60;
    params.n_val = 30;
    params.n_test = 30;
    const BenchmarkProblem p = make_dhc(params);
    CHECK(p.oracles.dim_x == 60);
    CHECK(p.oracles.dim_y == 18);
    CHECK(p.metadata.extra.at("regularizer") == 1e-3);
    CHECK(*p.metadata.corruption_rate == 0.25);
    const auto [x, y] = sample_point(p, 0);
    CHECK(finite_diff_check(p, x, y).max_rel_error <= 1e-5);
    CHECK(hvp_symmetry_error(p.oracles, x, y, 0) <= 1e-10);
    params.corruption = 1.0;
    CHECK_THROWS_AS(make_dhc(params), ConfigError);
  }

  TEST_CASE("dhc constant weights only rescale the regularizer") {
    // sigma(a) * CE + r1 |y|^2 and sigma(b) * CE + r2 |y|^2 share a minimizer
    // when r2 = r1 * sigma(b) / sigma(a).
    auto sigmoid = [](double t) { return 1.0 / (1.0 + std::exp(-t)); };
    DhcParams params;
    params.n_features = 5;
    params.n_classes = 3;
    params.n_train = 80;
    params.n_val = 20;
    params.n_test = 20;
    params.corruption = 0.0;
    params.regularizer = 1e-2;
    const double a = -3.0, b = 3.0;
    const BenchmarkProblem pa = make_dhc(params);
    params.regularizer = 1e-2 * sigmoid(b) / sigmoid(a);
    const BenchmarkProblem pb = make_dhc(params);
    const Vec ya = solve_lower_level(pa.oracles, Vec::Constant(80, a), pa.y0, 1e-24, 200000);
    const Vec yb = solve_lower_level(pb.oracles, Vec::Constant(80, b), pb.y0, 1e-24, 200000);
    CHECK((ya - yb).norm() <= 1e-6 * std::max(1.0, ya.norm()));
    CHECK(pa.test_accuracy(ya) == pb.test_accuracy(yb));
  }

  TEST_CASE("regularity example with A = I has c = 1/2") {
    // g = 1/2 |y - Bx|^2: grad_y h = 2 grad_y g, so |grad_y g| <= 1/2 |grad h|.
    const Mat B = make_conditioned_matrix(3, 4, 3, 5.0);
    ProblemOracles o;
    o.dim_x = 3;
    o.dim_y = 4;
    o.grad_y_g = [B](const Vec& x, const Vec& y) -> Vec { return y - B * x; };
    o.hvp_yy = [](const Vec&, const Vec&, const Vec& v) -> Vec { return v; };
    o.hvp_yx = [B](const Vec&, const Vec&, const Vec& v) -> Vec { return -B.transpose() * v; };
    for (int i = 0; i < 20; ++i) {
      const Vec x = Vec::Random(3), y = Vec::Random(4);
      CHECK(o.grad_y_g(x, y).norm() <= 0.5 * grad_h(o, x, y).norm() * (1 + 1e-12));
    }
  }

  TEST_CASE("regularity example") {
    const BenchmarkProblem p = make_regularity_example(0, 6, 4, 3);
    const double c = p.metadata.extra.at("regularity_c");
    CHECK(c == doctest::Approx(0.5 / p.metadata.extra.at("sigma_plus_min")));
    for (std::uint64_t s = 0; s < 100; ++s) {
      const auto [x, y] = sample_point(p, s);
      CHECK(p.oracles.grad_y_g(x, y).norm() <= c * grad_h(p.oracles, x, y).norm() * (1 + 1e-9));
    }
    CHECK(finite_diff_check(p, p.x0, p.y0).max_rel_error <= 1e-9);
    const Vec x = sample_point(p, 1).first;
    CHECK(p.oracles.grad_y_g(x, p.lower_solution(x)).norm() <= 1e-10);
  }

  TEST_CASE("rank-deficient regularity example keeps grad_y g in the range of A^T") {
    const BenchmarkProblem p = make_regularity_example(4, 3, 5, 2);
    CHECK_FALSE(p.strongly_convex);
    const double c = p.metadata.extra.at("regularity_c");
    for (std::uint64_t s = 0; s < 20; ++s) {
      const auto [x, y] = sample_point(p, s);
      CHECK(p.oracles.grad_y_g(x, y).norm() <= c * grad_h(p.oracles, x, y).norm() * (1 + 1e-9));
    }
  }

  TEST_CASE("solve_lower_level reaches the tolerance") {
    const BenchmarkProblem p = make_sc_synthetic(2);
    const Vec x = sample_point(p, 0).first;
    const Vec y = solve_lower_level(p.oracles, x, p.y0, 1e-20, 100000);
    CHECK(p.oracles.grad_y_g(x, y).squaredNorm() <= 1e-20);
  }

  TEST_CASE("finite_diff_check flags a wrong oracle") {
    BenchmarkProblem p = make_quadratic_toy();
    CHECK(finite_diff_check(p, p.x0, p.y0).max_rel_error <= 1e-9);
    p.oracles.hvp_yx = [](const Vec&, const Vec&, const Vec& v) -> Vec { return v; };
    CHECK(finite_diff_check(p, p.x0, p.y0).max_rel_error > 0.1);
    CHECK_THROWS_AS(finite_diff_check(p, p.x0, p.y0, 0.0), ConfigError);
  }
}
