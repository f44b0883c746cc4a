#include "doctest.h"

#include "bipgd/metrics.hpp"
#include "bipgd/problems.hpp"

using namespace bipgd;

TEST_SUITE("metrics") {
  TEST_CASE("kkt_residual on the quadratic toy") {
    const ProblemOracles o = make_quadratic_toy().oracles;
    const Vec x = Vec::Constant(1, 1.0), y = Vec::Zero(1);
    KktResidual r = kkt_residual(o, x, y, 0.75);
    CHECK(r.h == doctest::Approx(1.0));
    CHECK(r.stationarity == doctest::Approx(8.5));
    r = kkt_residual(o, x, y, 0.0);
    CHECK(r.stationarity == doctest::Approx(1.0));
    CHECK_THROWS_AS(kkt_residual(o, x, y, -1.0), ConfigError);
  }

  TEST_CASE("kkt_residual vanishes at an exact KKT point") {
    const ProblemOracles o = make_quadratic_toy().oracles;
    const KktResidual r = kkt_residual(o, Vec::Zero(1), Vec::Zero(1), 0.0);
    CHECK(r.h <= 1e-12);
    CHECK(r.stationarity <= 1e-12);
  }

  TEST_CASE("lower_kkt_map") {
    CHECK(lower_kkt_map(0.0, Vec::Constant(3, 2.0)).isZero());
    CHECK(lower_kkt_map(0.75, Vec::Constant(1, -1.0))(0) == doctest::Approx(-1.5));
  }

  TEST_CASE("lower_kkt_residual at the lower-level solution") {
    const BenchmarkProblem p = make_quadratic_toy();
    const LowerKktResidual r =
        lower_kkt_residual(p.oracles, Vec::Zero(1), Vec::Zero(1), 0.0);
    CHECK(r.feasibility == 0.0);
    CHECK(r.stationarity_x == 0.0);
    CHECK(r.stationarity_y == 0.0);
  }

  TEST_CASE("lipschitz_h_bound") {
    CHECK(lipschitz_h_bound(2.0, 3.0, 1.0) == 16.0);
    CHECK(lipschitz_h_bound(0.0, 3.0, 1.0) == 0.0);
  }

  TEST_CASE("rate_slope") {
    CHECK(rate_slope({{10, 1}, {100, 0.1}}) == doctest::Approx(-1.0));
    CHECK(rate_slope({{10, 3}, {100, 3}}) == doctest::Approx(0.0));
    CHECK(rate_slope({{1e3, 1e-2}, {1e4, 1e-3}, {1e5, 1e-4}}) == doctest::Approx(-1.0));
    CHECK_THROWS_AS(rate_slope({{10, 1}}), ConfigError);
    CHECK_THROWS_AS(rate_slope({{10, 1}, {100, 0.0}}), ConfigError);
  }
}
