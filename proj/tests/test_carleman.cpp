#include <doctest.h>

#include "swave/carleman.hpp"
#include "swave/grid.hpp"

#include <cmath>
#include <numbers>

using namespace swave;

namespace {

Grid unit_grid(int M) {
  return Grid(1.0, M, [](double) { return 1.0; });
}

CarlemanConfig base_config() {
  CarlemanConfig cfg;
  cfg.x0 = -1.0;
  cfg.alpha = 4.0;
  cfg.mu0 = 8.0;
  cfg.T = 3.0;
  return cfg;
}

}  // namespace

TEST_CASE("first convexity condition, constant coefficient") {
  // For a == 1 the reduced form is phi'' = 2 alpha everywhere, so the largest
  // admissible mu0 is exactly 2 alpha, and |phi'| is smallest at the wall
  // nearest the center.
  Grid grid = unit_grid(49);
  const Condition1Report rep = check_condition1(grid, base_config());
  CHECK(rep.holds);
  CHECK(rep.mu0_max == doctest::Approx(8.0).epsilon(1e-12));
  CHECK(rep.min_grad == doctest::Approx(8.0).epsilon(1e-12));
  CHECK(rep.critical_index == -1);
  CHECK(rep.worst_index >= 0);
  CHECK(rep.worst_index <= 50);
}

TEST_CASE("first convexity condition, linear coefficient") {
  // a = 1 + x/2: form/a = (1/2) a' phi' + a phi'' = 10 + 6x, minimized at the
  // left wall.  The end-point derivative stencil is exact on linear a, so the
  // value is exact.
  Grid grid(1.0, 9, [](double x) { return 1.0 + 0.5 * x; });
  const Condition1Report rep = check_condition1(grid, base_config());
  CHECK(rep.holds);
  CHECK(rep.mu0_max == doctest::Approx(10.0).epsilon(1e-12));
  CHECK(rep.worst_index == 0);
}

TEST_CASE("a critical point of the weight is detected") {
  Grid grid = unit_grid(9);
  CarlemanConfig cfg = base_config();
  cfg.x0 = 0.5;  // vanishing gradient at the center node
  const Condition1Report rep = check_condition1(grid, cfg);
  CHECK_FALSE(rep.holds);
  CHECK(rep.critical_index == 5);
  CHECK(rep.min_grad <= 1e-12);
}

TEST_CASE("observed boundary follows the sign of a phi' nu") {
  Grid grid = unit_grid(7);
  CarlemanConfig cfg = base_config();
  const BoundarySpec right = compute_gamma0(grid, cfg);
  CHECK_FALSE(right.left);
  CHECK(right.right);

  cfg.x0 = 2.0;
  const BoundarySpec left = compute_gamma0(grid, cfg);
  CHECK(left.left);
  CHECK_FALSE(left.right);
  CHECK(left.count() == 1);
}

TEST_CASE("second condition report on the reference instance") {
  Grid grid = unit_grid(49);
  CarlemanConfig cfg = base_config();
  const CoefficientSet coeffs = CoefficientSet::zero(grid);
  const Condition2Report rep = check_condition2(grid, cfg, coeffs);

  // phi extremes over the interior nodes x = 0.02 and x = 0.98
  CHECK(rep.R0sq == doctest::Approx(4.1616).epsilon(1e-12));
  CHECK(rep.R1sq == doctest::Approx(15.6816).epsilon(1e-12));
  CHECK(rep.T0_weight == doctest::Approx(7.92).epsilon(1e-12));
  CHECK(rep.T0_transit == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(rep.c1_cap_noise == 1.0);

  // item 1: min (1/4) a phi'^2 - max phi = 16 (1.02)^2 - 15.6816
  CHECK(rep.items[0].slack == doctest::Approx(0.9648).epsilon(1e-10));
  CHECK(rep.items[0].holds);
  // item 2: T - transit time
  CHECK(rep.items[1].slack == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(rep.items[1].holds);
}

TEST_CASE("noise coupling caps the admissible c1") {
  Grid grid = unit_grid(49);
  CoefficientSet coeffs = CoefficientSet::zero(grid);
  coeffs.a5[20] = 0.6;
  const Condition2Report rep = check_condition2(grid, base_config(), coeffs);
  CHECK(rep.c1_cap_noise ==
        doctest::Approx(1.0 / (16.0 * std::pow(0.6, 4))).epsilon(1e-12));
}

TEST_CASE("constant search finds admissible (c0, c1) on the reference instance") {
  Grid grid = unit_grid(49);
  CarlemanConfig cfg = base_config();
  const CoefficientSet coeffs = CoefficientSet::zero(grid);
  const ConstantSearch search = find_condition2_constants(grid, cfg, coeffs);

  CHECK(search.ok);
  CHECK(search.c0 > 0.0);
  CHECK(search.c0 < search.c1);
  // the c1 window is (4/9, 2/3); the slack-optimal center is 5/9 and the
  // window slack there is 1/9
  CHECK(search.c1 == doctest::Approx(5.0 / 9.0).epsilon(2e-3));
  CHECK(search.min_slack == doctest::Approx(1.0 / 9.0).epsilon(2e-2));

  cfg.c0 = search.c0;
  cfg.c1 = search.c1;
  const Condition2Report rep = check_condition2(grid, cfg, coeffs);
  CHECK(rep.holds);
  for (const auto& item : rep.items) CHECK(item.slack > 0.0);
  CHECK(rep.items[3].slack ==
        doctest::Approx(cfg.mu0 - 4.0 * cfg.c1 - cfg.c0 - std::pow(rep.R1sq, 0.25))
            .epsilon(1e-12));
  CHECK(rep.items[3].slack > 3.4);
  CHECK(rep.items[3].slack < 3.9);
}

TEST_CASE("search reports failure when the time horizon is too short") {
  Grid grid = unit_grid(49);
  CarlemanConfig cfg = base_config();
  cfg.T = 1.0;  // below the transit time, the c1 interval is empty
  const ConstantSearch search = find_condition2_constants(grid, cfg, CoefficientSet::zero(grid));
  CHECK_FALSE(search.ok);
}

TEST_CASE("weight tables match the closed forms") {
  Grid grid(1.0, 11, [](double x) { return 1.0 + 0.5 * x; });
  CarlemanConfig cfg = base_config();
  cfg.c0 = 0.3;
  cfg.c1 = 0.6;
  cfg.lambda = 0.7;
  const int nt = 12;
  const WeightTables t = weight_fields(grid, cfg, nt);

  REQUIRE(static_cast<int>(t.times.size()) == nt + 1);
  REQUIRE(static_cast<int>(t.xs.size()) == 13);

  for (int n = 0; n <= nt; ++n) {
    for (int i = 0; i <= 12; ++i) {
      const double tm = t.times[static_cast<std::size_t>(n)];
      const double x = t.xs[static_cast<std::size_t>(i)];
      CHECK(t.ell(n, i) == doctest::Approx(cfg.ell(tm, x)).epsilon(1e-13));
      CHECK(t.theta(n, i) == doctest::Approx(cfg.theta(tm, x)).epsilon(1e-13));
      // time symmetry about T/2
      CHECK(t.ell(n, i) == doctest::Approx(t.ell(nt - n, i)).epsilon(1e-13));

      const double two_t_T = 2.0 * tm - cfg.T;
      const double px = cfg.phi_x(x);
      const double a = grid.a_node(i);
      const double A = cfg.lambda * cfg.lambda *
                           (cfg.c1 * cfg.c1 * two_t_T * two_t_T - a * px * px) +
                       4.0 * cfg.c1 * cfg.lambda + cfg.c0 * cfg.lambda;
      CHECK(t.A_field(n, i) == doctest::Approx(A).epsilon(1e-12));

      // for linear a the difference stencils are exact:
      // psi = lambda (-2 c1 + a' phi' + a phi'' - c0)
      const double daphi = 0.5 * px + a * cfg.phi_xx();
      const double psi = cfg.lambda * (-2.0 * cfg.c1 + daphi - cfg.c0);
      CHECK(t.psi(n, i) == doctest::Approx(psi).epsilon(1e-12));
      const double c11 = 2.0 * a * cfg.ell_tt() +
                         cfg.lambda * (2.0 * a * daphi - 0.5 * a * px) -
                         a * cfg.c0 * cfg.lambda;
      CHECK(t.c11(n, i) == doctest::Approx(c11).epsilon(1e-12));
    }
  }
}

TEST_CASE("time windows exist for an admissible weight and fail for a flat one") {
  Grid grid = unit_grid(9);
  CarlemanConfig good = base_config();
  good.T = 9.0;
  good.c1 = 0.85;  // large enough that ell < 0 at t = 0 and t = T
  const WindowReport ok = find_windows(grid, good, 60);
  CHECK(ok.ok);
  CHECK(ok.ends_negative);
  CHECK(ok.eps0 > 0.15);
  CHECK(ok.eps0 < 0.30);
  CHECK(ok.eps1 > 0.45);
  CHECK(ok.eps0 <= ok.eps1);

  CarlemanConfig bad = base_config();
  bad.c1 = 0.1;
  const WindowReport fail = find_windows(grid, bad, 60);
  CHECK_FALSE(fail.ends_negative);
  CHECK_FALSE(fail.ok);
}

TEST_CASE("pointwise identity residual vanishes at second order") {
  CarlemanConfig cfg = base_config();
  cfg.c0 = 0.5;
  cfg.c1 = 0.55;
  cfg.lambda = 1.0;
  const double pi = std::numbers::pi;
  auto a = [](double) { return 1.0; };
  auto v = [pi](double t, double x) { return std::sin(pi * x) * std::sin(t); };

  const IdentityResidualReport rep = identity_residual(cfg, a, v, 1.0, {10, 20, 40});
  REQUIRE(rep.residuals.size() == 3);
  CHECK(rep.residuals[0] > rep.residuals[1]);
  CHECK(rep.residuals[1] > rep.residuals[2]);
  CHECK(rep.order_min >= 1.6);
  CHECK(rep.order_min <= 2.5);
}
