#include <doctest.h>

#include "swave/solvers.hpp"

#include <cmath>
#include <numbers>
#include <random>

using namespace swave;

namespace {

Grid unit_grid(int M) {
  return Grid(1.0, M, [](double) { return 1.0; });
}

CoefficientSet mixed_coefficients(const Grid& grid) {
  const int M = grid.points();
  CoefficientSet c = CoefficientSet::zero(grid);
  for (int i = 0; i < M; ++i) {
    const double x = grid.x(i + 1);
    c.a1[i] = 0.3 * std::sin(2.0 * x);
    c.a2[i] = 0.5 * std::cos(x);
    c.a3[i] = 0.4 * x * (1.0 - x);
    c.a4[i] = 0.2;
    c.a5[i] = 0.25 * std::sin(std::numbers::pi * x);
  }
  c.a5[0] = 0.0;
  c.a5[M - 1] = 0.0;
  return c;
}

void fill_random(AdaptedField& f, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  for (int k = 0; k <= f.last_level(); ++k) {
    auto& lvl = f.level(k);
    for (Eigen::Index i = 0; i < lvl.size(); ++i) lvl[i] = gauss(rng);
  }
}

Eigen::VectorXd random_vector(int m, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  Eigen::VectorXd v(m);
  for (int i = 0; i < m; ++i) v[i] = gauss(rng);
  return v;
}

// largest spread across the nodes of any level, relative to the field scale
double path_spread(const AdaptedField& f, const BinaryTree& tree) {
  double spread = 0.0;
  double scale = 1e-300;
  for (int k = 0; k <= f.last_level(); ++k) {
    scale = std::max(scale, f.level(k).lpNorm<Eigen::Infinity>());
    for (std::int64_t p = 1; p < tree.nodes(k); ++p)
      spread = std::max(spread, (f.node(k, p) - f.node(k, 0)).lpNorm<Eigen::Infinity>());
  }
  return spread / scale;
}

double field_gap(const AdaptedField& a, const AdaptedField& b) {
  double gap = 0.0;
  double scale = 1e-300;
  for (int k = 0; k <= std::min(a.last_level(), b.last_level()); ++k) {
    gap = std::max(gap, (a.level(k) - b.level(k)).lpNorm<Eigen::Infinity>());
    scale = std::max(scale, a.level(k).lpNorm<Eigen::Infinity>());
  }
  return gap / scale;
}

}  // namespace

TEST_CASE("cfl guard") {
  Grid grid = unit_grid(7);  // dx = 1/8
  CHECK_NOTHROW(require_cfl(grid, BinaryTree(8, 1.0)));
  CHECK_THROWS_AS(require_cfl(grid, BinaryTree(4, 1.0)), std::invalid_argument);

  const CoefficientSet zero = CoefficientSet::zero(grid);
  const BinaryTree bad(3, 9.0);
  const Eigen::VectorXd v = Eigen::VectorXd::Zero(7);
  CHECK_THROWS_AS(solve_forward_dual(grid, zero, bad, v, v, {}, {}),
                  std::invalid_argument);
  CHECK_THROWS_AS(solve_forward_classical(grid, zero, bad, v, v, {}, {},
                                          BoundaryControl::zero(bad, {})),
                  std::invalid_argument);
  // the implicit backward sweeps have no step restriction
  AdaptedField zT(bad, 7, 3);
  CHECK_NOTHROW(solve_backward_reference(grid, ReferenceCoefficients::adjoint_of(grid, zero),
                                         bad, zT, zT));
}

TEST_CASE("shape mismatches are rejected") {
  Grid grid = unit_grid(5);
  BinaryTree tree(4, 0.4);
  const CoefficientSet zero = CoefficientSet::zero(grid);
  const Eigen::VectorXd good = Eigen::VectorXd::Zero(5);
  const Eigen::VectorXd bad = Eigen::VectorXd::Zero(4);

  CHECK_THROWS_AS(solve_forward_dual(grid, zero, tree, bad, good, {}, {}),
                  std::invalid_argument);
  CHECK_THROWS_AS(solve_forward_refined(grid, zero, tree, good, bad,
                                        ControlTriple::zero(grid, tree, {})),
                  std::invalid_argument);
  AdaptedField short_field(tree, 5, 2);
  AdaptedField full_field(tree, 5, 4);
  CHECK_THROWS_AS(solve_backward_controlled(grid, zero, tree, short_field, full_field,
                                            BoundaryControl::zero(tree, {})),
                  std::invalid_argument);
  CHECK_THROWS_AS(solve_backward_reference(grid, ReferenceCoefficients::adjoint_of(grid, zero),
                                           tree, full_field, short_field),
                  std::invalid_argument);
}

TEST_CASE("boundary control reads zero outside its active set") {
  BinaryTree tree(3, 0.3);
  BoundaryControl h = BoundaryControl::zero(tree, {false, true});
  h.values.node(1, 0) << 2.0, 5.0;
  CHECK(h.left(1, 0) == 0.0);
  CHECK(h.right(1, 0) == 5.0);
  CHECK(BoundaryControl().empty());
}

TEST_CASE("adjoint coefficient realization") {
  Grid grid(1.0, 6, [](double x) { return 1.0 + 0.2 * x; });
  const CoefficientSet c = mixed_coefficients(grid);
  const ReferenceCoefficients r = ReferenceCoefficients::adjoint_of(grid, c);

  // centered differencing with zero extension is antisymmetric, which is what
  // makes -D diag(a1) the exact transpose of the primal advection
  const Eigen::MatrixXd& D = grid.gradient_matrix();
  CHECK((D + D.transpose()).lpNorm<Eigen::Infinity>() == 0.0);
  const Eigen::MatrixXd primal = Eigen::MatrixXd(c.a1.asDiagonal()) * D;
  CHECK((r.advection - primal.transpose()).lpNorm<Eigen::Infinity>() <= 1e-15);

  CHECK((r.b2 - (c.a2 - c.a3.cwiseProduct(c.a5))).lpNorm<Eigen::Infinity>() == 0.0);
  CHECK((r.b3 - c.a3).lpNorm<Eigen::Infinity>() == 0.0);
  CHECK((r.b4 + c.a4).lpNorm<Eigen::Infinity>() == 0.0);
  CHECK((r.b5 + c.a5).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("all four schemes collapse to deterministic paths without noise") {
  Grid grid = unit_grid(9);
  BinaryTree tree(8, 0.6);
  CoefficientSet c = CoefficientSet::zero(grid);
  // lower order drift terms are fine; only the noise coefficients must vanish
  c.a1 = random_vector(9, 1u) * 0.2;
  c.a2 = random_vector(9, 2u) * 0.4;
  const Eigen::VectorXd y0 = random_vector(9, 3u);
  const Eigen::VectorXd y1 = random_vector(9, 4u);

  const StatePair classical = solve_forward_classical(grid, c, tree, y0, y1, {}, {},
                                                      BoundaryControl::zero(tree, {}));
  CHECK(path_spread(classical.y, tree) <= 1e-12);
  CHECK(path_spread(classical.yhat, tree) <= 1e-12);

  const StatePair refined =
      solve_forward_refined(grid, c, tree, y0, y1, ControlTriple::zero(grid, tree, {}));
  CHECK(path_spread(refined.y, tree) <= 1e-12);
  CHECK(path_spread(refined.yhat, tree) <= 1e-12);

  const DualPair dual = solve_forward_dual(grid, c, tree, y0, y1, {}, {});
  CHECK(path_spread(dual.z, tree) <= 1e-12);
  CHECK(path_spread(dual.zhat, tree) <= 1e-12);

  AdaptedField zT(tree, 9, 8), zhatT(tree, 9, 8);
  for (std::int64_t p = 0; p < tree.nodes(8); ++p) {
    zT.node(8, p) = y0;
    zhatT.node(8, p) = y1;
  }
  const AdjointQuad back = solve_backward_reference(
      grid, ReferenceCoefficients::adjoint_of(grid, c), tree, zT, zhatT);
  CHECK(path_spread(back.z, tree) <= 1e-12);
  CHECK(path_spread(back.zhat, tree) <= 1e-12);

  const BackwardQuad ctrl =
      solve_backward_controlled(grid, c, tree, zT, zhatT, BoundaryControl::zero(tree, {}));
  CHECK(path_spread(ctrl.y, tree) <= 1e-12);
  CHECK(path_spread(ctrl.yhat, tree) <= 1e-12);
}

TEST_CASE("classical displacement endpoint is measurable one step early") {
  Grid grid = unit_grid(7);
  BinaryTree tree(6, 0.6);
  CoefficientSet c = mixed_coefficients(grid);
  c.a4.setZero();
  c.a5.setZero();  // classical scheme carries noise only through a3 and g2
  AdaptedField g1(tree, 7, 5), g2(tree, 7, 5);
  fill_random(g1, 10u);
  fill_random(g2, 11u);
  BoundaryControl h = BoundaryControl::zero(tree, {true, true});
  fill_random(h.values, 12u);

  const StatePair out = solve_forward_classical(grid, c, tree, random_vector(7, 13u),
                                                random_vector(7, 14u), g1, g2, h);
  double y_sibling_gap = 0.0;
  double v_sibling_gap = 0.0;
  for (std::int64_t p = 0; p < tree.nodes(5); ++p) {
    const auto y_lo = out.y.node(6, BinaryTree::child(p, 0));
    const auto y_hi = out.y.node(6, BinaryTree::child(p, 1));
    y_sibling_gap = std::max(y_sibling_gap, (y_hi - y_lo).lpNorm<Eigen::Infinity>());
    const auto v_lo = out.yhat.node(6, BinaryTree::child(p, 0));
    const auto v_hi = out.yhat.node(6, BinaryTree::child(p, 1));
    v_sibling_gap = std::max(v_sibling_gap, (v_hi - v_lo).lpNorm<Eigen::Infinity>());
  }
  CHECK(y_sibling_gap == 0.0);     // displacement never sees the last increment
  CHECK(v_sibling_gap > 1e-3);     // velocity does
}

TEST_CASE("backward controlled sweep is inverted by the refined forward scheme") {
  Grid grid = unit_grid(8);
  BinaryTree tree(6, 0.5);
  const CoefficientSet c = mixed_coefficients(grid);

  AdaptedField yT(tree, 8, 6), yhatT(tree, 8, 6);
  fill_random(yT, 21u);
  fill_random(yhatT, 22u);
  BoundaryControl h = BoundaryControl::zero(tree, {true, true});
  fill_random(h.values, 23u);

  const BackwardQuad back = solve_backward_controlled(grid, c, tree, yT, yhatT, h);

  // the martingale integrands are exactly the internal controls that replay
  // the trajectory forward
  ControlTriple controls;
  controls.f = back.Y;
  controls.g = back.Yhat;
  controls.h = h;
  const StatePair fwd = solve_forward_refined(grid, c, tree, back.y.node(0, 0),
                                              back.yhat.node(0, 0), controls);
  CHECK(field_gap(fwd.y, back.y) <= 1e-11);
  CHECK(field_gap(fwd.yhat, back.yhat) <= 1e-11);
}

TEST_CASE("backward reference induction is inverted by the dual forward scheme") {
  Grid grid = unit_grid(8);
  BinaryTree tree(6, 0.5);
  const CoefficientSet c = mixed_coefficients(grid);
  const ReferenceCoefficients ref = ReferenceCoefficients::adjoint_of(grid, c);

  AdaptedField zT(tree, 8, 6), zhatT(tree, 8, 6);
  fill_random(zT, 31u);
  fill_random(zhatT, 32u);

  const AdjointQuad back = solve_backward_reference(grid, ref, tree, zT, zhatT);
  const DualPair fwd = solve_forward_dual(grid, c, tree, back.z.node(0, 0),
                                          back.zhat.node(0, 0), back.Z, back.Zhat);
  CHECK(field_gap(fwd.z, back.z) <= 1e-11);
  CHECK(field_gap(fwd.zhat, back.zhat) <= 1e-11);
}

TEST_CASE("energy drift follows the exact per-step factor on an eigenmode") {
  const int M = 9;
  Grid grid = unit_grid(M);
  const double pi = std::numbers::pi;
  const double dx = grid.dx();
  const double half = std::sin(0.5 * pi * dx);
  const double omega_sq = 4.0 / (dx * dx) * half * half;

  Eigen::VectorXd mode(M);
  for (int i = 0; i < M; ++i) mode[i] = std::sin(pi * grid.x(i + 1));
  const Eigen::VectorXd vzero = Eigen::VectorXd::Zero(M);
  const CoefficientSet zero = CoefficientSet::zero(grid);

  auto dual_drift = [&](int K) {
    BinaryTree tree(K, 0.5);
    const DualPair out = solve_forward_dual(grid, zero, tree, mode, vzero, {}, {});
    const double e0 = level_energy(grid, out.z, out.zhat, 0, EnergyKind::adjoint);
    const double eK = level_energy(grid, out.z, out.zhat, K, EnergyKind::adjoint);
    const double x = tree.dt() * tree.dt() * omega_sq;
    // the explicit pair multiplies the mode energy by exactly 1 + dt^2 w^2 per
    // step
    CHECK(eK / e0 == doctest::Approx(std::pow(1.0 + x, K)).epsilon(1e-10));
    return eK / e0 - 1.0;
  };
  auto refined_drift = [&](int K) {
    BinaryTree tree(K, 0.5);
    const StatePair out = solve_forward_refined(grid, zero, tree, mode, vzero,
                                                ControlTriple::zero(grid, tree, {}));
    const double e0 = level_energy(grid, out.y, out.yhat, 0, EnergyKind::state);
    const double eK = level_energy(grid, out.y, out.yhat, K, EnergyKind::state);
    const double x = tree.dt() * tree.dt() * omega_sq;
    // the semi-implicit scheme divides it by the same factor
    CHECK(eK / e0 == doctest::Approx(std::pow(1.0 + x, -K)).epsilon(1e-10));
    return 1.0 - eK / e0;
  };

  // halving dt halves the drift, up to the usual first-order remainder
  const double ratio_dual = dual_drift(16) / dual_drift(8);
  CHECK(ratio_dual > 0.42);
  CHECK(ratio_dual < 0.56);
  const double ratio_refined = refined_drift(16) / refined_drift(8);
  CHECK(ratio_refined > 0.42);
  CHECK(ratio_refined < 0.56);
}

TEST_CASE("hidden regularity ratios are finite and positive") {
  Grid grid = unit_grid(9);
  BinaryTree tree(8, 0.6);
  const CoefficientSet zero = CoefficientSet::zero(grid);

  Eigen::VectorXd mode(9);
  for (int i = 0; i < 9; ++i) mode[i] = std::sin(std::numbers::pi * grid.x(i + 1));
  const DualPair out =
      solve_forward_dual(grid, zero, tree, mode, Eigen::VectorXd::Zero(9), {}, {});
  const RegularityReport rep =
      energy_and_hidden_regularity(grid, tree, out.z, out.zhat, 0, EnergyKind::adjoint);
  CHECK(rep.energy_ratio >= 1.0);
  CHECK(rep.energy_ratio < 2.0);
  CHECK(rep.trace_ratio > 0.0);
  CHECK(rep.trace_ratio < 100.0);
}
