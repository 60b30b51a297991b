#include <benchmark/benchmark.h>

#include "swave/control.hpp"
#include "swave/grid.hpp"
#include "swave/solvers.hpp"
#include "swave/tree.hpp"

#include <random>

using namespace swave;

namespace {

AdaptedField random_leaves(const BinaryTree& tree, int dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  AdaptedField xi(tree, dim, tree.steps());
  auto& lvl = xi.level(tree.steps());
  for (Eigen::Index i = 0; i < lvl.size(); ++i) lvl[i] = gauss(rng);
  return xi;
}

void BM_martingale_representation(benchmark::State& state) {
  const int K = static_cast<int>(state.range(0));
  BinaryTree tree(K, 1.0);
  const AdaptedField xi = random_leaves(tree, 4, 2u);
  for (auto _ : state) {
    benchmark::DoNotOptimize(martingale_representation(tree, xi));
  }
  state.SetComplexityN(std::int64_t{1} << K);
}
BENCHMARK(BM_martingale_representation)->DenseRange(8, 16, 4)->Complexity();

void BM_forward_dual(benchmark::State& state) {
  const int K = static_cast<int>(state.range(0));
  const int M = 15;
  Grid grid(1.0, M, [](double) { return 1.0; });
  BinaryTree tree(K, 0.05 * K);  // keeps dt fixed under the stability limit
  const Eigen::VectorXd z0 = Eigen::VectorXd::Ones(M);
  const Eigen::VectorXd zhat0 = Eigen::VectorXd::Zero(M);
  const CoefficientSet coeffs = CoefficientSet::zero(grid);
  for (auto _ : state) {
    benchmark::DoNotOptimize(solve_forward_dual(grid, coeffs, tree, z0, zhat0, {}, {}));
  }
  state.SetComplexityN(std::int64_t{1} << K);
}
BENCHMARK(BM_forward_dual)->DenseRange(8, 14, 2)->Complexity();

void BM_backward_controlled(benchmark::State& state) {
  const int K = static_cast<int>(state.range(0));
  const int M = 15;
  Grid grid(1.0, M, [](double) { return 1.0; });
  BinaryTree tree(K, 0.05 * K);
  const CoefficientSet coeffs = CoefficientSet::zero(grid);
  const AdaptedField yT = random_leaves(tree, M, 3u);
  const AdaptedField yhatT = random_leaves(tree, M, 4u);
  const BoundaryControl h = BoundaryControl::zero(tree, {true, true});
  for (auto _ : state) {
    benchmark::DoNotOptimize(solve_backward_controlled(grid, coeffs, tree, yT, yhatT, h));
  }
  state.SetComplexityN(std::int64_t{1} << K);
}
BENCHMARK(BM_backward_controlled)->DenseRange(8, 14, 2)->Complexity();

void BM_assemble_gramian(benchmark::State& state) {
  const int M = static_cast<int>(state.range(0));
  Grid grid(1.0, M, [](double) { return 1.0; });
  BinaryTree tree(10, 0.5);
  const CoefficientSet coeffs = CoefficientSet::zero(grid);
  for (auto _ : state) {
    benchmark::DoNotOptimize(assemble_gramian(grid, coeffs, tree, {false, true}));
  }
}
BENCHMARK(BM_assemble_gramian)->Arg(3)->Arg(7)->Arg(15);

}  // namespace

BENCHMARK_MAIN();
