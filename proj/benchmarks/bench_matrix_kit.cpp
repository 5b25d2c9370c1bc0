#include <benchmark/benchmark.h>

#include "smtl/matrix_kit.hpp"
#include "smtl/rng.hpp"

using namespace smtl;

namespace {

Matrix random_matrix(Eigen::Index d, Eigen::Index n) {
  Engine rng(7);
  return gaussian_matrix(rng, d, n, 1.0);
}

void BM_FullSvd(benchmark::State& state) {
  const Matrix W = random_matrix(20, state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(full_svd(W));
}
BENCHMARK(BM_FullSvd)->Arg(60)->Arg(200)->Arg(1000);

void BM_ProjectNuclearBall(benchmark::State& state) {
  const Matrix W = random_matrix(20, state.range(0));
  const double radius = 0.3 * nuclear_norm(W);
  for (auto _ : state) benchmark::DoNotOptimize(project_nuclear_ball(W, radius));
}
BENCHMARK(BM_ProjectNuclearBall)->Arg(60)->Arg(200)->Arg(1000);

void BM_ProjectFeasible(benchmark::State& state) {
  const Matrix W = random_matrix(20, state.range(0));
  const double radius = 0.3 * nuclear_norm(W);
  for (auto _ : state) benchmark::DoNotOptimize(project_feasible(W, 1.0, radius));
}
BENCHMARK(BM_ProjectFeasible)->Arg(60)->Arg(200);

void BM_ShellingDecomposition(benchmark::State& state) {
  const Matrix W = random_matrix(50, 50);
  for (auto _ : state) benchmark::DoNotOptimize(shelling_decomposition(W, state.range(0)));
}
BENCHMARK(BM_ShellingDecomposition)->Arg(1)->Arg(5)->Arg(10);

void BM_DistF2(benchmark::State& state) {
  const Representation U1(orthonormalize(random_matrix(state.range(0), 3)).basis);
  Engine rng(8);
  const Representation U2(orthonormalize(gaussian_matrix(rng, state.range(0), 3, 1.0)).basis);
  for (auto _ : state) benchmark::DoNotOptimize(dist_F2(U1, U2));
}
BENCHMARK(BM_DistF2)->Arg(20)->Arg(200);

}  // namespace
