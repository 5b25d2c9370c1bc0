#include <benchmark/benchmark.h>

#include "smtl/estimators.hpp"
#include "smtl/transfer.hpp"
#include "smtl/world_gen.hpp"

using namespace smtl;

namespace {

struct Problem {
  PlantedWorld world;
  Datasets data;
};

Problem planted(Eigen::Index n, Eigen::Index m, double eps, WorldKind kind = WorldKind::LowRank) {
  WorldSpec spec;
  spec.kind = kind;
  spec.d = 20;
  spec.n = n;
  spec.r = kind == WorldKind::LowRank ? 2 : 3;
  spec.eps = eps;
  PlantedWorld world = gen_world(spec, 1);
  Datasets data = sample_datasets(world, m, 2);
  return {std::move(world), std::move(data)};
}

void BM_FitLocal(benchmark::State& state) {
  const Problem p = planted(state.range(0), 40, 0.5);
  for (auto _ : state) benchmark::DoNotOptimize(fit_local(p.data, 1.0));
}
BENCHMARK(BM_FitLocal)->Arg(60)->Arg(200)->Unit(benchmark::kMillisecond);

void BM_FitLowRankBm(benchmark::State& state) {
  const Problem p = planted(state.range(0), 20, 0.5);
  SolverOptions opts;
  opts.restarts = 1;
  for (auto _ : state) benchmark::DoNotOptimize(fit_lowrank_bm(p.data, 2, 1.0, opts));
}
BENCHMARK(BM_FitLowRankBm)->Arg(60)->Arg(200)->Unit(benchmark::kMillisecond);

void BM_FitLowRankIht(benchmark::State& state) {
  const Problem p = planted(state.range(0), 20, 0.5);
  for (auto _ : state) benchmark::DoNotOptimize(fit_lowrank_iht(p.data, 2, 1.0));
}
BENCHMARK(BM_FitLowRankIht)->Arg(60)->Arg(200)->Unit(benchmark::kMillisecond);

void BM_FitClustered(benchmark::State& state) {
  const Problem p = planted(state.range(0), 20, 0.05, WorldKind::Clustered);
  SolverOptions opts;
  opts.restarts = 1;
  for (auto _ : state) benchmark::DoNotOptimize(fit_clustered(p.data, 3, 1.0, opts));
}
BENCHMARK(BM_FitClustered)->Arg(60)->Unit(benchmark::kMillisecond);

void BM_FitNuclear(benchmark::State& state) {
  const Problem p = planted(state.range(0), 30, 0.3);
  const double kappa = condition_number(p.world);
  for (auto _ : state) benchmark::DoNotOptimize(fit_nuclear(p.data, 2, kappa, 1.0));
}
BENCHMARK(BM_FitNuclear)->Arg(60)->Unit(benchmark::kMillisecond);

void BM_FitFewshot(benchmark::State& state) {
  const Problem p = planted(60, 10, 0.0);
  for (auto _ : state) benchmark::DoNotOptimize(fit_fewshot(p.world.U_star, p.data[0], 1.0, {}));
}
BENCHMARK(BM_FitFewshot);

}  // namespace
