#include <benchmark/benchmark.h>

#include "bench_util.hpp"
#include "detreg/nystrom.hpp"

using namespace detreg;

static void BM_ProjectedNystromFactor(benchmark::State& state) {
  const auto problem = benchutil::make_gaussian_problem(256);
  const EnsembleModel model = build_ensemble(problem.nnp, 1.0);
  Rng rng(11);
  const Subset c = sample_fixed_size(model, state.range(0), rng);
  for (auto _ : state) {
    NystromFactor factor = projected_nystrom(problem.nnp, c);
    benchmark::DoNotOptimize(factor.cross.data());
  }
}
BENCHMARK(BM_ProjectedNystromFactor)->Arg(16)->Arg(32)->Arg(64);

static void BM_Materialize(benchmark::State& state) {
  const auto problem = benchutil::make_gaussian_problem(256);
  const EnsembleModel model = build_ensemble(problem.nnp, 1.0);
  Rng rng(11);
  const NystromFactor factor =
      projected_nystrom(problem.nnp, sample_fixed_size(model, state.range(0), rng));
  for (auto _ : state) {
    Matrix approx = factor.materialize();
    benchmark::DoNotOptimize(approx.data());
  }
}
BENCHMARK(BM_Materialize)->Arg(16)->Arg(64);
