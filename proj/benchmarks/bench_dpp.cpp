#include <benchmark/benchmark.h>

#include "bench_util.hpp"
#include "detreg/dpp.hpp"

using namespace detreg;

static void BM_BuildEnsemble(benchmark::State& state) {
  const auto problem = benchutil::make_gaussian_problem(state.range(0));
  for (auto _ : state) {
    EnsembleModel model = build_ensemble(problem.nnp, 1.0);
    benchmark::DoNotOptimize(model.marginal_kernel().data());
  }
}
BENCHMARK(BM_BuildEnsemble)->Arg(64)->Arg(128)->Arg(256);

static void BM_SampleRandomSize(benchmark::State& state) {
  const auto problem = benchutil::make_gaussian_problem(state.range(0));
  const EnsembleModel model = build_ensemble(problem.nnp, 1.0);
  Rng rng(7);
  for (auto _ : state) {
    Subset c = sample(model, rng);
    benchmark::DoNotOptimize(c.indices().data());
  }
}
BENCHMARK(BM_SampleRandomSize)->Arg(64)->Arg(128)->Arg(256);

static void BM_SampleFixedSize(benchmark::State& state) {
  const auto problem = benchutil::make_gaussian_problem(256);
  const EnsembleModel model = build_ensemble(problem.nnp, 1.0);
  Rng rng(7);
  for (auto _ : state) {
    Subset c = sample_fixed_size(model, state.range(0), rng);
    benchmark::DoNotOptimize(c.indices().data());
  }
}
BENCHMARK(BM_SampleFixedSize)->Arg(16)->Arg(32)->Arg(64);

static void BM_Pmf(benchmark::State& state) {
  const auto problem = benchutil::make_gaussian_problem(64);
  const EnsembleModel model = build_ensemble(problem.nnp, 1.0);
  Rng rng(7);
  const Subset c = sample_fixed_size(model, 16, rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(pmf(model, c));
  }
}
BENCHMARK(BM_Pmf);
