#include <benchmark/benchmark.h>

#include "bench_util.hpp"

using namespace detreg;

static void BM_FitFullSaddle(benchmark::State& state) {
  const auto problem = benchutil::make_gaussian_problem(state.range(0));
  for (auto _ : state) {
    auto fit = fit_full_coefficients(problem.nnp, problem.y, 1e-3, FullSolvePath::saddle);
    benchmark::DoNotOptimize(fit.alpha.data());
  }
}
BENCHMARK(BM_FitFullSaddle)->Arg(64)->Arg(256);

static void BM_FitFullReduced(benchmark::State& state) {
  const auto problem = benchutil::make_gaussian_problem(state.range(0));
  for (auto _ : state) {
    auto fit = fit_full_coefficients(problem.nnp, problem.y, 1e-3, FullSolvePath::reduced);
    benchmark::DoNotOptimize(fit.alpha.data());
  }
}
BENCHMARK(BM_FitFullReduced)->Arg(64)->Arg(256);

static void BM_FitNystromDirect(benchmark::State& state) {
  const auto problem = benchutil::make_gaussian_problem(256);
  const EnsembleModel model = build_ensemble(problem.nnp, 1.0);
  Rng rng(13);
  const Subset c = sample_fixed_size(model, state.range(0), rng);
  for (auto _ : state) {
    auto fit = nystrom_coefficients(problem.nnp, problem.y, 1e-3, c);
    benchmark::DoNotOptimize(fit.alpha.data());
  }
}
BENCHMARK(BM_FitNystromDirect)->Arg(16)->Arg(64);

static void BM_FitNystromPcg(benchmark::State& state) {
  const auto problem = benchutil::make_gaussian_problem(256);
  const EnsembleModel model = build_ensemble(problem.nnp, 1.0);
  Rng rng(13);
  const Subset c = sample_fixed_size(model, state.range(0), rng);
  const Preconditioner precond = build_preconditioner(model, c, 1e-3);
  for (auto _ : state) {
    auto fit = nystrom_coefficients(problem.nnp, problem.y, 1e-3, c,
                                    NystromSolver::pcg, &precond);
    benchmark::DoNotOptimize(fit.alpha.data());
  }
}
BENCHMARK(BM_FitNystromPcg)->Arg(16)->Arg(64);
