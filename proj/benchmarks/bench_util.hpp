#pragma once

#include "detreg/regression.hpp"

namespace benchutil {

using namespace detreg;

/// Deterministic Gaussian-kernel problem with a linear parametric part.
inline RegressionProblem make_gaussian_problem(Index n, Index d = 3,
                                               std::uint64_t seed = 1) {
  Rng rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix x(n, d);
  Vector y(n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < d; ++j) x(i, j) = gauss(rng);
    y(i) = gauss(rng);
  }
  const double bw = median_heuristic_bandwidth(x);
  return make_problem(std::move(x), std::move(y), KernelSpec::gaussian(bw),
                      BasisSpec::constant_linear());
}

}  // namespace benchutil
