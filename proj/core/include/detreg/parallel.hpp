#pragma once

#include <cstddef>
#include <functional>

namespace detreg {

/// Worker count: DETREG_THREADS when set (>=1), otherwise hardware concurrency.
std::size_t worker_count();

/// Runs fn(i) for i in [0, n). Work is split into contiguous chunks whose
/// boundaries do not depend on the worker count, so per-chunk reductions merge
/// deterministically. fn must be safe to call concurrently for distinct i.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace detreg
