#pragma once

#include <functional>

namespace emgrid {

/// Worker count: EMGRID_THREADS when set to a positive integer, otherwise the
/// machine parallelism reported by OpenMP.
int worker_count();

/// Runs fn(0..n-1). Static partition; with workers <= 1 the loop runs in
/// index order on the calling thread. The exception thrown by the lowest
/// failing index is rethrown after all iterations finish.
void parallel_for(int n, const std::function<void(int)>& fn, int workers = worker_count());

}  // namespace emgrid
