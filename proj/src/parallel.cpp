#include "emgrid/parallel.hpp"

#include <omp.h>

#include <cstdlib>
#include <exception>
#include <string>
#include <vector>

namespace emgrid {

int worker_count() {
  if (const char* env = std::getenv("EMGRID_THREADS")) {
    try {
      const int v = std::stoi(env);
      if (v > 0) return v;
    } catch (const std::exception&) {
    }
  }
  return omp_get_max_threads();
}

void parallel_for(int n, const std::function<void(int)>& fn, int workers) {
  if (n <= 0) return;
  std::vector<std::exception_ptr> errors(n);
  if (workers <= 1 || n == 1) {
    for (int i = 0; i < n; ++i) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  } else {
#pragma omp parallel for schedule(static) num_threads(workers)
    for (int i = 0; i < n; ++i) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace emgrid
