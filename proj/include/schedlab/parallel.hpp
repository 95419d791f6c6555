#pragma once

#include <cstdint>
#include <exception>
#include <mutex>

#include "schedlab/config.hpp"

namespace schedlab {

/// Runs fn(i) for i in [0, n). kParallel spreads iterations over OpenMP
/// threads; callers must make iterations independent and write results into
/// per-index slots so that any reduction happens afterwards in index order.
/// The first exception thrown by any iteration is rethrown on the caller.
template <class Fn>
void parallel_for(ExecPolicy policy, std::int64_t n, Fn&& fn) {
  if (policy == ExecPolicy::kSerial || n < 2) {
    for (std::int64_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::exception_ptr failure;
  std::mutex failure_mutex;
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    try {
      fn(i);
    } catch (...) {
      std::lock_guard<std::mutex> lock(failure_mutex);
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
}

/// Number of OpenMP threads a parallel region would use (1 without OpenMP).
int max_threads();

}  // namespace schedlab
