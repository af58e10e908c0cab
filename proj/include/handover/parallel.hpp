#pragma once

#include <cstddef>
#include <exception>
#include <mutex>

namespace handover {

/// Execution policy for the data-parallel kernels. `Serial` is the reference
/// path; `Parallel` distributes independent iterations over OpenMP threads.
/// Both must produce bit-identical results.
enum class Exec { Serial, Parallel };

/// Runs fn(i) for i in [0, count). An exception thrown by any iteration is
/// rethrown on the calling thread after the loop (the first one wins).
template <class Fn>
void parallel_for(Exec exec, std::size_t count, Fn&& fn) {
  if (exec == Exec::Serial) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::exception_ptr failure;
  std::mutex failure_mutex;
  const auto n = static_cast<long long>(count);
#pragma omp parallel for schedule(dynamic)
  for (long long i = 0; i < n; ++i) {
    try {
      fn(static_cast<std::size_t>(i));
    } catch (...) {
      std::lock_guard lock(failure_mutex);
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
}

int max_threads();

}  // namespace handover
