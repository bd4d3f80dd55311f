#pragma once

#include <cstddef>
#include <exception>
#include <mutex>

namespace mipdiff::detail {

/// Runs fn(i) for i in [0, n) on up to `threads` OpenMP threads. The first
/// exception thrown by any iteration is rethrown after the loop.
template <typename Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn) {
  std::exception_ptr error;
  std::mutex error_mutex;
  const auto count = static_cast<long long>(n);
  const int team = threads < 1 ? 1 : threads;
#pragma omp parallel for num_threads(team) schedule(static)
  for (long long i = 0; i < count; ++i) {
    try {
      fn(static_cast<std::size_t>(i));
    } catch (...) {
      std::lock_guard lock(error_mutex);
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace mipdiff::detail
