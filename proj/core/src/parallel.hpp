#pragma once

#include <cstddef>
#include <exception>
#include <mutex>

namespace fshe::detail {

/// Runs fn(i) for i in [0, n) on the OpenMP team. Work items must write only
/// to their own slot; the first exception thrown by any item is rethrown.
template <class Fn>
void parallel_for(std::size_t n, Fn&& fn) {
  std::exception_ptr failure;
  std::mutex failure_mutex;
  const auto count = static_cast<long long>(n);
#pragma omp parallel for schedule(dynamic, 1)
  for (long long i = 0; i < count; ++i) {
    try {
      fn(static_cast<std::size_t>(i));
    } catch (...) {
      std::lock_guard<std::mutex> lock(failure_mutex);
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
}

/// Paths per Monte Carlo chunk; a chunk is the unit of RNG stream assignment,
/// so results do not depend on the number of threads.
inline constexpr std::size_t kChunkSize = 256;

inline std::size_t chunk_count(std::size_t n) { return (n + kChunkSize - 1) / kChunkSize; }

}  // namespace fshe::detail
