#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace vsgdfd {

inline std::size_t resolve_workers(std::size_t requested) {
  return requested ? requested : std::max(1u, std::thread::hardware_concurrency());
}

/// Calls body(k) for every k in [0, count) on up to `workers` threads
/// (0 = hardware concurrency). Indices are handed out dynamically, so `body`
/// must write its result to a slot owned by k. The first exception thrown
/// stops further dispatch and is rethrown here.
template <class Body>
void parallel_for(std::size_t count, std::size_t workers, Body&& body) {
  if (count == 0) return;
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  const auto work = [&] {
    for (std::size_t k = next.fetch_add(1); k < count; k = next.fetch_add(1)) {
      try {
        body(k);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(count);
      }
    }
  };
  const std::size_t n = std::min(resolve_workers(workers), count);
  if (n == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(n);
    for (std::size_t w = 0; w < n; ++w) pool.emplace_back(work);
  }
  if (failure) std::rethrow_exception(failure);
}

}  // namespace vsgdfd
