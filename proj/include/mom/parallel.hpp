#pragma once

// Deterministic parallel map: tasks write into pre-sized slots in canonical
// order, so results never depend on scheduling.

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <limits>
#include <mutex>
#include <thread>
#include <vector>

namespace mom {

namespace detail {
inline std::atomic<std::size_t>& parallelism_override() {
  static std::atomic<std::size_t> v{0};
  return v;
}
inline thread_local bool in_parallel_region = false;
}  // namespace detail

/// Number of worker threads used by parallel_for; 0 restores the default.
inline void set_parallelism(std::size_t threads) {
  detail::parallelism_override().store(threads);
}

inline std::size_t parallelism() {
  const std::size_t o = detail::parallelism_override().load();
  if (o > 0) return o;
  return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

// Calls body(i) for i in [0, count). Nested calls run serially. If any call
// throws, the exception from the lowest index is rethrown.
template <class Body>
void parallel_for(std::size_t count, Body&& body) {
  const std::size_t threads =
      detail::in_parallel_region ? 1 : std::min(parallelism(), count);
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }

  std::atomic<std::size_t> next{0};
  std::mutex mu;
  std::size_t failed_index = std::numeric_limits<std::size_t>::max();
  std::exception_ptr failure;

  auto worker = [&] {
    detail::in_parallel_region = true;
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) break;
      try {
        body(i);
      } catch (...) {
        std::lock_guard lock(mu);
        if (i < failed_index) {
          failed_index = i;
          failure = std::current_exception();
        }
      }
    }
    detail::in_parallel_region = false;
  };

  std::vector<std::thread> pool;
  pool.reserve(threads - 1);
  for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace mom
