#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace stkde {

//! Resolves a worker count: 0 means all hardware threads.
inline std::size_t resolve_threads(std::size_t requested)
{
  if (requested > 0)
    return requested;
  return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

//! Calls fn(i) for i in [0, n) on up to `threads` workers. Each index is
//! visited exactly once; callers write results by index so the outcome does
//! not depend on scheduling. The first exception thrown (lowest index) is
//! rethrown after all workers finish.
template<class Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn&& fn)
{
  threads = std::min(resolve_threads(threads), n);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i)
      fn(i);
    return;
  }
  std::atomic<std::size_t> next{ 0 };
  std::mutex guard;
  std::exception_ptr error;
  std::size_t error_index = n;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n)
        return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(guard);
        if (i < error_index) {
          error_index = i;
          error = std::current_exception();
        }
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (std::size_t t = 0; t < threads; ++t)
    pool.emplace_back(worker);
  for (auto& t : pool)
    t.join();
  if (error)
    std::rethrow_exception(error);
}

} // namespace stkde
