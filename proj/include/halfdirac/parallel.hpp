#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace halfdirac {

/// Process-wide worker count used by the family solvers (default 1).
inline std::atomic<int>& default_threads() {
  static std::atomic<int> n{1};
  return n;
}

/// Run fn(i) for i in [0, n). Iterations are independent; results must be
/// written to preallocated slots so the output does not depend on scheduling.
/// The first exception thrown (lowest index) is rethrown after all workers stop.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn, int threads = 0) {
  if (threads <= 0) threads = default_threads().load();
  threads = std::max(1, std::min<int>(threads, static_cast<int>(std::max<std::size_t>(n, 1))));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::mutex m;
  std::size_t bad = n;
  std::exception_ptr err;
  auto work = [&]() {
    for (std::size_t i; !failed.load() && (i = next.fetch_add(1)) < n;) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(m);
        if (i < bad) {
          bad = i;
          err = std::current_exception();
        }
        failed = true;
      }
    }
  };
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t) pool.emplace_back(work);
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);
}

}  // namespace halfdirac
