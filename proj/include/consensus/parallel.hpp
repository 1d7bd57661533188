#pragma once

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace consensus::par {

namespace detail {
inline int& override_slot() {
  static int v = 0;
  return v;
}
}  // namespace detail

// Worker cap: an explicit set_max_threads() wins, then the CONSENSUS_THREADS
// environment variable, then hardware concurrency. The cap only affects wall
// time — every parallel pass in the library writes disjoint, preassigned
// slots, so output is identical for any worker count.
inline int max_threads() {
  if (detail::override_slot() > 0) return detail::override_slot();
  if (const char* env = std::getenv("CONSENSUS_THREADS")) {
    int v = std::atoi(env);
    if (v > 0) return v;
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw ? static_cast<int>(hw) : 1;
}

// n <= 0 clears the override.
inline void set_max_threads(int n) { detail::override_slot() = n > 0 ? n : 0; }

// Runs body(lo, hi) over fixed-size blocks of [0, n). Block boundaries depend
// only on n and grain, never on the worker count or scheduling order.
template <class Body>
void for_blocks(std::size_t n, std::size_t grain, Body&& body) {
  if (n == 0) return;
  if (grain == 0) grain = 1;
  const std::size_t blocks = (n + grain - 1) / grain;
  const int workers =
      static_cast<int>(std::min<std::size_t>(blocks, static_cast<std::size_t>(std::max(1, max_threads()))));
  if (workers <= 1) {
    body(std::size_t{0}, n);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mu;
  auto run = [&] {
    for (;;) {
      const std::size_t b = next.fetch_add(1, std::memory_order_relaxed);
      if (b >= blocks) return;
      const std::size_t lo = b * grain;
      const std::size_t hi = std::min(n, lo + grain);
      try {
        body(lo, hi);
      } catch (...) {
        std::lock_guard<std::mutex> g(error_mu);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers - 1));
  for (int t = 1; t < workers; ++t) pool.emplace_back(run);
  run();
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace consensus::par
