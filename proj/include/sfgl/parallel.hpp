#pragma once

#include <algorithm>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace sfgl {

// Worker count: min(hardware_concurrency, SFGL_THREADS if set).
// SFGL_THREADS=1 forces serial execution.
inline unsigned thread_budget() {
  unsigned hw = std::thread::hardware_concurrency();
  if (hw == 0) hw = 1;
  if (const char* env = std::getenv("SFGL_THREADS")) {
    char* end = nullptr;
    long v = std::strtol(env, &end, 10);
    if (end != env && v >= 1) hw = std::min<unsigned>(hw, static_cast<unsigned>(v));
  }
  return hw;
}

// Runs fn(begin, end) over contiguous chunks of [0, n) on up to
// thread_budget() threads. Chunking is deterministic; results must be
// written to disjoint slots so the output is independent of scheduling.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn) {
  unsigned workers = thread_budget();
  if (n == 0) return;
  if (workers <= 1 || n == 1) {
    fn(std::size_t{0}, n);
    return;
  }
  workers = std::min<unsigned>(workers, static_cast<unsigned>(n));
  std::size_t chunk = (n + workers - 1) / workers;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned t = 0; t < workers; ++t) {
    std::size_t lo = static_cast<std::size_t>(t) * chunk;
    if (lo >= n) break;
    std::size_t hi = std::min(n, lo + chunk);
    pool.emplace_back([lo, hi, &fn] { fn(lo, hi); });
  }
  for (auto& th : pool) th.join();
}

}  // namespace sfgl
