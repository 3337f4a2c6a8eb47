#pragma once

#include <cstddef>
#include <thread>
#include <vector>

namespace mcd {

inline unsigned default_workers() {
  unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 1 : n;
}

/// Static contiguous partition so reductions done per-worker stay
/// deterministic for a fixed worker count.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& body, unsigned workers = 0) {
  if (workers == 0) workers = default_workers();
  if (n == 0) return;
  if (workers <= 1 || n == 1) {
    for (std::size_t i = 0; i < n; ++i) body(i, 0u);
    return;
  }
  if (workers > n) workers = static_cast<unsigned>(n);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  const std::size_t chunk = (n + workers - 1) / workers;
  for (unsigned w = 0; w < workers; ++w) {
    const std::size_t lo = w * chunk;
    const std::size_t hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([&body, lo, hi, w] {
      for (std::size_t i = lo; i < hi; ++i) body(i, w);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace mcd
