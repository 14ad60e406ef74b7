// Static-partition parallel loop. Work is split into contiguous index
// ranges, one per worker, so the output of a loop writing disjoint slots
// does not depend on the thread count.
#pragma once

#include <cstdint>
#include <functional>
#include <thread>
#include <vector>

namespace magtube {

inline void parallel_for(std::int64_t n, int threads,
                         const std::function<void(std::int64_t, std::int64_t)>& body) {
  if (n <= 0) return;
  if (threads < 1) threads = 1;
  std::int64_t nt = std::min<std::int64_t>(threads, n);
  if (nt == 1) {
    body(0, n);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(nt));
  std::int64_t chunk = (n + nt - 1) / nt;
  for (std::int64_t t = 0; t < nt; ++t) {
    std::int64_t lo = t * chunk;
    std::int64_t hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &body] { body(lo, hi); });
  }
  for (auto& th : pool) th.join();
}

}  // namespace magtube
