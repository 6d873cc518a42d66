#pragma once

#include <algorithm>
#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace seci {

// Worker count comes from SECI_THREADS when set, else hardware concurrency.
inline int thread_count() {
  static int cached = [] {
    if (const char* env = std::getenv("SECI_THREADS")) {
      int v = std::atoi(env);
      if (v >= 1) return v;
    }
    unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : int(hc);
  }();
  return cached;
}

// Deterministic partition: chunk i covers [i*len/T, (i+1)*len/T). Results must
// be written to disjoint slots by the body; reductions are left to the caller
// so floating-point order never depends on scheduling.
inline void parallel_for(std::int64_t begin, std::int64_t end,
                         const std::function<void(std::int64_t, std::int64_t)>& body) {
  const std::int64_t len = end - begin;
  const int workers = std::min<std::int64_t>(thread_count(), std::max<std::int64_t>(len, 1));
  if (workers <= 1 || len < 1024) {
    body(begin, end);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    std::int64_t lo = begin + len * w / workers;
    std::int64_t hi = begin + len * (w + 1) / workers;
    pool.emplace_back([&body, lo, hi] { body(lo, hi); });
  }
  for (auto& t : pool) t.join();
}

}  // namespace seci
