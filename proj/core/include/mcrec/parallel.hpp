#pragma once

#include <algorithm>
#include <functional>
#include <thread>
#include <vector>

namespace mcrec {

// Runs fn(worker, begin, end) over a static contiguous partition of
// [0, n). The partition depends only on (n, workers), so results
// written to per-index slots are identical for any worker count.
inline void parallel_chunks(int n, int workers,
                            const std::function<void(int, int, int)>& fn) {
  workers = std::max(1, std::min(workers, n));
  if (workers <= 1) {
    if (n > 0) fn(0, 0, n);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    const int begin = static_cast<int>(static_cast<long long>(n) * w / workers);
    const int end =
        static_cast<int>(static_cast<long long>(n) * (w + 1) / workers);
    pool.emplace_back([&fn, w, begin, end] { fn(w, begin, end); });
  }
  for (auto& t : pool) t.join();
}

}  // namespace mcrec
