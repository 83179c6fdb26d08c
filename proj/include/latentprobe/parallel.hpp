#pragma once

#include <cstddef>
#include <functional>
#include <thread>
#include <vector>

namespace lp {

// Runs fn(begin, end) over a block partition of [0, n). Work items must write
// only to their own slots so results are independent of the thread count.
inline void parallel_blocks(std::size_t n, int threads,
                            const std::function<void(std::size_t, std::size_t)>& fn) {
  if (n == 0) return;
  std::size_t nthreads = threads <= 1 ? 1 : static_cast<std::size_t>(threads);
  if (nthreads > n) nthreads = n;
  if (nthreads == 1) {
    fn(0, n);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(nthreads);
  std::size_t chunk = (n + nthreads - 1) / nthreads;
  for (std::size_t t = 0; t < nthreads; ++t) {
    std::size_t begin = t * chunk;
    std::size_t end = begin + chunk < n ? begin + chunk : n;
    if (begin >= end) break;
    pool.emplace_back([&fn, begin, end] { fn(begin, end); });
  }
  for (auto& th : pool) th.join();
}

}  // namespace lp
