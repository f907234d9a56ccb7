#pragma once

#include <cstddef>
#include <functional>
#include <thread>
#include <vector>

namespace lct {

inline unsigned worker_count() {
  const unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 1 : n;
}

// Static block partition of [0, n) across workers. body(worker, begin, end).
inline void parallel_blocks(size_t n,
                            const std::function<void(unsigned, size_t, size_t)>& body) {
  const unsigned nw = static_cast<unsigned>(
      std::min<size_t>(worker_count(), n == 0 ? 1 : n));
  if (nw <= 1) {
    body(0, 0, n);
    return;
  }
  std::vector<std::thread> threads;
  threads.reserve(nw);
  const size_t chunk = (n + nw - 1) / nw;
  for (unsigned w = 0; w < nw; ++w) {
    const size_t begin = w * chunk;
    const size_t end = std::min(n, begin + chunk);
    if (begin >= end) break;
    threads.emplace_back([&, w, begin, end] { body(w, begin, end); });
  }
  for (auto& t : threads) t.join();
}

}  // namespace lct
