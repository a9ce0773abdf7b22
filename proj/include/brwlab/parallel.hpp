#pragma once

#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace brwlab {

// Worker count: BRWLAB_THREADS env var wins, otherwise hardware concurrency.
inline unsigned worker_count() {
  if (const char* env = std::getenv("BRWLAB_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v >= 1 && v <= 4096) return static_cast<unsigned>(v);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? hw : 1;
}

// Runs fn(i) for i in [0, n) and returns results indexed by i.  Work is
// striped over workers but each slot's result depends only on its index, so
// the output is identical for any worker count.  Reduce sequentially over the
// returned vector to keep floating-point accumulation order fixed.
template <class T, class F>
std::vector<T> parallel_map(std::size_t n, F&& fn, unsigned workers = 0) {
  std::vector<T> out(n);
  if (n == 0) return out;
  if (workers == 0) workers = worker_count();
  if (workers > n) workers = static_cast<unsigned>(n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) out[i] = fn(i);
    return out;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < n; i += workers) out[i] = fn(i);
    });
  }
  for (auto& t : pool) t.join();
  return out;
}

}  // namespace brwlab
