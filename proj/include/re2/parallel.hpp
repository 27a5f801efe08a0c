#pragma once

#include <cstddef>
#include <cstdlib>
#include <thread>
#include <vector>

namespace re2 {

// Worker count for data-parallel loops. Defaults to 1; RE2_WORKERS overrides.
inline int worker_count() {
  static const int n = [] {
    if (const char* env = std::getenv("RE2_WORKERS")) {
      int v = std::atoi(env);
      if (v > 0) return v;
    }
    return 1;
  }();
  return n;
}

// Runs fn(i) for i in [0, count). Each index must write only to its own output
// slot; results are then independent of the worker schedule.
template <typename Fn>
void parallel_for(std::size_t count, Fn&& fn) {
  const int workers = worker_count();
  if (workers <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  const std::size_t stride = static_cast<std::size_t>(workers);
  for (std::size_t w = 0; w < stride; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < count; i += stride) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace re2
