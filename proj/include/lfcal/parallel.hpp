#pragma once

#include <algorithm>
#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace lfcal {

/// Worker cap: LFCAL_THREADS when set (minimum 1), hardware concurrency
/// otherwise.
inline int max_threads() {
  if (const char* env = std::getenv("LFCAL_THREADS")) {
    const int parsed = std::atoi(env);
    if (parsed >= 1) return parsed;
    return 1;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw ? static_cast<int>(hw) : 1;
}

/// Runs fn(i) for i in [0, count) across up to max_threads() workers with
/// static index striding. Each index must write only its own output slot, so
/// results are identical to the sequential order regardless of scheduling.
inline void parallel_for(int count, const std::function<void(int)>& fn) {
  const int workers = std::min(max_threads(), count);
  if (workers <= 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([=, &fn] {
      for (int i = w; i < count; i += workers) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace lfcal
