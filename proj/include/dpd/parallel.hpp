#pragma once

#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace dpd {

// Worker count: DPD_THREADS caps it, hardware concurrency is the default.
inline std::size_t thread_budget() {
  if (const char* env = std::getenv("DPD_THREADS")) {
    long v = std::atol(env);
    if (v >= 1) return static_cast<std::size_t>(v);
  }
  unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : hc;
}

// Runs fn(i) for i in [0, count) across up to thread_budget() threads. Each
// task must write only to its own slot; results stay deterministic because
// the index assignment is static.
inline void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn) {
  std::size_t workers = std::min(count, thread_budget());
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::thread> threads;
  threads.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    threads.emplace_back([&, w] {
      for (std::size_t i = w; i < count; i += workers) fn(i);
    });
  }
  for (auto& t : threads) t.join();
}

}  // namespace dpd
