#pragma once

#include <cstdlib>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace glmkl {

// Worker count: GL_THREADS if set, hardware concurrency otherwise, never 0.
inline int gl_threads() {
  if (const char* env = std::getenv("GL_THREADS")) {
    const int v = std::atoi(env);
    if (v >= 1) return v;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw ? static_cast<int>(hw) : 1;
}

// Runs fn(0..count-1) across workers on a strided static partition: worker t
// owns indices t, t+T, t+2T, ... Results must go into per-index slots; with
// ownership fixed by index arithmetic alone, output cannot depend on timing
// or on how many workers there are. fn must handle its own per-item errors;
// anything that escapes is rethrown (lowest index wins) after all workers
// finish.
inline void parallel_for(long count, const std::function<void(long)>& fn) {
  if (count <= 0) return;
  const int threads = static_cast<int>(std::min<long>(gl_threads(), count));
  if (threads == 1) {
    for (long i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(count));
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(threads));
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&, t]() {
      for (long i = t; i < count; i += threads) {
        try {
          fn(i);
        } catch (...) {
          errors[static_cast<std::size_t>(i)] = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace glmkl
