#pragma once

#include <algorithm>
#include <exception>
#include <thread>
#include <vector>

namespace ticmkv {

/// Resolves a worker hint: 0 means one worker per hardware thread.
inline int resolve_workers(int hint) {
  if (hint > 0) return hint;
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Calls body(begin, end) on contiguous chunks of [0, n). Each index is
/// owned by exactly one chunk, so per-index writes give results that do not
/// depend on the worker count. The first exception thrown is rethrown.
template <typename Body>
void parallel_for(int n, int workers, Body&& body) {
  workers = std::min(resolve_workers(workers), std::max(n, 1));
  if (workers <= 1 || n < 2) {
    if (n > 0) body(0, n);
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> threads;
  threads.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    const int begin = static_cast<int>(static_cast<long long>(n) * w / workers);
    const int end = static_cast<int>(static_cast<long long>(n) * (w + 1) / workers);
    threads.emplace_back([&, w, begin, end] {
      try {
        body(begin, end);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace ticmkv
