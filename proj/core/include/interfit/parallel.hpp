#pragma once

#include <algorithm>
#include <exception>
#include <thread>
#include <vector>

namespace interfit {

/// Runs body(i) for i in [0, n) on up to `threads` workers. Work is split
/// into contiguous blocks, so callers that write per-index results and reduce
/// them afterwards in index order get the same answer for any thread count.
template <class Body>
void parallel_for(int n, int threads, Body&& body) {
  if (n <= 0) return;
  threads = std::clamp(threads, 1, n);
  if (threads == 1) {
    for (int i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::exception_ptr> errors(threads);
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (int w = 0; w < threads; ++w) {
    const int begin = static_cast<int>(static_cast<long long>(n) * w / threads);
    const int end = static_cast<int>(static_cast<long long>(n) * (w + 1) / threads);
    pool.emplace_back([&, w, begin, end] {
      try {
        for (int i = begin; i < end; ++i) body(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace interfit
