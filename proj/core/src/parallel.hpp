#pragma once

#include <cstdint>
#include <algorithm>
#include <exception>
#include <thread>
#include <vector>

namespace wbc::detail {

// Runs body(k) for k in [0, count) on up to `threads` workers with a static
// interleaved assignment. Results must be written to per-index slots, which
// keeps the output independent of the thread count. The exception thrown for
// the smallest failing index is rethrown.
template <typename Body>
void parallel_for(std::int64_t count, int threads, Body&& body) {
  if (count <= 0) return;
  const std::int64_t workers = std::max<std::int64_t>(1, std::min<std::int64_t>(threads, count));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(count));
  auto work = [&](std::int64_t w) {
    for (std::int64_t k = w; k < count; k += workers) {
      try {
        body(k);
      } catch (...) {
        errors[static_cast<std::size_t>(k)] = std::current_exception();
      }
    }
  };
  if (workers == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers - 1));
    for (std::int64_t w = 1; w < workers; ++w) pool.emplace_back(work, w);
    work(0);
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace wbc::detail
