#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace hai {

// Resolves a requested thread count: 0 means "use HAI_THREADS, else 1".
unsigned resolve_threads(unsigned requested) noexcept;

// Runs fn(begin, end) over contiguous chunks of [0, n). Chunk boundaries depend
// only on n and the thread count; the first exception thrown is rethrown.
template <class Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn) {
  threads = std::max(1U, threads);
  if (threads == 1 || n < 2) {
    if (n > 0) fn(std::size_t{0}, n);
    return;
  }
  const std::size_t chunks = std::min<std::size_t>(threads, n);
  std::vector<std::exception_ptr> errors(chunks);
  {
    std::vector<std::jthread> pool;
    pool.reserve(chunks);
    for (std::size_t c = 0; c < chunks; ++c) {
      const std::size_t begin = n * c / chunks;
      const std::size_t end = n * (c + 1) / chunks;
      pool.emplace_back([&, c, begin, end] {
        try {
          fn(begin, end);
        } catch (...) {
          errors[c] = std::current_exception();
        }
      });
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace hai
