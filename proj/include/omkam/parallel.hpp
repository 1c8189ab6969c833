#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace omkam {

// Runs body(begin, end) over contiguous blocks of [0, n) on up to `workers`
// threads. Blocks are fixed by n and workers only; callers write results into
// index-addressed slots so the merged output is independent of scheduling.
template <class Body>
void parallel_blocks(std::size_t n, unsigned workers, Body&& body) {
  if (n == 0) return;
  workers = std::max(1u, workers);
  const std::size_t blocks = std::min<std::size_t>(workers, n);
  if (blocks == 1) {
    body(std::size_t{0}, n);
    return;
  }
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> threads;
  threads.reserve(blocks);
  for (std::size_t b = 0; b < blocks; ++b) {
    const std::size_t begin = n * b / blocks;
    const std::size_t end = n * (b + 1) / blocks;
    threads.emplace_back([&, begin, end] {
      try {
        body(begin, end);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  if (failure) std::rethrow_exception(failure);
}

unsigned default_workers();

}  // namespace omkam
