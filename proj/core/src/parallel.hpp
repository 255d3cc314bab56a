#pragma once

#include <algorithm>
#include <exception>
#include <thread>
#include <vector>

namespace sparseworld::detail {

// Runs `work(i)` for i in [0, n) on up to `jobs` threads with a static split.
// Results must be written to per-index slots; callers reduce in index order.
template <typename F>
void parallel_for(int n, int jobs, F&& work) {
  jobs = std::max(1, std::min(jobs, n));
  if (jobs == 1) {
    for (int i = 0; i < n; ++i) work(i);
    return;
  }
  std::vector<std::thread> threads;
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(jobs));
  for (int w = 0; w < jobs; ++w) {
    threads.emplace_back([&, w] {
      try {
        for (int i = w; i < n; i += jobs) work(i);
      } catch (...) {
        errors[static_cast<std::size_t>(w)] = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace sparseworld::detail
