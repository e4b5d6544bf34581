#pragma once

#include <algorithm>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace gnlp {

/// Runs fn(i) for i in [0, count) on up to num_threads workers with static
/// chunking. Work items must write to disjoint locations; any determinism
/// requirement on the combined result is the caller's job (merge serially).
/// The first exception thrown by a worker is rethrown on the calling thread.
inline void parallel_for(int count, int num_threads,
                         const std::function<void(int)>& fn) {
  if (count <= 0) return;
  num_threads = std::max(1, std::min(num_threads, count));
  if (num_threads == 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::thread> workers;
  workers.reserve(num_threads);
  std::exception_ptr first_error;
  std::mutex error_mutex;
  const int chunk = (count + num_threads - 1) / num_threads;
  for (int t = 0; t < num_threads; ++t) {
    const int begin = t * chunk;
    const int end = std::min(count, begin + chunk);
    if (begin >= end) break;
    workers.emplace_back([&, begin, end]() {
      try {
        for (int i = begin; i < end; ++i) fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    });
  }
  for (auto& w : workers) w.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace gnlp
