#pragma once

// Runs fn(0..count-1) on a small thread pool and returns the results in index
// order, so the merged output does not depend on the worker count.

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace crowdsense::detail {

template <class Result, class Fn>
std::vector<Result> run_indexed(long count, int workers, Fn&& fn) {
  std::vector<Result> out(static_cast<std::size_t>(std::max(0L, count)));
  workers = std::max(1, std::min<int>(workers, static_cast<int>(std::max(1L, count))));
  if (workers == 1) {
    for (long b = 0; b < count; ++b) out[b] = fn(b);
    return out;
  }
  std::atomic<long> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto work = [&] {
    for (long b = next++; b < count; b = next++) {
      try {
        out[b] = fn(b);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        next = count;
      }
    }
  };
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) pool.emplace_back(work);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
  return out;
}

}  // namespace crowdsense::detail
