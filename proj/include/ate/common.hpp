/*
Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================
*/
#ifndef ATE_COMMON_HPP
#define ATE_COMMON_HPP

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace ate {

/// Raised on any validation or precondition failure. The message is meant to
/// be shown to a user as-is.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Worker count: ATE_MATCH_THREADS if set to a positive integer, otherwise the
/// machine's hardware concurrency.
inline unsigned worker_count() {
  if (const char* env = std::getenv("ATE_MATCH_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && v > 0) return static_cast<unsigned>(v);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1u : hw;
}

namespace detail {
// Set inside worker threads so nested parallel_for calls run inline.
inline thread_local bool in_parallel_region = false;
}  // namespace detail

/// Runs fn(i) for i in [0, count) over static contiguous chunks. Each index is
/// visited exactly once; callers write into per-index slots so results do not
/// depend on the worker count. The first exception thrown by any worker is
/// rethrown on the calling thread.
template <typename Fn>
void parallel_for(std::size_t count, Fn&& fn, unsigned workers = worker_count()) {
  if (count == 0) return;
  workers = static_cast<unsigned>(std::min<std::size_t>(std::max(1u, workers), count));
  if (workers == 1 || detail::in_parallel_region) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  const std::size_t chunk = (count + workers - 1) / workers;
  for (unsigned w = 0; w < workers; ++w) {
    const std::size_t begin = w * chunk;
    const std::size_t end = std::min(count, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&, begin, end] {
      detail::in_parallel_region = true;
      try {
        for (std::size_t i = begin; i < end; ++i) fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

/// Pairwise (tree) summation. The association order depends only on the
/// length of the input, so the result is reproducible.
inline double pairwise_sum(std::span<const double> v) {
  if (v.size() <= 8) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }
  const std::size_t half = v.size() / 2;
  return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

inline double pairwise_mean(std::span<const double> v) {
  return v.empty() ? 0.0 : pairwise_sum(v) / static_cast<double>(v.size());
}

}  // namespace ate

#endif  // ATE_COMMON_HPP
