#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <thread>
#include <vector>

namespace tslam {

namespace detail {
inline std::atomic<int>& thread_count_storage() {
  static std::atomic<int> n{1};
  return n;
}
inline bool& inside_worker() {
  thread_local bool flag = false;
  return flag;
}
}  // namespace detail

/// Worker count used by the per-row loops. Results never depend on it: every
/// reduction is accumulated per row and summed in row order afterwards.
inline void set_num_threads(int n) {
  detail::thread_count_storage().store(std::max(1, n));
}
inline int num_threads() { return detail::thread_count_storage().load(); }

/// Calls fn(i) for i in [0, count), splitting contiguous index blocks across
/// the configured worker count. fn must only write to index-owned state.
/// Nested calls from a worker run serially.
template <typename Fn>
void parallel_for(int count, Fn&& fn) {
  const int workers = std::min(num_threads(), std::max(count, 1));
  if (workers <= 1 || count < 2 || detail::inside_worker()) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    const int begin = static_cast<int>(static_cast<long long>(count) * w / workers);
    const int end = static_cast<int>(static_cast<long long>(count) * (w + 1) / workers);
    pool.emplace_back([&, w, begin, end] {
      detail::inside_worker() = true;
      try {
        for (int i = begin; i < end; ++i) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace tslam
