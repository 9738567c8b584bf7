#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <type_traits>
#include <vector>

namespace rwre {

/// Worker count used when a call passes threads = 0. Starts at the number of
/// logical cores; the CLI overrides it with --threads.
inline std::atomic<unsigned>& default_thread_slot() {
  static std::atomic<unsigned> slot{std::max(1u, std::thread::hardware_concurrency())};
  return slot;
}

inline unsigned default_threads() { return default_thread_slot().load(); }
inline void set_default_threads(unsigned n) { default_thread_slot().store(std::max(1u, n)); }

/// out[i] = f(i) for i in [0, n). Results are stored by index, so the output
/// does not depend on the number of workers. The first exception thrown by any
/// task is rethrown after all workers stop.
template <typename F>
auto parallel_map(std::size_t n, F&& f, unsigned threads = 0)
    -> std::vector<std::decay_t<std::invoke_result_t<F&, std::size_t>>> {
  using R = std::decay_t<std::invoke_result_t<F&, std::size_t>>;
  std::vector<R> out(n);
  if (threads == 0) threads = default_threads();
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(n, 1)));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) out[i] = f(i);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n || failed.load()) return;
      try {
        out[i] = f(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        failed.store(true);
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
  return out;
}

/// Pairwise (tree) sum of v[first, last); the association order is fixed by
/// the length alone.
template <typename T>
T pairwise_sum(const std::vector<T>& v, std::size_t first, std::size_t last) {
  if (last - first <= 8) {
    T s{};
    for (std::size_t i = first; i < last; ++i) s += v[i];
    return s;
  }
  const std::size_t mid = first + (last - first) / 2;
  return pairwise_sum(v, first, mid) + pairwise_sum(v, mid, last);
}

template <typename T>
T pairwise_sum(const std::vector<T>& v) {
  return pairwise_sum(v, 0, v.size());
}

}  // namespace rwre
