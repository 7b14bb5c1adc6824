#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <thread>
#include <vector>

namespace morphnas::numkit {

namespace detail {
inline std::atomic<unsigned>& thread_setting() {
  static std::atomic<unsigned> threads{std::max(1u, std::thread::hardware_concurrency())};
  return threads;
}
}  // namespace detail

inline unsigned num_threads() { return detail::thread_setting().load(); }
inline void set_num_threads(unsigned n) { detail::thread_setting().store(std::max(1u, n)); }

// Splits [0, n) into contiguous chunks, one per worker. Kernels give each
// output element to exactly one worker and fix the reduction order inside it,
// so results do not depend on the thread count.
template <class Fn>
void parallel_rows(std::size_t n, std::size_t work_per_row, Fn&& fn) {
  constexpr std::size_t kMinWork = 1u << 18;
  const std::size_t wanted = std::max<std::size_t>(1, n * work_per_row / kMinWork);
  const std::size_t workers = std::min<std::size_t>({num_threads(), wanted, std::max<std::size_t>(n, 1)});
  if (workers <= 1) {
    fn(std::size_t{0}, n);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  const std::size_t chunk = (n + workers - 1) / workers;
  for (std::size_t w = 1; w < workers; ++w) {
    const std::size_t begin = std::min(n, w * chunk);
    const std::size_t end = std::min(n, begin + chunk);
    pool.emplace_back([&fn, begin, end] { fn(begin, end); });
  }
  fn(std::size_t{0}, std::min(n, chunk));
  for (auto& t : pool) t.join();
}

}  // namespace morphnas::numkit
