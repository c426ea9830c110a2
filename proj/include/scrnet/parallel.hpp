#ifndef SCRNET_PARALLEL_HPP
#define SCRNET_PARALLEL_HPP

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

namespace scrnet {

/// Worker cap from SCRNET_THREADS; unset, 0 or unparsable means 1 (the
/// deterministic single-threaded mode).
inline int worker_count() {
  const char* env = std::getenv("SCRNET_THREADS");
  if (!env) return 1;
  char* end = nullptr;
  const long n = std::strtol(env, &end, 10);
  if (end == env || *end != '\0' || n <= 0) return 1;
  return static_cast<int>(std::min<long>(n, 256));
}

/// Runs fn(i) for i in [0, n). Items are independent; when several throw,
/// the exception of the lowest index is rethrown so errors do not depend on
/// scheduling.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn, int workers = worker_count()) {
  if (workers <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto run = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < n;) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  const std::size_t spawn = std::min<std::size_t>(n, static_cast<std::size_t>(workers));
  for (std::size_t t = 0; t < spawn; ++t) pool.emplace_back(run);
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace scrnet

#endif  // SCRNET_PARALLEL_HPP
