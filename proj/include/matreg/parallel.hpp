#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

namespace matreg {

/// Worker count: MATREG_THREADS when set to a positive integer, otherwise
/// the hardware concurrency (at least 1).
inline std::size_t thread_budget() {
  if (const char* env = std::getenv("MATREG_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && v > 0) return static_cast<std::size_t>(v);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

namespace detail {
inline thread_local bool inside_parallel_region = false;
}

/// Runs fn(i) for i in [0, n). Results must be written by index; the
/// schedule never affects what fn computes. Exceptions are captured per
/// index and returned (null where fn succeeded).
template <class Fn>
std::vector<std::exception_ptr> parallel_for(std::size_t n, Fn&& fn,
                                             std::size_t threads = thread_budget()) {
  std::vector<std::exception_ptr> errors(n);
  // Nested calls run serially on the calling worker.
  const std::size_t workers =
      detail::inside_parallel_region ? 1 : std::min(threads, n);
  auto run = [&](std::size_t i) {
    try {
      fn(i);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) run(i);
    return errors;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      detail::inside_parallel_region = true;
      for (std::size_t i = next++; i < n; i = next++) run(i);
    });
  for (auto& t : pool) t.join();
  return errors;
}

inline std::string describe(const std::exception_ptr& e) {
  try {
    std::rethrow_exception(e);
  } catch (const std::exception& ex) {
    return ex.what();
  } catch (...) {
    return "unknown error";
  }
}

}  // namespace matreg
