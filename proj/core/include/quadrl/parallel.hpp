#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace quadrl {

/// Number of worker lanes to use when a config asks for "auto" (<= 0).
inline int resolve_workers(int requested) {
  if (requested > 0) return requested;
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs fn(task) for task in [0, n_tasks) on up to `workers` threads.
///
/// Tasks are striped across lanes statically. Callers make every task write
/// to its own output slot and reduce afterwards in task order, so results do
/// not depend on the worker count. The first exception thrown by any task is
/// rethrown on the calling thread after all lanes have joined.
template <typename Fn>
void parallel_for(std::size_t n_tasks, int workers, Fn&& fn) {
  const auto lanes = static_cast<std::size_t>(std::max(1, workers));
  if (lanes == 1 || n_tasks <= 1) {
    for (std::size_t t = 0; t < n_tasks; ++t) fn(t);
    return;
  }
  std::exception_ptr error;
  std::mutex error_mutex;
  {
    std::vector<std::jthread> pool;
    const std::size_t used = std::min(lanes, n_tasks);
    pool.reserve(used);
    for (std::size_t lane = 0; lane < used; ++lane) {
      pool.emplace_back([&, lane] {
        try {
          for (std::size_t t = lane; t < n_tasks; t += used) fn(t);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      });
    }
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace quadrl
