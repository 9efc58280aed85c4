#pragma once

// Index-parallel loop over independent trials. Results land in caller-owned
// slots, so output order never depends on scheduling.

#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "fppgeo/error.hpp"

namespace fppgeo {

/// Worker count from FPPGEO_JOBS, else 1.
inline int default_jobs() {
  if (const char* s = std::getenv("FPPGEO_JOBS")) {
    try {
      const int j = std::stoi(s);
      if (j >= 1) return j;
    } catch (const std::exception&) {
    }
    throw Error(ErrorCode::kConfig, std::string("FPPGEO_JOBS: expected a positive integer, got '") + s + "'");
  }
  return 1;
}

/// Calls f(i) for i in [0, n) on up to `jobs` threads. If any call throws,
/// the exception from the smallest failing index is rethrown.
template <typename F>
void parallel_for(std::int64_t n, int jobs, F&& f) {
  if (n <= 0) return;
  if (jobs <= 1 || n == 1) {
    for (std::int64_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<std::int64_t> next{0};
  std::mutex m;
  std::int64_t failed_at = n;
  std::exception_ptr failure;
  auto worker = [&] {
    for (std::int64_t i = next++; i < n; i = next++) {
      try {
        f(i);
      } catch (...) {
        std::lock_guard lock(m);
        if (i < failed_at) {
          failed_at = i;
          failure = std::current_exception();
        }
      }
    }
  };
  std::vector<std::thread> pool;
  const auto k = static_cast<int>(std::min<std::int64_t>(jobs, n));
  pool.reserve(k);
  for (int t = 0; t < k; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace fppgeo
