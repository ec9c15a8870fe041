#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <span>
#include <thread>
#include <vector>

namespace oslab {

/// Evaluates fn(i) for i in [0, n) on `workers` threads. Results are stored by
/// index, so the output never depends on scheduling.
template <class F>
auto parallel_map(std::size_t n, unsigned workers, F&& fn) {
  using R = decltype(fn(std::size_t{}));
  std::vector<R> out(n);
  if (workers <= 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) out[i] = fn(i);
    return out;
  }
  const std::size_t chunk = std::max<std::size_t>(1, n / (16 * workers));
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto body = [&] {
    for (;;) {
      const std::size_t lo = next.fetch_add(chunk);
      if (lo >= n) return;
      const std::size_t hi = std::min(n, lo + chunk);
      try {
        for (std::size_t i = lo; i < hi; ++i) out[i] = fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lk(failure_mu);
        if (!failure) failure = std::current_exception();
        next.store(n);
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  const unsigned t = std::min<std::size_t>(workers, n);
  pool.reserve(t);
  for (unsigned w = 0; w < t; ++w) pool.emplace_back(body);
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
  return out;
}

/// Fixed-shape tree sum; identical result for any partitioning of the work.
inline double pairwise_sum(std::span<const double> v) {
  if (v.size() <= 8) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }
  const std::size_t h = v.size() / 2;
  return pairwise_sum(v.first(h)) + pairwise_sum(v.subspan(h));
}

}  // namespace oslab
