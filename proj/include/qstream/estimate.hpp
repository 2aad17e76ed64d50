#pragma once

// Replica aggregation and a deterministic parallel replica runner.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <limits>
#include <span>
#include <thread>
#include <vector>

namespace qstream {

/// Sample mean with a normal-approximation 95% half-width.
struct Estimate {
  double mean = 0.0;
  double half_width_95 = 0.0;
  std::size_t n = 0;

  double std_error() const noexcept { return half_width_95 / 1.96; }
};

/// Welford accumulation in the order values are supplied.
class RunningStats {
 public:
  void add(double x) noexcept {
    ++n_;
    const double delta = x - mean_;
    mean_ += delta / static_cast<double>(n_);
    m2_ += delta * (x - mean_);
  }

  std::size_t count() const noexcept { return n_; }
  double mean() const noexcept { return mean_; }
  double variance() const noexcept {
    return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : std::numeric_limits<double>::quiet_NaN();
  }

  Estimate estimate() const noexcept {
    Estimate e;
    e.n = n_;
    e.mean = mean_;
    e.half_width_95 = n_ > 1 ? 1.96 * std::sqrt(variance() / static_cast<double>(n_))
                             : std::numeric_limits<double>::infinity();
    return e;
  }

 private:
  std::size_t n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

inline Estimate make_estimate(std::span<const double> xs) {
  RunningStats s;
  for (double x : xs) s.add(x);
  return s.estimate();
}

/// Worker count: QSTREAM_THREADS if set to a positive integer, otherwise the
/// available hardware parallelism.
inline unsigned worker_count() {
  if (const char* env = std::getenv("QSTREAM_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs fn(i) for i in [0, n) and returns the results indexed by replica.
/// Replicas are split into contiguous chunks; the output does not depend on
/// the worker count. The first exception (lowest failing chunk) is rethrown.
template <class Result, class Fn>
std::vector<Result> run_replicas(std::size_t n, Fn&& fn, unsigned workers = worker_count()) {
  std::vector<Result> out(n);
  workers = static_cast<unsigned>(std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(n, 1)));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) out[i] = fn(i);
    return out;
  }
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  const std::size_t chunk = (n + workers - 1) / workers;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      const std::size_t begin = w * chunk;
      const std::size_t end = std::min(n, begin + chunk);
      try {
        for (std::size_t i = begin; i < end; ++i) out[i] = fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

}  // namespace qstream
