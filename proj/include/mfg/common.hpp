#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace mfg {

// Tolerances shared across the library.
inline constexpr double kMassTol = 1e-12;    // simplex mass / kernel row sums
inline constexpr double kDedupTol = 1e-10;   // sup-norm generator dedup
inline constexpr double kExactMfeTol = 1e-10;// "exact" equilibrium gap slack

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DimensionMismatch : Error {
  using Error::Error;
};
struct NotFullSupport : Error {
  using Error::Error;
};
struct SizeGuardExceeded : Error {
  using Error::Error;
};
struct ValidationError : Error {
  using Error::Error;
};

inline double sup_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw DimensionMismatch("sup_distance: length mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// Pairwise (tree) summation with a fixed topology, so results do not depend
// on any runtime partitioning of the work.
inline double pairwise_sum(std::span<const double> xs) {
  if (xs.empty()) return 0.0;
  if (xs.size() <= 8) {
    double s = 0.0;
    for (double x : xs) s += x;
    return s;
  }
  const std::size_t half = xs.size() / 2;
  return pairwise_sum(xs.first(half)) + pairwise_sum(xs.subspan(half));
}

// Runs fn(i) for i in [0, n) over a fixed chunk grid. Chunking depends only on
// n, never on the worker count, and chunk results are combined in chunk order,
// so any reduction built on top is bitwise reproducible for every `threads`.
inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn,
                         unsigned threads = 0) {
  if (n == 0) return;
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, n));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(threads);
  std::size_t chunk = (n + threads - 1) / threads;
  for (unsigned w = 0; w < threads; ++w) {
    const std::size_t lo = w * chunk, hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([&fn, lo, hi] {
      for (std::size_t i = lo; i < hi; ++i) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

// Least-squares slope of log(y) against log(N) over the largest `tail`
// entries, with the fit's R^2.
inline void fit_loglog(const std::vector<int>& Ns, const std::vector<double>& ys, int tail,
                       double& slope, double& r2) {
  int n = static_cast<int>(Ns.size());
  int lo = std::max(0, n - tail);
  double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
  int m = 0;
  for (int k = lo; k < n; ++k) {
    double x = std::log(static_cast<double>(Ns[static_cast<std::size_t>(k)]));
    double y = std::log(std::max(ys[static_cast<std::size_t>(k)], 1e-300));
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    syy += y * y;
    ++m;
  }
  double denom = m * sxx - sx * sx;
  slope = denom == 0.0 ? 0.0 : (m * sxy - sx * sy) / denom;
  double ss_tot = syy - sy * sy / m;
  double intercept = (sy - slope * sx) / m;
  double ss_res = 0.0;
  for (int k = lo; k < n; ++k) {
    double x = std::log(static_cast<double>(Ns[static_cast<std::size_t>(k)]));
    double y = std::log(std::max(ys[static_cast<std::size_t>(k)], 1e-300));
    double e = y - (intercept + slope * x);
    ss_res += e * e;
  }
  r2 = ss_tot <= 0.0 ? 1.0 : 1.0 - ss_res / ss_tot;
}

// FNV-1a, used for manifest hashes of scenario files.
inline std::uint64_t fnv1a64(std::span<const char> bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace mfg
