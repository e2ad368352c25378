#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

namespace lipflat {

inline constexpr const char* kVersion = "lipflat 0.1.0";

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Index = std::ptrdiff_t;

/// Raised when an operation's documented precondition does not hold.
class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a postcondition or acceptance check fails.
class AssertionFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool ok, const std::string& what) {
  if (!ok) throw PreconditionError(what);
}

inline void ensure(bool ok, const std::string& what) {
  if (!ok) throw AssertionFailure(what);
}

namespace detail {

inline std::atomic<int>& thread_setting() {
  static std::atomic<int> n{0};
  return n;
}

}  // namespace detail

/// Worker count for internal parallel loops; 0 means "environment or hardware default".
inline void set_threads(int n) { detail::thread_setting() = std::max(0, n); }

inline int threads() {
  int n = detail::thread_setting();
  if (n > 0) return n;
  if (const char* env = std::getenv("LIPFLAT_THREADS")) {
    int v = std::atoi(env);
    if (v > 0) return v;
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(std::min(hw, 16u));
}

/// Runs fn(i) for i in [0, n) over contiguous blocks. fn must only write to slots it owns.
template <typename Fn>
void parallel_for(Index n, Fn&& fn, Index grain = 1) {
  if (n <= 0) return;
  Index workers = std::min<Index>(threads(), (n + grain - 1) / grain);
  if (workers <= 1) {
    for (Index i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(static_cast<size_t>(workers));
  Index block = (n + workers - 1) / workers;
  for (Index w = 0; w < workers; ++w) {
    Index lo = w * block, hi = std::min(n, lo + block);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &fn] {
      for (Index i = lo; i < hi; ++i) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

/// Max of fn(i) over [0, n); exact regardless of schedule.
template <typename Fn>
double parallel_max(Index n, Fn&& fn, double init = -std::numeric_limits<double>::infinity()) {
  if (n <= 0) return init;
  Index workers = std::max<Index>(1, std::min<Index>(threads(), n));
  std::vector<double> part(static_cast<size_t>(workers), init);
  Index block = (n + workers - 1) / workers;
  parallel_for(workers, [&](Index w) {
    double m = init;
    for (Index i = w * block; i < std::min(n, (w + 1) * block); ++i) m = std::max(m, fn(i));
    part[static_cast<size_t>(w)] = m;
  });
  return *std::max_element(part.begin(), part.end());
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Independent stream for item `i` under `seed`; lets sampled loops run in any order.
inline std::mt19937_64 stream(std::uint64_t seed, std::uint64_t i) {
  return std::mt19937_64(splitmix64(splitmix64(seed) ^ (i * 0xD1B54A32D192ED03ULL)));
}

inline Vec gaussian(std::mt19937_64& rng, Index m) {
  std::normal_distribution<double> g(0.0, 1.0);
  Vec v(m);
  for (Index i = 0; i < m; ++i) v(i) = g(rng);
  return v;
}

inline double uniform(std::mt19937_64& rng, double lo = 0.0, double hi = 1.0) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

/// All sign vectors in {-1,1}^m in binary order.
inline std::vector<Vec> sign_vertices(Index m) {
  std::vector<Vec> out;
  std::uint64_t count = std::uint64_t{1} << m;
  out.reserve(count);
  for (std::uint64_t mask = 0; mask < count; ++mask) {
    Vec v(m);
    for (Index i = 0; i < m; ++i) v(i) = (mask >> i) & 1 ? -1.0 : 1.0;
    out.push_back(std::move(v));
  }
  return out;
}

}  // namespace lipflat
