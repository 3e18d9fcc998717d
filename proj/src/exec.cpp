#include "nanoflood/exec.hpp"

#include <atomic>
#include <cassert>
#include <cmath>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace nanoflood {

namespace {

std::atomic<ExecMode> g_mode{ExecMode::openmp};
std::atomic<int> g_threads{0};

constexpr std::size_t kBlock = 1024;

// Per-block partial sums in parallel, then an ordered serial combine.
// The block layout does not depend on the thread count, so the rounding
// pattern is fixed: serial and openmp agree to the last bit.
template <class BlockOp>
double blocked_reduce(std::size_t n, BlockOp&& op) {
  if (n == 0) return 0.0;
  const std::size_t nb = (n + kBlock - 1) / kBlock;
  if (nb == 1) return op(0, n);
  std::vector<double> partial(nb);
  par_for(nb, [&](std::size_t b) {
    const std::size_t lo = b * kBlock;
    const std::size_t hi = lo + kBlock < n ? lo + kBlock : n;
    partial[b] = op(lo, hi);
  });
  double total = 0.0;
  for (double p : partial) total += p;
  return total;
}

}  // namespace

ExecMode exec_mode() { return g_mode.load(std::memory_order_relaxed); }

void set_exec_mode(ExecMode mode) { g_mode.store(mode, std::memory_order_relaxed); }

void set_exec_threads(int n) {
  g_threads.store(n, std::memory_order_relaxed);
#ifdef _OPENMP
  if (n > 0) omp_set_num_threads(n);
#endif
}

int exec_threads() { return g_threads.load(std::memory_order_relaxed); }

double det_sum(std::span<const double> x) {
  return blocked_reduce(x.size(), [&](std::size_t lo, std::size_t hi) {
    double s = 0.0;
    for (std::size_t i = lo; i < hi; ++i) s += x[i];
    return s;
  });
}

double det_dot(std::span<const double> a, std::span<const double> b) {
  assert(a.size() == b.size());
  return blocked_reduce(a.size(), [&](std::size_t lo, std::size_t hi) {
    double s = 0.0;
    for (std::size_t i = lo; i < hi; ++i) s += a[i] * b[i];
    return s;
  });
}

double det_norm2(std::span<const double> x) { return std::sqrt(det_dot(x, x)); }

}  // namespace nanoflood
