#pragma once

#include <cstddef>
#include <span>

// Execution policy for the hot loops. Every kernel runs in one of two modes:
//
//   serial  - plain sequential loop, the reference implementation
//   openmp  - OpenMP worksharing over the same loop body
//
// Reductions use a fixed block decomposition (block size independent of the
// thread count), so serial and openmp modes produce bit-identical results
// and replays of a run are deterministic regardless of OMP_NUM_THREADS.

namespace nanoflood {

enum class ExecMode { serial, openmp };

ExecMode exec_mode();
void set_exec_mode(ExecMode mode);

/// Number of threads the openmp mode will use (<=0 leaves the runtime default).
void set_exec_threads(int n);
int exec_threads();

/// Elementwise parallel loop; no cross-iteration dependencies allowed.
template <class F>
inline void par_for(std::size_t n, F&& f) {
  if (exec_mode() == ExecMode::openmp) {
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < static_cast<long long>(n); ++i) {
      f(static_cast<std::size_t>(i));
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) f(i);
  }
}

/// Deterministic blocked reductions (see file comment).
double det_sum(std::span<const double> x);
double det_dot(std::span<const double> a, std::span<const double> b);
double det_norm2(std::span<const double> x);

}  // namespace nanoflood
