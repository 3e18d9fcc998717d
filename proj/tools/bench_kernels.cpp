// Micro-benchmark comparing the serial reference kernels against their
// OpenMP counterparts, verifying along the way that both produce
// bit-identical results (the parallel reductions are deterministic blocked
// sums, so they must).
//
// Usage: bench_kernels [n_cells] [repetitions]

#include <chrono>
#include <cstdio>
#include <cstring>
#include <random>
#include <string>
#include <vector>

#include "nanoflood/exec.hpp"
#include "nanoflood/petrophysics.hpp"
#include "nanoflood/sparse.hpp"

namespace {

using nanoflood::CsrMatrix;
using nanoflood::ExecMode;

template <typename F>
double best_seconds(int reps, F&& f) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    f();
    const auto t1 = std::chrono::steady_clock::now();
    best = std::min(best, std::chrono::duration<double>(t1 - t0).count());
  }
  return best;
}

bool bytes_equal(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() &&
         std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

struct Row {
  const char* name;
  double serial_ms;
  double openmp_ms;
  bool identical;
};

void print_rows(const std::vector<Row>& rows) {
  std::printf("%-22s %12s %12s %9s %10s\n", "kernel", "serial [ms]", "openmp [ms]", "speedup",
              "identical");
  for (const Row& r : rows) {
    std::printf("%-22s %12.3f %12.3f %8.2fx %10s\n", r.name, r.serial_ms, r.openmp_ms,
                r.serial_ms / r.openmp_ms, r.identical ? "yes" : "NO");
  }
}

}  // namespace

int main(int argc, char** argv) {
  const int n = argc > 1 ? std::atoi(argv[1]) : 1 << 20;
  const int reps = argc > 2 ? std::atoi(argv[2]) : 7;

  std::mt19937_64 rng(42);
  auto uniform = [&]() { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };

  nanoflood::RockFluidParams rock;
  std::vector<double> s(n), x(n), y(n);
  for (int i = 0; i < n; ++i) {
    s[i] = rock.s_wr + uniform() * rock.mobile_range();
    x[i] = uniform() - 0.5;
    y[i] = uniform() - 0.5;
  }
  std::vector<double> lam_w(n), lam_n(n), lam_t(n), f_w(n);

  // 5-point Laplacian on an nx-by-ny lattice sized to n unknowns.
  const int nx = 1 << 10;
  const int ny = n / nx;
  std::vector<nanoflood::Triplet> trips;
  trips.reserve(static_cast<std::size_t>(n) * 5);
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const int c = j * nx + i;
      trips.push_back({c, c, 4.0});
      if (i > 0) trips.push_back({c, c - 1, -1.0});
      if (i + 1 < nx) trips.push_back({c, c + 1, -1.0});
      if (j > 0) trips.push_back({c, c - nx, -1.0});
      if (j + 1 < ny) trips.push_back({c, c + nx, -1.0});
    }
  }
  const CsrMatrix a = CsrMatrix::from_triplets(nx * ny, trips);
  std::vector<double> spmv_x(nx * ny), spmv_y(nx * ny);
  for (int i = 0; i < nx * ny; ++i) spmv_x[i] = uniform();

  std::printf("n = %d, reps = %d, threads = %d\n\n", n, reps, nanoflood::exec_threads());

  std::vector<Row> rows;
  auto bench = [&](const char* name, auto&& kernel, std::vector<double>& out) {
    Row row{name, 0.0, 0.0, false};
    nanoflood::set_exec_mode(ExecMode::serial);
    row.serial_ms = 1e3 * best_seconds(reps, kernel);
    const std::vector<double> serial_out = out;
    nanoflood::set_exec_mode(ExecMode::openmp);
    row.openmp_ms = 1e3 * best_seconds(reps, kernel);
    row.identical = bytes_equal(serial_out, out);
    rows.push_back(row);
  };

  bench("mobilities_field", [&] {
    nanoflood::mobilities_field(s, rock, lam_w, lam_n, lam_t, f_w);
  }, f_w);
  bench("csr_spmv", [&] { a.multiply(spmv_x, spmv_y); }, spmv_y);

  std::vector<double> dot_out(1);
  bench("det_dot", [&] { dot_out[0] = nanoflood::det_dot(x, y); }, dot_out);
  std::vector<double> sum_out(1);
  bench("det_sum", [&] { sum_out[0] = nanoflood::det_sum(x); }, sum_out);

  print_rows(rows);

  bool all_identical = true;
  for (const Row& r : rows) all_identical = all_identical && r.identical;
  if (!all_identical) {
    std::printf("\nFAIL: serial and openmp kernels disagree\n");
    return 1;
  }
  return 0;
}
