#pragma once

#include <span>
#include <vector>

#include "nanoflood/common.hpp"

// Compressed-sparse-row matrices and the Krylov solvers used by the
// pressure and concentration systems. Symmetric positive-definite systems
// go through Jacobi-preconditioned CG; nonsymmetric systems through
// BiCGStab preconditioned with (by default) a banded LU factorization under
// a reverse Cuthill-McKee ordering. The assembled matrices live on
// structured grids, so their RCM bandwidth is about twice the short grid
// dimension and the in-band factorization is close to exact, which keeps
// iteration counts low on the strongly coupled pressure system. ILU(0) and
// Jacobi preconditioners remain as cheaper options, and a dense LU path is
// kept for small systems as an independent cross-check. All reductions are
// the deterministic blocked kind, so solves replay bit-identically.

namespace nanoflood {

struct Triplet {
  int row;
  int col;
  double val;
};

class CsrMatrix {
 public:
  CsrMatrix() = default;

  /// Builds a CSR matrix from (row, col, value) triplets. Duplicate
  /// positions are summed; columns within a row come out sorted.
  static CsrMatrix from_triplets(int n, std::span<const Triplet> triplets);

  int rows() const { return n_; }
  int nnz() const { return static_cast<int>(cols_.size()); }

  /// Zeroes the values, keeping the sparsity pattern for refilling.
  void clear_values();

  /// Adds into an existing slot; the position must be in the pattern.
  void add(int row, int col, double v);

  /// Value at (row, col), 0 when the slot is not in the pattern.
  double at(int row, int col) const;

  /// y = A x (exec-mode aware, deterministic).
  void multiply(std::span<const double> x, std::span<double> y) const;

  /// Dense row-major copy, for oracles and small direct solves.
  std::vector<double> dense() const;

  const std::vector<int>& row_ptr() const { return row_ptr_; }
  const std::vector<int>& cols() const { return cols_; }
  const std::vector<double>& vals() const { return vals_; }
  std::vector<double>& vals() { return vals_; }

 private:
  int n_ = 0;
  std::vector<int> row_ptr_{0};
  std::vector<int> cols_;
  std::vector<double> vals_;
};

struct LinearSolveControls {
  // The absolute floor assumes systems equilibrated to an O(1) diagonal;
  // the assembly routines rescale by a power of two to guarantee that.
  double rel_tol = 1e-10;
  double abs_tol = 1e-14;
  int max_iter = 0;  // 0 -> 10 * n

  enum class Method { iterative, dense } method = Method::iterative;
  enum class Precond { jacobi, ilu0, banded_lu } precond = Precond::banded_lu;  // BiCGStab only

  int effective_max_iter(int n) const { return max_iter > 0 ? max_iter : 10 * n; }
};

struct SolveReport {
  int iterations = 0;
  double residual = 0.0;
  bool converged = false;
  std::vector<double> history;  // residual 2-norm per iteration
};

/// Conjugate gradients with Jacobi preconditioning, for SPD systems.
/// `x` carries the initial guess in and the solution out.
/// Throws SolverError when the iteration budget runs out.
SolveReport cg_solve(const CsrMatrix& a, std::span<const double> b,
                     std::span<double> x, const LinearSolveControls& controls);

/// BiCGStab for nonsymmetric systems; preconditioner per `controls.precond`.
SolveReport bicgstab_solve(const CsrMatrix& a, std::span<const double> b,
                           std::span<double> x, const LinearSolveControls& controls);

/// Dense LU with partial pivoting on a row-major matrix (the oracle path).
std::vector<double> dense_solve(std::vector<double> a, std::vector<double> b);
std::vector<double> dense_solve(const CsrMatrix& a, std::span<const double> b);

/// Reverse Cuthill-McKee ordering of the matrix pattern (new -> old index).
/// Deterministic: ties break toward the lower index. Handles disconnected
/// patterns component by component.
std::vector<int> rcm_ordering(const CsrMatrix& a);

/// LU factorization with partial pivoting of a matrix permuted into band
/// form by RCM. Exact within the band, so as a preconditioner it typically
/// brings BiCGStab home in a couple of iterations.
class BandedLu {
 public:
  explicit BandedLu(const CsrMatrix& a);

  /// z = A^-1 r via the permuted band factors.
  void apply(std::span<const double> r, std::span<double> z) const;

  int lower_bandwidth() const { return kl_; }
  int upper_bandwidth() const { return ku_; }

 private:
  int n_ = 0;
  int kl_ = 0;
  int ku_ = 0;
  std::vector<int> perm_;     // new -> old
  std::vector<int> inv_;      // old -> new
  std::vector<int> pivot_;    // row interchanges, LAPACK style
  std::vector<double> band_;  // (2 kl + ku + 1) x n band storage
  mutable std::vector<double> work_;
};

/// Assembled linear system plus the symmetry hint the dispatcher uses.
struct SparseSystem {
  CsrMatrix a;
  std::vector<double> rhs;
  bool symmetric = false;
};

constexpr int kDenseDirectLimit = 400;

/// Scales the matrix and right-hand side by a power of two chosen so the
/// largest diagonal magnitude lands at O(1). The solution is unchanged --
/// both sides scale exactly, power-of-two factors being lossless -- but the
/// absolute tolerance floor in LinearSolveControls becomes meaningful
/// regardless of the physical units the system was assembled in.
/// Returns the factor applied.
double equilibrate_system(SparseSystem& sys);

/// Dispatch: CG for symmetric systems, BiCGStab otherwise; the dense
/// method is accepted only up to kDenseDirectLimit unknowns.
SolveReport solve_system(const SparseSystem& sys, std::span<double> x,
                         const LinearSolveControls& controls);

}  // namespace nanoflood
