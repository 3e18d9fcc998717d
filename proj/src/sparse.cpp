#include "nanoflood/sparse.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <memory>
#include <sstream>

#include "nanoflood/exec.hpp"

namespace nanoflood {

CsrMatrix CsrMatrix::from_triplets(int n, std::span<const Triplet> triplets) {
  std::vector<Triplet> t(triplets.begin(), triplets.end());
  for (const Triplet& e : t) {
    assert(e.row >= 0 && e.row < n && e.col >= 0 && e.col < n);
    (void)e;
  }
  std::sort(t.begin(), t.end(), [](const Triplet& a, const Triplet& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });

  CsrMatrix m;
  m.n_ = n;
  m.row_ptr_.assign(n + 1, 0);
  for (std::size_t k = 0; k < t.size();) {
    std::size_t e = k + 1;
    double v = t[k].val;
    while (e < t.size() && t[e].row == t[k].row && t[e].col == t[k].col) {
      v += t[e].val;
      ++e;
    }
    m.cols_.push_back(t[k].col);
    m.vals_.push_back(v);
    ++m.row_ptr_[t[k].row + 1];
    k = e;
  }
  for (int r = 0; r < n; ++r) m.row_ptr_[r + 1] += m.row_ptr_[r];
  return m;
}

void CsrMatrix::clear_values() { std::fill(vals_.begin(), vals_.end(), 0.0); }

void CsrMatrix::add(int row, int col, double v) {
  const auto begin = cols_.begin() + row_ptr_[row];
  const auto end = cols_.begin() + row_ptr_[row + 1];
  const auto it = std::lower_bound(begin, end, col);
  assert(it != end && *it == col && "slot missing from CSR pattern");
  vals_[static_cast<std::size_t>(it - cols_.begin())] += v;
}

double CsrMatrix::at(int row, int col) const {
  const auto begin = cols_.begin() + row_ptr_[row];
  const auto end = cols_.begin() + row_ptr_[row + 1];
  const auto it = std::lower_bound(begin, end, col);
  if (it == end || *it != col) return 0.0;
  return vals_[static_cast<std::size_t>(it - cols_.begin())];
}

void CsrMatrix::multiply(std::span<const double> x, std::span<double> y) const {
  assert(static_cast<int>(x.size()) == n_ && static_cast<int>(y.size()) == n_);
  par_for(static_cast<std::size_t>(n_), [&](std::size_t r) {
    double s = 0.0;
    for (int k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) s += vals_[k] * x[cols_[k]];
    y[r] = s;
  });
}

std::vector<double> CsrMatrix::dense() const {
  std::vector<double> d(static_cast<std::size_t>(n_) * n_, 0.0);
  for (int r = 0; r < n_; ++r) {
    for (int k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) {
      d[static_cast<std::size_t>(r) * n_ + cols_[k]] = vals_[k];
    }
  }
  return d;
}

namespace {

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  par_for(y.size(), [&](std::size_t i) { y[i] += alpha * x[i]; });
}

// Incomplete LU factorization on the matrix's own pattern. The factored
// values hold L strictly below the diagonal (unit diagonal implied) and U
// on and above it.
struct Ilu0 {
  explicit Ilu0(const CsrMatrix& a);
  void apply(std::span<const double> r, std::span<double> z) const;

  const std::vector<int>& row_ptr;
  const std::vector<int>& cols;
  std::vector<double> vals;
  std::vector<int> diag;
  int n;
};

Ilu0::Ilu0(const CsrMatrix& a)
    : row_ptr(a.row_ptr()), cols(a.cols()), vals(a.vals()), n(a.rows()) {
  diag.assign(n, -1);
  for (int r = 0; r < n; ++r) {
    for (int k = row_ptr[r]; k < row_ptr[r + 1]; ++k) {
      if (cols[k] == r) diag[r] = k;
    }
    if (diag[r] < 0) throw SolverError("ILU(0): missing diagonal entry", {});
  }
  for (int i = 0; i < n; ++i) {
    for (int ki = row_ptr[i]; ki < row_ptr[i + 1] && cols[ki] < i; ++ki) {
      const int k = cols[ki];
      const double piv = vals[diag[k]];
      if (piv == 0.0) throw SolverError("ILU(0): zero pivot", {});
      const double lik = vals[ki] / piv;
      vals[ki] = lik;
      // Row-k entries to the right of k, folded into row i where slots exist.
      for (int kk = diag[k] + 1; kk < row_ptr[k + 1]; ++kk) {
        const int j = cols[kk];
        const auto begin = cols.begin() + row_ptr[i];
        const auto end = cols.begin() + row_ptr[i + 1];
        const auto it = std::lower_bound(begin, end, j);
        if (it != end && *it == j) {
          vals[static_cast<std::size_t>(it - cols.begin())] -= lik * vals[kk];
        }
      }
    }
    if (vals[diag[i]] == 0.0) throw SolverError("ILU(0): zero pivot", {});
  }
}

void Ilu0::apply(std::span<const double> r, std::span<double> z) const {
  for (int i = 0; i < n; ++i) {  // L y = r, unit diagonal
    double s = r[i];
    for (int k = row_ptr[i]; k < row_ptr[i + 1] && cols[k] < i; ++k) s -= vals[k] * z[cols[k]];
    z[i] = s;
  }
  for (int i = n - 1; i >= 0; --i) {  // U x = y
    double s = z[i];
    for (int k = row_ptr[i + 1] - 1; k > diag[i]; --k) s -= vals[k] * z[cols[k]];
    z[i] = s / vals[diag[i]];
  }
}

std::vector<double> jacobi_diagonal(const CsrMatrix& a) {
  std::vector<double> d(a.rows());
  for (int r = 0; r < a.rows(); ++r) {
    const double v = a.at(r, r);
    d[r] = v != 0.0 ? 1.0 / v : 1.0;
  }
  return d;
}

[[noreturn]] void throw_no_convergence(const char* which, int iters, double res,
                                       std::vector<double> history) {
  std::ostringstream os;
  os << which << " failed to converge after " << iters
     << " iterations (residual " << res << ")";
  throw SolverError(os.str(), std::move(history));
}

}  // namespace

SolveReport cg_solve(const CsrMatrix& a, std::span<const double> b,
                     std::span<double> x, const LinearSolveControls& controls) {
  const int n = a.rows();
  const int max_iter = controls.effective_max_iter(n);
  const double tol = std::max(controls.rel_tol * det_norm2(b), controls.abs_tol);
  const auto dinv = jacobi_diagonal(a);

  std::vector<double> r(n), z(n), p(n), q(n);
  a.multiply(x, r);
  par_for(r.size(), [&](std::size_t i) { r[i] = b[i] - r[i]; });

  SolveReport rep;
  rep.residual = det_norm2(r);
  rep.history.push_back(rep.residual);
  if (rep.residual <= tol) {
    rep.converged = true;
    return rep;
  }

  par_for(z.size(), [&](std::size_t i) { z[i] = dinv[i] * r[i]; });
  p = z;
  double rz = det_dot(r, z);
  for (int it = 1; it <= max_iter; ++it) {
    a.multiply(p, q);
    const double pq = det_dot(p, q);
    if (pq == 0.0) throw_no_convergence("CG (breakdown)", it, rep.residual, rep.history);
    const double alpha = rz / pq;
    axpy(alpha, p, x);
    axpy(-alpha, q, r);
    rep.iterations = it;
    rep.residual = det_norm2(r);
    rep.history.push_back(rep.residual);
    if (rep.residual <= tol) {
      // Verify against the true residual; the recursion can drift. On a
      // false positive, restart the recursion from the refreshed residual.
      a.multiply(x, r);
      par_for(r.size(), [&](std::size_t i) { r[i] = b[i] - r[i]; });
      rep.residual = det_norm2(r);
      rep.history.back() = rep.residual;
      if (rep.residual <= tol) {
        rep.converged = true;
        return rep;
      }
      par_for(z.size(), [&](std::size_t i) { z[i] = dinv[i] * r[i]; });
      p = z;
      rz = det_dot(r, z);
      continue;
    }
    par_for(z.size(), [&](std::size_t i) { z[i] = dinv[i] * r[i]; });
    const double rz_new = det_dot(r, z);
    const double beta = rz_new / rz;
    rz = rz_new;
    par_for(p.size(), [&](std::size_t i) { p[i] = z[i] + beta * p[i]; });
  }
  throw_no_convergence("CG", max_iter, rep.residual, rep.history);
}

SolveReport bicgstab_solve(const CsrMatrix& a, std::span<const double> b,
                           std::span<double> x, const LinearSolveControls& controls) {
  const int n = a.rows();
  const int max_iter = controls.effective_max_iter(n);
  const double tol = std::max(controls.rel_tol * det_norm2(b), controls.abs_tol);

  std::vector<double> r(n), rhat(n), p(n, 0.0), v(n, 0.0), phat(n), shat(n), s(n), t(n);
  a.multiply(x, r);
  par_for(r.size(), [&](std::size_t i) { r[i] = b[i] - r[i]; });

  SolveReport rep;
  rep.residual = det_norm2(r);
  rep.history.push_back(rep.residual);
  if (rep.residual <= tol) {
    rep.converged = true;
    return rep;
  }

  std::unique_ptr<BandedLu> band;
  std::unique_ptr<Ilu0> ilu;
  std::vector<double> dinv;
  switch (controls.precond) {
    case LinearSolveControls::Precond::banded_lu:
      band = std::make_unique<BandedLu>(a);
      break;
    case LinearSolveControls::Precond::ilu0:
      ilu = std::make_unique<Ilu0>(a);
      break;
    case LinearSolveControls::Precond::jacobi:
      dinv = jacobi_diagonal(a);
      break;
  }
  auto precondition = [&](std::span<const double> in, std::span<double> out) {
    if (band) {
      band->apply(in, out);
    } else if (ilu) {
      ilu->apply(in, out);
    } else {
      par_for(out.size(), [&](std::size_t i) { out[i] = dinv[i] * in[i]; });
    }
  };

  // The recursion residual drifts away from the true residual on stiff
  // systems, so claimed convergence is always verified against b - A x, and
  // breakdowns or stagnation trigger a restart from the true residual
  // instead of giving up.
  rhat = r;
  double rho = 1.0, alpha = 1.0, omega = 1.0;
  constexpr int kStagnationWindow = 200;  // iterations without a 2% best-residual improvement
  bool fresh = true;  // p is rebuilt from r on the first iteration after a (re)start
  double best = rep.residual;
  int since_best = 0;

  // Refreshes r to the true residual. Returns true when fully converged
  // (rep is then complete); otherwise restarts the recursion from r.
  auto refresh = [&](int it) {
    a.multiply(x, r);
    par_for(r.size(), [&](std::size_t i) { r[i] = b[i] - r[i]; });
    const double tr = det_norm2(r);
    rep.iterations = it;
    rep.residual = tr;
    rep.history.push_back(tr);
    if (tr <= tol) {
      rep.converged = true;
      return true;
    }
    rhat = r;
    rho = alpha = omega = 1.0;
    fresh = true;
    best = std::min(best, tr);
    since_best = 0;
    return false;
  };

  for (int it = 1; it <= max_iter; ++it) {
    const double rho1 = det_dot(rhat, r);
    if (rho1 == 0.0 || omega == 0.0) {
      if (refresh(it)) return rep;
      continue;
    }
    if (fresh) {
      p = r;
      fresh = false;
    } else {
      const double beta = (rho1 / rho) * (alpha / omega);
      par_for(p.size(), [&](std::size_t i) { p[i] = r[i] + beta * (p[i] - omega * v[i]); });
    }
    rho = rho1;
    precondition(p, phat);
    a.multiply(phat, v);
    const double rv = det_dot(rhat, v);
    if (rv == 0.0) {
      if (refresh(it)) return rep;
      continue;
    }
    alpha = rho1 / rv;
    par_for(s.size(), [&](std::size_t i) { s[i] = r[i] - alpha * v[i]; });
    const double snorm = det_norm2(s);
    if (snorm <= tol) {
      axpy(alpha, phat, x);
      if (refresh(it)) return rep;
      continue;
    }
    precondition(s, shat);
    a.multiply(shat, t);
    const double tt = det_dot(t, t);
    if (tt == 0.0) {
      axpy(alpha, phat, x);
      if (refresh(it)) return rep;
      continue;
    }
    omega = det_dot(t, s) / tt;
    par_for(x.size(), [&](std::size_t i) { x[i] += alpha * phat[i] + omega * shat[i]; });
    par_for(r.size(), [&](std::size_t i) { r[i] = s[i] - omega * t[i]; });
    rep.iterations = it;
    rep.residual = det_norm2(r);
    rep.history.push_back(rep.residual);
    if (rep.residual <= tol) {
      if (refresh(it)) return rep;
      continue;
    }
    if (rep.residual < 0.98 * best) {
      best = rep.residual;
      since_best = 0;
    } else if (++since_best >= kStagnationWindow) {
      if (refresh(it)) return rep;
    }
  }
  a.multiply(x, t);
  par_for(t.size(), [&](std::size_t i) { t[i] = b[i] - t[i]; });
  throw_no_convergence("BiCGStab", max_iter, det_norm2(t), rep.history);
}

std::vector<double> dense_solve(std::vector<double> a, std::vector<double> b) {
  const int n = static_cast<int>(b.size());
  assert(a.size() == static_cast<std::size_t>(n) * n);
  for (int k = 0; k < n; ++k) {
    int piv = k;
    double best = std::abs(a[static_cast<std::size_t>(k) * n + k]);
    for (int r = k + 1; r < n; ++r) {
      const double v = std::abs(a[static_cast<std::size_t>(r) * n + k]);
      if (v > best) {
        best = v;
        piv = r;
      }
    }
    if (best == 0.0) throw SolverError("dense solve: singular matrix", {});
    if (piv != k) {
      for (int c = 0; c < n; ++c) {
        std::swap(a[static_cast<std::size_t>(k) * n + c], a[static_cast<std::size_t>(piv) * n + c]);
      }
      std::swap(b[k], b[piv]);
    }
    const double inv = 1.0 / a[static_cast<std::size_t>(k) * n + k];
    for (int r = k + 1; r < n; ++r) {
      const double f = a[static_cast<std::size_t>(r) * n + k] * inv;
      if (f == 0.0) continue;
      a[static_cast<std::size_t>(r) * n + k] = 0.0;
      for (int c = k + 1; c < n; ++c) {
        a[static_cast<std::size_t>(r) * n + c] -= f * a[static_cast<std::size_t>(k) * n + c];
      }
      b[r] -= f * b[k];
    }
  }
  for (int r = n - 1; r >= 0; --r) {
    double s = b[r];
    for (int c = r + 1; c < n; ++c) s -= a[static_cast<std::size_t>(r) * n + c] * b[c];
    b[r] = s / a[static_cast<std::size_t>(r) * n + r];
  }
  return b;
}

std::vector<double> dense_solve(const CsrMatrix& a, std::span<const double> b) {
  return dense_solve(a.dense(), std::vector<double>(b.begin(), b.end()));
}

std::vector<int> rcm_ordering(const CsrMatrix& a) {
  const int n = a.rows();
  const auto& rp = a.row_ptr();
  const auto& cols = a.cols();
  const auto degree = [&](int v) { return rp[v + 1] - rp[v]; };
  const auto lighter = [&](int x, int y) {
    const int dx = degree(x), dy = degree(y);
    return dx != dy ? dx < dy : x < y;
  };

  std::vector<int> stamp(n, -1);
  std::vector<int> component;  // Cuthill-McKee order of the current component
  std::vector<int> nbrs;
  int pass = 0;

  // Breadth-first sweep from `root`, neighbors visited lightest-degree
  // first. Returns {level count, index where the last level starts}.
  auto bfs = [&](int root) -> std::pair<int, std::size_t> {
    ++pass;
    component.clear();
    component.push_back(root);
    stamp[root] = pass;
    int levels = 0;
    std::size_t begin = 0, last_begin = 0;
    while (begin < component.size()) {
      const std::size_t end = component.size();
      ++levels;
      last_begin = begin;
      for (std::size_t q = begin; q < end; ++q) {
        const int v = component[q];
        nbrs.clear();
        for (int k = rp[v]; k < rp[v + 1]; ++k) {
          const int w = cols[k];
          if (w != v && stamp[w] != pass) {
            stamp[w] = pass;
            nbrs.push_back(w);
          }
        }
        std::sort(nbrs.begin(), nbrs.end(), lighter);
        component.insert(component.end(), nbrs.begin(), nbrs.end());
      }
      begin = end;
    }
    return {levels, last_begin};
  };

  std::vector<char> placed(n, 0);
  std::vector<int> order;
  order.reserve(n);
  for (int s = 0; s < n; ++s) {
    if (placed[s]) continue;
    // Walk toward a pseudo-peripheral root: restart from the lightest node
    // of the deepest level while that keeps increasing the eccentricity.
    int root = s;
    auto [levels, last_begin] = bfs(root);
    for (;;) {
      int cand = component[last_begin];
      for (std::size_t q = last_begin + 1; q < component.size(); ++q) {
        if (lighter(component[q], cand)) cand = component[q];
      }
      if (cand == root) break;
      const auto [cand_levels, cand_last] = bfs(cand);
      if (cand_levels <= levels) {
        bfs(root);  // restore the ordering rooted at the better node
        break;
      }
      root = cand;
      levels = cand_levels;
      last_begin = cand_last;
    }
    for (int v : component) {
      placed[v] = 1;
      order.push_back(v);
    }
  }
  std::reverse(order.begin(), order.end());
  return order;
}

BandedLu::BandedLu(const CsrMatrix& a) : n_(a.rows()), perm_(rcm_ordering(a)) {
  inv_.assign(n_, 0);
  for (int p = 0; p < n_; ++p) inv_[perm_[p]] = p;

  const auto& rp = a.row_ptr();
  const auto& cols = a.cols();
  const auto& vals = a.vals();
  for (int i = 0; i < n_; ++i) {
    for (int k = rp[i]; k < rp[i + 1]; ++k) {
      const int p = inv_[i], q = inv_[cols[k]];
      kl_ = std::max(kl_, p - q);
      ku_ = std::max(ku_, q - p);
    }
  }

  // LAPACK-style band storage, column-major: entry (i, j) of the permuted
  // matrix lives at band_[j * stride + kl_ + ku_ + i - j]. The top kl_ rows
  // hold fill produced by row interchanges.
  const int stride = 2 * kl_ + ku_ + 1;
  band_.assign(static_cast<std::size_t>(stride) * n_, 0.0);
  const auto e = [&](int i, int j) -> double& {
    return band_[static_cast<std::size_t>(j) * stride + kl_ + ku_ + i - j];
  };
  for (int i = 0; i < n_; ++i) {
    for (int k = rp[i]; k < rp[i + 1]; ++k) e(inv_[i], inv_[cols[k]]) += vals[k];
  }

  pivot_.assign(n_, 0);
  for (int k = 0; k < n_; ++k) {
    const int imax = std::min(n_ - 1, k + kl_);
    const int jmax = std::min(n_ - 1, k + kl_ + ku_);
    int piv = k;
    double best = std::abs(e(k, k));
    for (int i = k + 1; i <= imax; ++i) {
      const double v = std::abs(e(i, k));
      if (v > best) {
        best = v;
        piv = i;
      }
    }
    if (e(piv, k) == 0.0) throw SolverError("banded LU: singular matrix", {});
    pivot_[k] = piv;
    if (piv != k) {
      for (int j = k; j <= jmax; ++j) std::swap(e(k, j), e(piv, j));
    }
    const double dk = e(k, k);
    for (int i = k + 1; i <= imax; ++i) e(i, k) /= dk;
    for (int j = k + 1; j <= jmax; ++j) {
      const double akj = e(k, j);
      if (akj == 0.0) continue;
      for (int i = k + 1; i <= imax; ++i) e(i, j) -= e(i, k) * akj;
    }
  }
  work_.resize(n_);
}

void BandedLu::apply(std::span<const double> r, std::span<double> z) const {
  const int stride = 2 * kl_ + ku_ + 1;
  const auto e = [&](int i, int j) -> double {
    return band_[static_cast<std::size_t>(j) * stride + kl_ + ku_ + i - j];
  };
  for (int p = 0; p < n_; ++p) work_[p] = r[perm_[p]];
  for (int k = 0; k < n_; ++k) {
    if (pivot_[k] != k) std::swap(work_[k], work_[pivot_[k]]);
    const int imax = std::min(n_ - 1, k + kl_);
    for (int i = k + 1; i <= imax; ++i) work_[i] -= e(i, k) * work_[k];
  }
  for (int k = n_ - 1; k >= 0; --k) {
    const int jmax = std::min(n_ - 1, k + kl_ + ku_);
    double s = work_[k];
    for (int j = k + 1; j <= jmax; ++j) s -= e(k, j) * work_[j];
    work_[k] = s / e(k, k);
  }
  for (int p = 0; p < n_; ++p) z[perm_[p]] = work_[p];
}

double equilibrate_system(SparseSystem& sys) {
  double m = 0.0;
  for (int r = 0; r < sys.a.rows(); ++r) m = std::max(m, std::abs(sys.a.at(r, r)));
  if (!(m > 0.0) || !std::isfinite(m)) return 1.0;
  const double sigma = std::exp2(-std::rint(std::log2(m)));
  if (sigma == 1.0) return 1.0;
  for (double& v : sys.a.vals()) v *= sigma;
  for (double& v : sys.rhs) v *= sigma;
  return sigma;
}

SolveReport solve_system(const SparseSystem& sys, std::span<double> x,
                         const LinearSolveControls& controls) {
  if (controls.method == LinearSolveControls::Method::dense) {
    if (sys.a.rows() > kDenseDirectLimit) {
      throw ConfigError("dense direct solve is limited to " +
                        std::to_string(kDenseDirectLimit) + " unknowns");
    }
    const auto sol = dense_solve(sys.a, sys.rhs);
    std::copy(sol.begin(), sol.end(), x.begin());
    SolveReport rep;
    rep.converged = true;
    std::vector<double> ax(sol.size());
    sys.a.multiply(sol, ax);
    par_for(ax.size(), [&](std::size_t i) { ax[i] -= sys.rhs[i]; });
    rep.residual = det_norm2(ax);
    return rep;
  }
  if (sys.symmetric) return cg_solve(sys.a, sys.rhs, x, controls);
  return bicgstab_solve(sys.a, sys.rhs, x, controls);
}

}  // namespace nanoflood
