#include "nanoflood/flow.hpp"

#include <algorithm>
#include <atomic>
#include <cassert>
#include <cmath>

#include "nanoflood/exec.hpp"

namespace nanoflood {

double face_transmissibility(const StructuredGrid2D& grid, std::span<const double> k,
                             int face) {
  const Face& f = grid.face(face);
  if (!f.interior()) {
    const double ko = k[f.owner];
    return ko == 0.0 ? 0.0 : f.area * ko / f.dist;
  }
  const double ko = k[f.owner], kn = k[f.neighbor];
  if (ko == 0.0 || kn == 0.0) return 0.0;
  const double half = 0.5 * f.dist;
  return f.area / (half / ko + half / kn);
}

double compute_relaxation_factor(double delta_prev, double delta_curr,
                                 const IterationControls& controls) {
  const double theta = controls.rho * delta_prev / std::max(delta_curr, 1e-30);
  return std::clamp(theta, controls.theta_min, controls.theta_max);
}

FlowSolver::FlowSolver(const StructuredGrid2D& grid, const RockFluidParams& rock,
                       GravityModel gravity)
    : grid_(grid), rock_(rock), gravity_(gravity) {
  const int n = grid_.num_cells();
  const int nf = grid_.num_faces();
  lam_w_.resize(n);
  lam_n_.resize(n);
  lam_t_.resize(n);
  f_w_.resize(n);
  cap_pot_.resize(n);
  cap_dsw_.resize(n);
  a_lin_.resize(n);
  beta_.resize(n);
  w_affine_.resize(n);
  face_trans_.resize(nf);
  face_lw_.resize(nf);
  face_ln_.resize(nf);
  face_lt_.resize(nf);

  grav_cell_.resize(n);
  const double drho = rock_.rho_n - rock_.rho_w;
  for (int c = 0; c < n; ++c) {
    grav_cell_[c] = -drho * gravity_.dot(grid_.cell_x(c), grid_.cell_y(c));
  }
  dirichlet_pot_.assign(nf, 0.0);
  for (int fid : grid_.boundary_faces()) {
    const BoundarySegment& seg = grid_.face_segment(grid_.face(fid));
    if (seg.kind != BcKind::dirichlet_pressure) continue;
    double fx, fy;
    grid_.face_center(fid, fx, fy);
    dirichlet_pot_[fid] = seg.pressure - rock_.rho_w * gravity_.dot(fx, fy);
  }
}

void FlowSolver::compute_cell_coefficients(const FlowFields& fields) {
  mobilities_field(fields.s_iter, rock_, lam_w_, lam_n_, lam_t_, f_w_);
  capillary_field(fields.s_iter, rock_, cap_pot_, cap_dsw_);
  par_for(cap_pot_.size(), [&](std::size_t c) { cap_pot_[c] += grav_cell_[c]; });
}

void FlowSolver::compute_face_coefficients(const FlowFields& fields) {
  par_for(static_cast<std::size_t>(grid_.num_faces()), [&](std::size_t fid) {
    const Face& f = grid_.face(static_cast<int>(fid));
    face_trans_[fid] = face_transmissibility(grid_, fields.perm, static_cast<int>(fid));
    if (f.interior()) {
      // Each phase mobility is donated by the cell upstream of that phase's
      // own potential difference at the previous iterate. The water donor
      // switches sides only where the water flux itself crosses zero, so the
      // committed flux stays continuous across donor flips.
      const double dphi_w = fields.potential_prev[f.owner] - fields.potential_prev[f.neighbor];
      face_lw_[fid] = upwind_face_mobility(dphi_w, lam_w_[f.owner], lam_w_[f.neighbor]);
      const double dcap = cap_pot_[f.owner] - cap_pot_[f.neighbor];
      face_ln_[fid] = upwind_face_mobility(dphi_w + dcap, lam_n_[f.owner], lam_n_[f.neighbor]);
      face_lt_[fid] = face_lw_[fid] + face_ln_[fid];
    } else {
      face_lw_[fid] = lam_w_[f.owner];
      face_ln_[fid] = lam_n_[f.owner];
      face_lt_[fid] = face_lw_[fid] + face_ln_[fid];
    }
  });
}

double FlowSolver::carried_saturation(const FlowFields& fields, std::size_t c) {
  // Start-of-step water volume expressed at the iterate's porosity, so the
  // update conserves phi*S exactly through deposition-driven pore shrinkage.
  // The no-damage path stays bitwise identical to plain S^n.
  if (fields.porosity_prev.empty()) return fields.s_prev[c];
  const double phi_n = fields.porosity_prev[c];
  const double phi_k = fields.porosity[c];
  return phi_n == phi_k ? fields.s_prev[c] : (phi_n / phi_k) * fields.s_prev[c];
}

double FlowSolver::boundary_water_flux(const Face& face, int bface_id,
                                       double fw_owner) const {
  // Outward-oriented water flux through a Neumann face.
  const BoundarySegment& seg = grid_.segments()[face.segment];
  const double q = seg.inflow_velocity;
  const double fw = q >= 0.0 ? mobilities(seg.inflow_saturation, rock_).f_w : fw_owner;
  (void)bface_id;
  return -fw * q * face.area;
}

void FlowSolver::fill_water_matrix(const FlowFields& fields, std::vector<Triplet>* pattern) {
  (void)fields;
  const bool fill = pattern == nullptr;
  auto put = [&](int r, int c, double v) {
    if (fill) {
      m_w_.add(r, c, v);
    } else {
      pattern->push_back({r, c, 0.0});
    }
  };
  if (fill) {
    m_w_.clear_values();
    std::fill(w_affine_.begin(), w_affine_.end(), 0.0);
  }
  for (int fid = 0; fid < grid_.num_faces(); ++fid) {
    const Face& f = grid_.face(fid);
    if (f.interior()) {
      // Water moves with the water-potential gradient only: the capillary
      // potential lives in the non-wetting phase, so the water flux carries
      // no explicit capillary term. Capillary effects reach the water update
      // through the solved potential itself.
      const double cw = face_trans_[fid] * face_lw_[fid];
      put(f.owner, f.owner, cw);
      put(f.owner, f.neighbor, -cw);
      put(f.neighbor, f.neighbor, cw);
      put(f.neighbor, f.owner, -cw);
      continue;
    }
    const BoundarySegment& seg = grid_.face_segment(f);
    if (seg.kind == BcKind::dirichlet_pressure) {
      const double cw = face_trans_[fid] * face_lw_[fid];
      put(f.owner, f.owner, cw);
      if (fill) w_affine_[f.owner] -= cw * dirichlet_pot_[fid];
    } else if (seg.kind == BcKind::neumann_flux && fill) {
      w_affine_[f.owner] += boundary_water_flux(f, fid, f_w_[f.owner]);
    }
  }
}

void FlowSolver::fill_pressure_matrix(const FlowFields& fields, CapillaryMode mode,
                                      SparseSystem& sys, std::vector<Triplet>* pattern) {
  const int n = grid_.num_cells();
  const bool fill = pattern == nullptr;
  const bool coupled = mode == CapillaryMode::linearized_coupled;
  auto put = [&](int r, int c, double v) {
    if (fill) {
      sys.a.add(r, c, v);
    } else {
      pattern->push_back({r, c, 0.0});
    }
  };
  if (fill) {
    sys.a.clear_values();
    sys.rhs.assign(n, 0.0);
    if (!fields.q_total.empty()) {
      for (int c = 0; c < n; ++c) sys.rhs[c] = fields.q_total[c];
    }
  }

  for (int fid = 0; fid < grid_.num_faces(); ++fid) {
    const Face& f = grid_.face(fid);
    if (f.interior()) {
      const double ct = face_trans_[fid] * face_lt_[fid];
      put(f.owner, f.owner, ct);
      put(f.owner, f.neighbor, -ct);
      put(f.neighbor, f.neighbor, ct);
      put(f.neighbor, f.owner, -ct);
      if (fill) {
        const double cn = face_trans_[fid] * face_ln_[fid];
        const double dcap = coupled ? a_lin_[f.owner] - a_lin_[f.neighbor]
                                    : cap_pot_[f.owner] - cap_pot_[f.neighbor];
        const double val = cn * dcap;
        sys.rhs[f.owner] -= val;
        sys.rhs[f.neighbor] += val;
      }
      continue;
    }
    const BoundarySegment& seg = grid_.face_segment(f);
    if (seg.kind == BcKind::dirichlet_pressure) {
      const double ct = face_trans_[fid] * face_lt_[fid];
      put(f.owner, f.owner, ct);
      if (fill) sys.rhs[f.owner] += ct * dirichlet_pot_[fid];
    } else if (seg.kind == BcKind::neumann_flux && fill) {
      sys.rhs[f.owner] += seg.inflow_velocity * f.area;
    }
  }

  if (coupled) {
    // Capillary coupling block: the linearized capillary flux carries the
    // provisional-saturation response, i.e. the water-divergence rows
    // scaled by beta, expanding the stencil to neighbors-of-neighbors.
    const auto& wp = m_w_.row_ptr();
    const auto& wc = m_w_.cols();
    const auto& wv = m_w_.vals();
    for (int fid : grid_.interior_faces()) {
      const Face& f = grid_.face(fid);
      const double cn = face_trans_[fid] * face_ln_[fid];
      const int cells[2] = {f.owner, f.neighbor};
      const double signs[2] = {1.0, -1.0};
      for (int s = 0; s < 2; ++s) {
        const int side = cells[s];
        const double coef = cn * beta_[side] * signs[s];
        for (int k = wp[side]; k < wp[side + 1]; ++k) {
          const double w = fill ? coef * wv[k] : 0.0;
          put(f.owner, wc[k], w);
          put(f.neighbor, wc[k], -w);
        }
      }
    }
  }
}

SparseSystem& FlowSolver::assemble_pressure(const FlowFields& fields, CapillaryMode mode) {
  assert(fields.dt > 0.0);
  compute_cell_coefficients(fields);
  compute_face_coefficients(fields);

  const bool coupled = mode == CapillaryMode::linearized_coupled;
  const int n = grid_.num_cells();
  if (coupled) {
    if (!m_w_patterned_) {
      std::vector<Triplet> t;
      fill_water_matrix(fields, &t);
      m_w_ = CsrMatrix::from_triplets(n, t);
      m_w_patterned_ = true;
    }
    fill_water_matrix(fields, nullptr);
    const double vol = grid_.cell_volume();
    par_for(static_cast<std::size_t>(n), [&](std::size_t c) {
      const double qw = fields.q_water.empty() ? 0.0 : fields.q_water[c];
      const double scale = fields.dt / (fields.porosity[c] * vol);
      a_lin_[c] = cap_pot_[c] + cap_dsw_[c] * (carried_saturation(fields, c) -
                                               fields.s_iter[c] +
                                               scale * (qw - w_affine_[c]));
      beta_[c] = -cap_dsw_[c] * scale;
    });
  }

  SparseSystem& sys = coupled ? sys_coupled_ : sys_lagged_;
  bool& patterned = coupled ? coupled_patterned_ : lagged_patterned_;
  if (!patterned) {
    std::vector<Triplet> t;
    fill_pressure_matrix(fields, mode, sys, &t);
    sys.a = CsrMatrix::from_triplets(n, t);
    patterned = true;
  }
  fill_pressure_matrix(fields, mode, sys, nullptr);
  sys.symmetric = !coupled || rock_.b_c == 0.0;
  equilibrate_system(sys);
  return sys;
}

void FlowSolver::eliminated_saturation(const FlowFields& fields,
                                       std::span<const double> potential,
                                       std::vector<double>& s_elim) const {
  const int n = grid_.num_cells();
  const double vol = grid_.cell_volume();
  const auto& wp = m_w_.row_ptr();
  const auto& wc = m_w_.cols();
  const auto& wv = m_w_.vals();
  s_elim.resize(n);
  par_for(static_cast<std::size_t>(n), [&](std::size_t c) {
    double div_w = w_affine_[c];
    for (int k = wp[c]; k < wp[c + 1]; ++k) div_w += wv[k] * potential[wc[k]];
    const double qw = fields.q_water.empty() ? 0.0 : fields.q_water[c];
    const double scale = fields.dt / (fields.porosity[c] * vol);
    s_elim[c] = carried_saturation(fields, c) + scale * (qw - div_w);
  });
}

void FlowSolver::water_fluxes(std::span<const double> potential,
                              std::vector<double>& flux_w) const {
  flux_w.resize(grid_.num_faces());
  par_for(flux_w.size(), [&](std::size_t fid) {
    const Face& f = grid_.face(static_cast<int>(fid));
    if (f.interior()) {
      // The committed flux re-donates by the sign of its own driving potential
      // difference: a face whose flow reversed since the linearization froze
      // its donor must not drain a near-dry cell with the wetter neighbor's
      // mobility. At the donor flip the flux is zero, so the committed flux
      // stays continuous and the donor-consistent update is monotone.
      const double dphi = potential[f.owner] - potential[f.neighbor];
      const double lw = upwind_face_mobility(dphi, lam_w_[f.owner], lam_w_[f.neighbor]);
      flux_w[fid] = face_trans_[fid] * lw * dphi;
      return;
    }
    const BoundarySegment& seg = grid_.face_segment(f);
    if (seg.kind == BcKind::neumann_flux) {
      flux_w[fid] = boundary_water_flux(f, static_cast<int>(fid), f_w_[f.owner]);
      return;
    }
    if (seg.kind == BcKind::dirichlet_pressure) {
      flux_w[fid] =
          face_trans_[fid] * face_lw_[fid] * (potential[f.owner] - dirichlet_pot_[fid]);
      return;
    }
    flux_w[fid] = 0.0;
  });
}

FlowSolver::SaturationUpdate FlowSolver::explicit_saturation_update(
    const FlowFields& fields, const std::vector<double>& flux_w) const {
  const int n = grid_.num_cells();
  const double vol = grid_.cell_volume();
  SaturationUpdate u;
  u.raw.resize(n);
  u.clamped.resize(n);
  std::vector<double> clamp_vol(n, 0.0);
  std::atomic<std::int64_t> clamps{0};
  const double s_hi = 1.0 - rock_.s_nr;
  par_for(static_cast<std::size_t>(n), [&](std::size_t c) {
    double outflow = 0.0;
    for (int fid : grid_.cell_faces(static_cast<int>(c))) {
      const Face& f = grid_.face(fid);
      outflow += (f.owner == static_cast<int>(c) ? 1.0 : -1.0) * flux_w[fid];
    }
    const double qw = fields.q_water.empty() ? 0.0 : fields.q_water[c];
    const double s =
        carried_saturation(fields, c) + fields.dt / (fields.porosity[c] * vol) * (qw - outflow);
    u.raw[c] = s;
    const double sc = std::clamp(s, rock_.s_wr, s_hi);
    u.clamped[c] = sc;
    if (sc != s) {
      clamps.fetch_add(1, std::memory_order_relaxed);
      clamp_vol[c] = fields.porosity[c] * (sc - s) * vol;
    }
  });
  u.clamps = clamps.load();
  u.clamp_volume = det_sum(clamp_vol);
  return u;
}

void FlowSolver::total_fluxes(const FlowFields& fields, std::span<const double> potential,
                              std::span<const double> s_tilde_raw, CapillaryMode mode,
                              std::vector<double>& flux_t) const {
  const int n = grid_.num_cells();
  const bool coupled = mode == CapillaryMode::linearized_coupled;
  assert(!coupled || static_cast<int>(s_tilde_raw.size()) == n);
  std::vector<double> cap_lin(n);
  par_for(static_cast<std::size_t>(n), [&](std::size_t c) {
    cap_lin[c] = coupled ? cap_pot_[c] + cap_dsw_[c] * (s_tilde_raw[c] - fields.s_iter[c])
                         : cap_pot_[c];
  });
  flux_t.resize(grid_.num_faces());
  par_for(flux_t.size(), [&](std::size_t fid) {
    const Face& f = grid_.face(static_cast<int>(fid));
    if (f.interior()) {
      flux_t[fid] = face_trans_[fid] * face_lt_[fid] *
                        (potential[f.owner] - potential[f.neighbor]) +
                    face_trans_[fid] * face_ln_[fid] * (cap_lin[f.owner] - cap_lin[f.neighbor]);
      return;
    }
    const BoundarySegment& seg = grid_.face_segment(f);
    switch (seg.kind) {
      case BcKind::dirichlet_pressure:
        flux_t[fid] = face_trans_[fid] * face_lt_[fid] *
                      (potential[f.owner] - dirichlet_pot_[fid]);
        break;
      case BcKind::neumann_flux:
        flux_t[fid] = -seg.inflow_velocity * f.area;
        break;
      case BcKind::no_flow:
        flux_t[fid] = 0.0;
        break;
    }
  });
}

void FlowSolver::cell_velocities(const std::vector<double>& flux_w, std::span<double> ux,
                                 std::span<double> uy, std::span<double> umag) const {
  par_for(static_cast<std::size_t>(grid_.num_cells()), [&](std::size_t c) {
    const auto& cf = grid_.cell_faces(static_cast<int>(c));
    auto directed = [&](int fid) {
      return static_cast<double>(grid_.face(fid).axis_sign) * flux_w[fid] /
             grid_.face(fid).area;
    };
    ux[c] = 0.5 * (directed(cf[0]) + directed(cf[1]));
    uy[c] = 0.5 * (directed(cf[2]) + directed(cf[3]));
    umag[c] = std::sqrt(ux[c] * ux[c] + uy[c] * uy[c]);
  });
}

}  // namespace nanoflood
