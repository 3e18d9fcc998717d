#include "nanoflood/transport.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "nanoflood/exec.hpp"

namespace nanoflood {

namespace {
constexpr double kBoltzmann = 1.380649e-23;  // [J/K]
}

void NanoparticleParams::validate() const {
  std::string err;
  auto require = [&](bool ok, const char* msg) {
    if (!ok) {
      if (!err.empty()) err += "; ";
      err += msg;
    }
  };
  require(gamma_d >= 0.0, "gamma_d must be >= 0");
  require(gamma_pt >= 0.0, "gamma_pt must be >= 0");
  require(gamma_e >= 0.0, "gamma_e must be >= 0");
  require(u_crit >= 0.0, "u_crit must be >= 0");
  require(diffusivity >= 0.0, "diffusivity must be >= 0");
  if (!err.empty()) throw ConfigError("invalid nanoparticle parameters: " + err);
}

double stokes_einstein_diffusivity(double particle_diameter, double temperature,
                                   double fluid_viscosity) {
  if (particle_diameter <= 0.0 || temperature <= 0.0 || fluid_viscosity <= 0.0) {
    throw ConfigError("stokes_einstein_diffusivity requires positive diameter, "
                      "temperature, and viscosity");
  }
  const double pi = std::acos(-1.0);
  return kBoltzmann * temperature / (3.0 * pi * fluid_viscosity * particle_diameter);
}

double net_loss_rate(double u_mag, double c, double v1, const NanoparticleParams& np) {
  const double release = np.gamma_e * std::max(u_mag - np.u_crit, 0.0);
  return (np.gamma_d + np.gamma_pt) * u_mag * c - release * v1;
}

double update_v1(double v1_old, double u_mag, double c_new, double dt,
                 const NanoparticleParams& np) {
  const double release = np.gamma_e * std::max(u_mag - np.u_crit, 0.0);
  return (v1_old + dt * np.gamma_d * u_mag * c_new) / (1.0 + dt * release);
}

double update_v2(double v2_old, double u_mag, double c_new, double dt,
                 const NanoparticleParams& np) {
  return v2_old + dt * np.gamma_pt * u_mag * c_new;
}

void retention_update_field(std::span<const double> v1_old, std::span<const double> v2_old,
                            std::span<const double> u_mag, std::span<const double> c_new,
                            double dt, const NanoparticleParams& np, std::span<double> v1_new,
                            std::span<double> v2_new) {
  par_for(v1_old.size(), [&](std::size_t c) {
    v1_new[c] = update_v1(v1_old[c], u_mag[c], c_new[c], dt, np);
    v2_new[c] = update_v2(v2_old[c], u_mag[c], c_new[c], dt, np);
  });
}

TransportSolver::TransportSolver(const StructuredGrid2D& grid, const RockFluidParams& rock,
                                 const NanoparticleParams& np)
    : grid_(grid), rock_(rock), np_(np) {
  np_.validate();
  sink_alpha_.resize(grid_.num_cells());
  sink_offset_.resize(grid_.num_cells());
}

void TransportSolver::fill(const TransportFields& fields, std::vector<Triplet>* pattern) {
  const int n = grid_.num_cells();
  const double vol = grid_.cell_volume();
  const bool fillpass = pattern == nullptr;
  auto put = [&](int r, int c, double v) {
    if (fillpass) {
      sys_.a.add(r, c, v);
    } else {
      pattern->push_back({r, c, 0.0});
    }
  };

  if (fillpass) {
    sys_.a.clear_values();
    sys_.rhs.assign(n, 0.0);
  }

  // Accumulation and retention sink.
  for (int c = 0; c < n; ++c) {
    if (!fillpass) {
      put(c, c, 0.0);
      continue;
    }
    const double acc = fields.phi[c] * fields.s_tilde[c] * vol / fields.dt;
    double alpha = 0.0, offset = 0.0;
    if (np_.coupling == RetentionCoupling::lagged_explicit) {
      offset = net_loss_rate(fields.u_mag[c], fields.c_iter[c], fields.v1_iter[c], np_);
    } else {
      const double release = np_.gamma_e * std::max(fields.u_mag[c] - np_.u_crit, 0.0);
      const double gain = 1.0 / (1.0 + fields.dt * release);
      alpha = fields.u_mag[c] * (np_.gamma_d * gain + np_.gamma_pt);
      offset = -release * gain * fields.v1_old[c];
    }
    sink_alpha_[c] = alpha;
    sink_offset_[c] = offset;
    put(c, c, acc + alpha * vol);
    sys_.rhs[c] += fields.phi_old[c] * fields.s_old[c] * fields.c_old[c] * vol / fields.dt -
                   offset * vol;
    if (!fields.q_water.empty()) {
      const double q = fields.q_water[c];
      if (q > 0.0) {
        sys_.rhs[c] += q * (fields.q_conc.empty() ? 0.0 : fields.q_conc[c]);
      } else if (q < 0.0) {
        sys_.a.add(c, c, -q);
      }
    }
  }

  // Donor-cell advection on the water fluxes.
  for (int fid = 0; fid < grid_.num_faces(); ++fid) {
    const Face& f = grid_.face(fid);
    if (f.interior()) {
      if (!fillpass) {
        put(f.owner, f.owner, 0.0);
        put(f.owner, f.neighbor, 0.0);
        put(f.neighbor, f.owner, 0.0);
        put(f.neighbor, f.neighbor, 0.0);
        continue;
      }
      const double fw = fields.flux_w[fid];
      const int donor = fw >= 0.0 ? f.owner : f.neighbor;
      sys_.a.add(f.owner, donor, fw);
      sys_.a.add(f.neighbor, donor, -fw);
      continue;
    }
    if (!fillpass) continue;
    const double fw = fields.flux_w[fid];
    if (fw >= 0.0) {
      sys_.a.add(f.owner, f.owner, fw);
    } else {
      sys_.rhs[f.owner] -= fw * grid_.face_segment(f).inflow_concentration;
    }
  }

  // Diffusion through the water-filled pore space, interior faces only.
  if (np_.diffusivity > 0.0) {
    for (int fid : grid_.interior_faces()) {
      const Face& f = grid_.face(fid);
      if (!fillpass) {
        put(f.owner, f.owner, 0.0);
        put(f.owner, f.neighbor, 0.0);
        put(f.neighbor, f.owner, 0.0);
        put(f.neighbor, f.neighbor, 0.0);
        continue;
      }
      const double ko = fields.phi[f.owner] * fields.s_tilde[f.owner] * np_.diffusivity;
      const double kn = fields.phi[f.neighbor] * fields.s_tilde[f.neighbor] * np_.diffusivity;
      if (ko <= 0.0 || kn <= 0.0) continue;
      const double half = 0.5 * f.dist;
      const double td = f.area / (half / ko + half / kn);
      sys_.a.add(f.owner, f.owner, td);
      sys_.a.add(f.owner, f.neighbor, -td);
      sys_.a.add(f.neighbor, f.neighbor, td);
      sys_.a.add(f.neighbor, f.owner, -td);
    }
  }
}

SparseSystem& TransportSolver::assemble(const TransportFields& fields) {
  if (fields.dt <= 0.0) throw ConfigError("transport assembly requires dt > 0");
  if (!patterned_) {
    std::vector<Triplet> t;
    fill(fields, &t);
    sys_.a = CsrMatrix::from_triplets(grid_.num_cells(), t);
    patterned_ = true;
  }
  fill(fields, nullptr);
  sys_.symmetric = false;
  equilibrate_system(sys_);
  return sys_;
}

void TransportSolver::applied_sink(std::span<const double> c_new,
                                   std::vector<double>& r) const {
  r.resize(c_new.size());
  par_for(c_new.size(), [&](std::size_t c) {
    r[c] = sink_alpha_[c] * c_new[c] + sink_offset_[c];
  });
}

ConcentrationClamp clamp_concentration_field(std::span<double> c, std::span<const double> phi,
                                             std::span<const double> s_tilde,
                                             double cell_volume) {
  ConcentrationClamp result;
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (c[i] < 0.0) {
      result.particle_volume_added += phi[i] * s_tilde[i] * (-c[i]) * cell_volume;
      c[i] = 0.0;
      ++result.count;
    }
  }
  return result;
}

}  // namespace nanoflood
