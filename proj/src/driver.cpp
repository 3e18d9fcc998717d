#include "nanoflood/driver.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <utility>

#include "nanoflood/exec.hpp"

namespace nanoflood {

namespace {

void append_error(std::string& err, const std::string& msg) {
  if (!err.empty()) err += "; ";
  err += msg;
}

double edge_length(Edge e, double lx, double ly) {
  return (e == Edge::left || e == Edge::right) ? ly : lx;
}

}  // namespace

void PermeabilityScenario::validate() const {
  std::string err;
  switch (kind) {
    case Kind::uniform:
      if (uniform_value <= 0.0) append_error(err, "uniform permeability must be > 0");
      break;
    case Kind::regular_heterogeneous:
      if (high_value <= 0.0 || low_value <= 0.0)
        append_error(err, "block permeability values must be > 0");
      if (block_nx < 1 || block_ny < 1)
        append_error(err, "permeability block size must be >= 1 cell");
      break;
    case Kind::random_log_uniform:
      if (random_min <= 0.0) append_error(err, "random permeability minimum must be > 0");
      if (random_max < random_min)
        append_error(err, "random permeability maximum must be >= minimum");
      break;
    case Kind::from_file:
      if (file_path.empty()) append_error(err, "permeability file path is empty");
      break;
  }
  if (!err.empty()) throw ConfigError("invalid permeability scenario: " + err);
}

std::vector<double> build_permeability(const StructuredGrid2D& grid,
                                       const PermeabilityScenario& scenario) {
  scenario.validate();
  const int n = grid.num_cells();
  std::vector<double> k(n);
  switch (scenario.kind) {
    case PermeabilityScenario::Kind::uniform:
      std::fill(k.begin(), k.end(), scenario.uniform_value);
      break;
    case PermeabilityScenario::Kind::regular_heterogeneous:
      for (int c = 0; c < n; ++c) {
        const int bi = grid.cell_i(c) / scenario.block_nx;
        const int bj = grid.cell_j(c) / scenario.block_ny;
        k[c] = (bi + bj) % 2 == 0 ? scenario.high_value : scenario.low_value;
      }
      break;
    case PermeabilityScenario::Kind::random_log_uniform: {
      std::mt19937_64 rng(scenario.seed);
      const double lo = std::log(scenario.random_min);
      const double hi = std::log(scenario.random_max);
      for (int c = 0; c < n; ++c) {
        // 53-bit uniform in [0, 1); spelled out so the field replays
        // identically on every platform.
        const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
        k[c] = std::exp(lo + u * (hi - lo));
      }
      break;
    }
    case PermeabilityScenario::Kind::from_file: {
      std::ifstream in(scenario.file_path);
      if (!in) throw ConfigError("cannot open permeability file: " + scenario.file_path);
      for (int c = 0; c < n; ++c) {
        double md = 0.0;
        if (!(in >> md)) {
          throw ConfigError("permeability file " + scenario.file_path + " has fewer than " +
                            std::to_string(n) + " values");
        }
        if (md <= 0.0) {
          throw ConfigError("permeability file " + scenario.file_path +
                            " contains a non-positive value");
        }
        k[c] = md * units::millidarcy;
      }
      double extra = 0.0;
      if (in >> extra) {
        throw ConfigError("permeability file " + scenario.file_path + " has more than " +
                          std::to_string(n) + " values");
      }
      break;
    }
  }
  return k;
}

double pv_rate_to_flux(double rate_pv_per_year, double pore_volume, double edge_length) {
  if (pore_volume <= 0.0 || edge_length <= 0.0) {
    throw ConfigError("pv_rate_to_flux requires positive pore volume and edge length");
  }
  if (rate_pv_per_year < 0.0) throw ConfigError("injection rate must be >= 0");
  return rate_pv_per_year * pore_volume / (units::year * edge_length);
}

void SimulationConfig::validate() const {
  rock.validate();
  nano.validate();
  perm.validate();
  std::string err;
  if (nx < 1 || ny < 1) append_error(err, "grid must have at least 1x1 cells");
  if (lx <= 0.0 || ly <= 0.0) append_error(err, "domain lengths must be > 0");
  if (dt <= 0.0) append_error(err, "dt must be > 0");
  if (target_pvi < 0.0) append_error(err, "target_pvi must be >= 0");
  if (end_time < 0.0) append_error(err, "end_time must be >= 0");
  if (boundary.injection_edge == boundary.production_edge)
    append_error(err, "injection and production edges must differ");
  if (boundary.rate_pv_per_year < 0.0) append_error(err, "injection rate must be >= 0");
  if (boundary.inflow_concentration < 0.0)
    append_error(err, "inflow concentration must be >= 0");
  if (boundary.inflow_saturation >= 0.0 &&
      (boundary.inflow_saturation < rock.s_wr || boundary.inflow_saturation > 1.0 - rock.s_nr))
    append_error(err, "inflow saturation must lie in [s_wr, 1 - s_nr]");
  if (initial_water_saturation >= 0.0 &&
      (initial_water_saturation < rock.s_wr || initial_water_saturation > 1.0 - rock.s_nr))
    append_error(err, "initial water saturation must lie in [s_wr, 1 - s_nr]");
  if (iteration.eps_s <= 0.0) append_error(err, "eps_s must be > 0");
  if (iteration.max_outer < 1) append_error(err, "max_outer must be >= 1");
  if (iteration.theta_min <= 0.0 || iteration.theta_max < iteration.theta_min ||
      iteration.theta_max > 1.0)
    append_error(err, "relaxation bounds must satisfy 0 < theta_min <= theta_max <= 1");
  if (iteration.rho <= 0.0) append_error(err, "relaxation rho must be > 0");
  if (linear.rel_tol <= 0.0 || linear.abs_tol <= 0.0)
    append_error(err, "linear solver tolerances must be > 0");
  if (linear.max_iter < 0) append_error(err, "linear solver max_iter must be >= 0");
  if (snapshot_every_pvi < 0.0) append_error(err, "snapshot cadence must be >= 0");
  if (!err.empty()) throw ConfigError("invalid simulation config: " + err);
}

double MassBalanceLedger::water_residual() const {
  return water_in_place - initial_water - injected_water + produced_water;
}

double MassBalanceLedger::water_residual_rel() const {
  const double denom = std::max(initial_water, injected_water);
  const double r = std::abs(water_residual());
  return denom > 0.0 ? r / denom : r;
}

double MassBalanceLedger::particle_residual() const {
  return suspended + deposited + entrapped + produced_particles - initial_suspended -
         injected_particles;
}

double MassBalanceLedger::particle_residual_rel() const {
  const double r = std::abs(particle_residual());
  return injected_particles > 0.0 ? r / injected_particles : r;
}

namespace {

StructuredGrid2D make_grid(const SimulationConfig& cfg) {
  cfg.validate();
  const double pv = cfg.rock.phi0 * cfg.lx * cfg.ly;
  std::vector<BoundarySegment> segments;
  for (Edge e : {Edge::left, Edge::right, Edge::bottom, Edge::top}) {
    BoundarySegment s;
    s.edge = e;
    s.lo = 0;
    s.hi = -1;
    if (e == cfg.boundary.injection_edge) {
      s.kind = BcKind::neumann_flux;
      s.inflow_velocity = pv_rate_to_flux(cfg.boundary.rate_pv_per_year, pv,
                                          edge_length(e, cfg.lx, cfg.ly));
      s.inflow_saturation = cfg.boundary.inflow_saturation < 0.0
                                ? 1.0 - cfg.rock.s_nr
                                : cfg.boundary.inflow_saturation;
      s.inflow_concentration = cfg.boundary.inflow_concentration;
    } else if (e == cfg.boundary.production_edge) {
      s.kind = BcKind::dirichlet_pressure;
      s.pressure = cfg.boundary.production_pressure;
    } else {
      s.kind = BcKind::no_flow;
    }
    segments.push_back(s);
  }
  return StructuredGrid2D::build(cfg.nx, cfg.ny, cfg.lx, cfg.ly, std::move(segments));
}

}  // namespace

Simulator::Simulator(SimulationConfig config)
    : cfg_(std::move(config)),
      grid_(make_grid(cfg_)),
      flow_(grid_, cfg_.rock, cfg_.gravity) {
  const int n = grid_.num_cells();
  const int nf = grid_.num_faces();
  pore_volume_ = cfg_.rock.phi0 * cfg_.lx * cfg_.ly;
  injection_flux_ = pv_rate_to_flux(cfg_.boundary.rate_pv_per_year, pore_volume_,
                                    edge_length(cfg_.boundary.injection_edge, cfg_.lx, cfg_.ly));

  st_.perm0 = build_permeability(grid_, cfg_.perm);
  st_.perm = st_.perm0;
  const double s0 =
      cfg_.initial_water_saturation < 0.0 ? cfg_.rock.s_wr : cfg_.initial_water_saturation;
  st_.s_w.assign(n, s0);
  st_.potential.assign(n, cfg_.boundary.production_pressure);
  st_.c.assign(n, 0.0);
  st_.v1.assign(n, 0.0);
  st_.v2.assign(n, 0.0);
  st_.porosity.assign(n, cfg_.rock.phi0);
  st_.flux_w.assign(nf, 0.0);
  st_.flux_t.assign(nf, 0.0);
  st_.ux.assign(n, 0.0);
  st_.uy.assign(n, 0.0);
  st_.u_mag.assign(n, 0.0);

  if (cfg_.transport_enabled) transport_.emplace(grid_, cfg_.rock, cfg_.nano);

  for (auto* v : {&s_iter_, &s_next_, &c_iter_, &v1_iter_, &v2_iter_, &phi_iter_, &perm_iter_,
                  &pot_iter_, &pot_new_, &ux_, &uy_, &u_mag_, &c_new_, &v1_new_, &v2_new_,
                  &phi_new_, &perm_new_, &r_applied_, &diff_, &scratch_}) {
    v->assign(n, 0.0);
  }
  flux_w_.assign(nf, 0.0);
  flux_t_.assign(nf, 0.0);

  const double vol = grid_.cell_volume();
  par_for(static_cast<std::size_t>(n),
          [&](std::size_t c) { scratch_[c] = st_.porosity[c] * st_.s_w[c] * vol; });
  ledger_.initial_water = det_sum(scratch_);
  ledger_.water_in_place = ledger_.initial_water;
}

StepReport Simulator::advance() {
  const int n = grid_.num_cells();
  const double vol = grid_.cell_volume();
  const double dt = cfg_.dt;

  StepReport rep;
  rep.step = st_.step + 1;

  s_iter_ = st_.s_w;
  c_iter_ = st_.c;
  v1_iter_ = st_.v1;
  v2_iter_ = st_.v2;
  phi_iter_ = st_.porosity;
  perm_iter_ = st_.perm;
  pot_iter_ = st_.potential;

  double delta_prev = 1.0;
  bool converged = false;
  FlowSolver::SaturationUpdate sat;
  double transport_clamp_volume = 0.0;

  for (int k = 0; k < cfg_.iteration.max_outer; ++k) {
    FlowFields ff;
    ff.s_iter = s_iter_;
    ff.s_prev = st_.s_w;
    ff.porosity = phi_iter_;
    ff.porosity_prev = st_.porosity;
    ff.perm = perm_iter_;
    ff.potential_prev = pot_iter_;
    ff.dt = dt;

    SparseSystem& psys = flow_.assemble_pressure(ff, cfg_.iteration.capillary);
    pot_new_ = pot_iter_;  // warm start
    const SolveReport pr = solve_system(psys, pot_new_, cfg_.linear);
    rep.pressure_iterations.push_back(pr.iterations);

    const bool coupled = cfg_.iteration.capillary == CapillaryMode::linearized_coupled;
    if (coupled) flow_.eliminated_saturation(ff, pot_new_, s_elim_);
    flow_.total_fluxes(ff, pot_new_,
                       coupled ? std::span<const double>(s_elim_) : std::span<const double>(),
                       cfg_.iteration.capillary, flux_t_);
    flow_.water_fluxes(pot_new_, flux_w_);
    sat = flow_.explicit_saturation_update(ff, flux_w_);
    rep.clamps.saturation_clamps += sat.clamps;
    flow_.cell_velocities(flux_w_, ux_, uy_, u_mag_);

    par_for(static_cast<std::size_t>(n),
            [&](std::size_t c) { diff_[c] = sat.clamped[c] - s_iter_[c]; });
    const double delta_curr = det_norm2(diff_);
    const double theta = compute_relaxation_factor(delta_prev, delta_curr, cfg_.iteration);
    rep.theta_history.push_back(theta);
    par_for(static_cast<std::size_t>(n),
            [&](std::size_t c) { s_next_[c] = s_iter_[c] + theta * diff_[c]; });
    const double delta_realized = theta * delta_curr;
    delta_prev = delta_realized;

    if (transport_) {
      TransportFields tf;
      tf.s_tilde = sat.clamped;
      tf.s_old = st_.s_w;
      tf.phi = phi_iter_;
      tf.phi_old = st_.porosity;
      tf.c_old = st_.c;
      tf.c_iter = c_iter_;
      tf.v1_old = st_.v1;
      tf.v1_iter = v1_iter_;
      tf.u_mag = u_mag_;
      tf.flux_w = flux_w_;
      tf.dt = dt;
      SparseSystem& tsys = transport_->assemble(tf);
      c_new_ = c_iter_;  // warm start
      const SolveReport tr = solve_system(tsys, c_new_, cfg_.linear);
      rep.transport_iterations.push_back(tr.iterations);
      const ConcentrationClamp cc =
          clamp_concentration_field(c_new_, phi_iter_, sat.clamped, vol);
      rep.clamps.concentration_clamps += cc.count;
      transport_clamp_volume = cc.particle_volume_added;
      retention_update_field(st_.v1, st_.v2, u_mag_, c_new_, dt, cfg_.nano, v1_new_, v2_new_);
      damage_update_field(v1_new_, v2_new_, st_.perm0, cfg_.rock, phi_new_, perm_new_,
                          rep.clamps);
    } else {
      c_new_ = st_.c;
      v1_new_ = st_.v1;
      v2_new_ = st_.v2;
      phi_new_ = phi_iter_;
      perm_new_ = perm_iter_;
    }

    rep.outer_iterations = k + 1;
    rep.final_delta_s = delta_realized;

    std::swap(s_iter_, s_next_);
    std::swap(c_iter_, c_new_);
    std::swap(v1_iter_, v1_new_);
    std::swap(v2_iter_, v2_new_);
    std::swap(phi_iter_, phi_new_);  // phi_new_ now holds the porosity the
    std::swap(perm_iter_, perm_new_);  // saturation update actually used
    std::swap(pot_iter_, pot_new_);

    if (delta_realized < cfg_.iteration.eps_s) {
      converged = true;
      break;
    }
  }

  rep.converged = converged;
  if (!converged) return rep;  // abort: nothing committed

  // --- Ledger booking (uses the pre-commit state still in st_) ---
  const std::vector<double>& phi_used = phi_new_;  // porosity of the final update
  double inj_w = 0.0, prod_w = 0.0, inj_p = 0.0, prod_p = 0.0;
  for (int fid : grid_.boundary_faces()) {
    const Face& f = grid_.face(fid);
    const double fw = flux_w_[fid];
    if (fw >= 0.0) {
      prod_w += fw;
      prod_p += fw * c_iter_[f.owner];
    } else {
      inj_w -= fw;
      inj_p -= fw * grid_.face_segment(f).inflow_concentration;
    }
  }
  ledger_.injected_water += dt * inj_w;
  ledger_.produced_water += dt * prod_w;
  ledger_.water_clamp_adjust += sat.clamp_volume;
  // The saturation update conserved phi*S across the porosity it was solved
  // on, but the final damage update shrinks the pores afterwards. Committing
  // the saturation re-expressed on the committed porosity keeps the water
  // volume in each cell exact through the commit: the pore shrinks around the
  // same water, so the saturation fraction rises. The booked drift is the
  // portion the re-expression could not preserve (bound clamping plus
  // rounding), which is zero in exact arithmetic.
  par_for(static_cast<std::size_t>(n), [&](std::size_t c) {
    const double s_t = sat.clamped[c];
    const double pu = phi_used[c];
    const double pc = phi_iter_[c];
    const double s_c = pu == pc ? s_t : std::clamp(s_t * (pu / pc), cfg_.rock.s_wr,
                                                   1.0 - cfg_.rock.s_nr);
    scratch_[c] = (pc * s_c - pu * s_t) * vol;
    sat.clamped[c] = s_c;
  });
  ledger_.pore_volume_drift += det_sum(scratch_);

  if (transport_) {
    ledger_.injected_particles += dt * inj_p;
    ledger_.produced_particles += dt * prod_p;
    ledger_.particle_clamp_adjust += transport_clamp_volume;
    par_for(static_cast<std::size_t>(n), [&](std::size_t c) {
      scratch_[c] = scratch_[c] * c_iter_[c];
    });
    ledger_.particle_pore_drift += det_sum(scratch_);
    transport_->applied_sink(c_iter_, r_applied_);
    par_for(static_cast<std::size_t>(n), [&](std::size_t c) {
      scratch_[c] = (v1_iter_[c] - st_.v1[c] + v2_iter_[c] - st_.v2[c] -
                     dt * r_applied_[c]) *
                    vol;
    });
    ledger_.particle_lag += det_sum(scratch_);
  }

  // --- Commit ---
  st_.s_w = std::move(sat.clamped);
  std::swap(st_.potential, pot_iter_);
  std::swap(st_.c, c_iter_);
  std::swap(st_.v1, v1_iter_);
  std::swap(st_.v2, v2_iter_);
  std::swap(st_.porosity, phi_iter_);
  std::swap(st_.perm, perm_iter_);
  std::swap(st_.flux_w, flux_w_);
  std::swap(st_.flux_t, flux_t_);
  std::swap(st_.ux, ux_);
  std::swap(st_.uy, uy_);
  std::swap(st_.u_mag, u_mag_);
  st_.time += dt;
  st_.step += 1;
  st_.pvi = ledger_.injected_water / pore_volume_;

  par_for(static_cast<std::size_t>(n),
          [&](std::size_t c) { scratch_[c] = st_.porosity[c] * st_.s_w[c] * vol; });
  ledger_.water_in_place = det_sum(scratch_);
  if (transport_) {
    par_for(static_cast<std::size_t>(n), [&](std::size_t c) {
      scratch_[c] = st_.porosity[c] * st_.s_w[c] * st_.c[c] * vol;
    });
    ledger_.suspended = det_sum(scratch_);
    par_for(static_cast<std::size_t>(n), [&](std::size_t c) { scratch_[c] = st_.v1[c] * vol; });
    ledger_.deposited = det_sum(scratch_);
    par_for(static_cast<std::size_t>(n), [&](std::size_t c) { scratch_[c] = st_.v2[c] * vol; });
    ledger_.entrapped = det_sum(scratch_);
  }

  rep.time = st_.time;
  rep.pvi = st_.pvi;
  rep.water_residual_rel = ledger_.water_residual_rel();
  rep.particle_residual_rel = ledger_.particle_residual_rel();
  return rep;
}

bool Simulator::done() const {
  if (cfg_.target_pvi > 0.0) return st_.pvi >= cfg_.target_pvi * (1.0 - 1e-9);
  if (cfg_.end_time > 0.0) return st_.time >= cfg_.end_time * (1.0 - 1e-9);
  return true;
}

bool Simulator::run(const StepCallback& on_step, const SnapshotCallback& on_snapshot) {
  if (on_snapshot) on_snapshot(*this, done());
  if (done()) return true;
  double next_snapshot = cfg_.snapshot_every_pvi > 0.0
                             ? cfg_.snapshot_every_pvi
                             : std::numeric_limits<double>::infinity();
  while (!done()) {
    const StepReport rep = advance();
    if (on_step) on_step(*this, rep);
    if (!rep.converged) return false;
    if (on_snapshot && !done() && st_.pvi >= next_snapshot * (1.0 - 1e-9)) {
      on_snapshot(*this, false);
      while (next_snapshot * (1.0 - 1e-9) <= st_.pvi) next_snapshot += cfg_.snapshot_every_pvi;
    }
  }
  if (on_snapshot) on_snapshot(*this, true);
  return true;
}

void Simulator::pressure_field(std::vector<double>& p_w) const {
  p_w.resize(st_.potential.size());
  par_for(p_w.size(), [&](std::size_t c) {
    p_w[c] = st_.potential[c] + cfg_.rock.rho_w *
                                    cfg_.gravity.dot(grid_.cell_x(static_cast<int>(c)),
                                                     grid_.cell_y(static_cast<int>(c)));
  });
}

}  // namespace nanoflood
