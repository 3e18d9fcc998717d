#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "nanoflood/common.hpp"
#include "nanoflood/flow.hpp"
#include "nanoflood/grid.hpp"
#include "nanoflood/petrophysics.hpp"
#include "nanoflood/sparse.hpp"
#include "nanoflood/transport.hpp"

namespace nanoflood {

/// How the initial permeability field is generated. All values are SI [m^2].
struct PermeabilityScenario {
  enum class Kind { uniform, regular_heterogeneous, random_log_uniform, from_file };
  Kind kind = Kind::uniform;
  double uniform_value = 100.0 * units::millidarcy;
  // Two-value checkerboard layout: cells are grouped into block_nx x block_ny
  // tiles, alternating between the high and low value.
  double high_value = 100.0 * units::millidarcy;
  double low_value = 10.0 * units::millidarcy;
  int block_nx = 5;
  int block_ny = 5;
  // Per-cell log-uniform sampling in [random_min, random_max].
  double random_min = 10.0 * units::millidarcy;
  double random_max = 100.0 * units::millidarcy;
  std::uint64_t seed = 0;
  // Whitespace-separated row-major (i fastest) cell values in millidarcy.
  std::string file_path;

  void validate() const;
};

/// Deterministic permeability field for the scenario; identical output for
/// identical (scenario, grid).
std::vector<double> build_permeability(const StructuredGrid2D& grid,
                                       const PermeabilityScenario& scenario);

/// Edge roles for the standard flood layout: one injection edge carrying a
/// uniform inflow, one production edge held at constant pressure, the other
/// two closed. Any assignment of edges is allowed as long as they differ.
struct BoundaryConfig {
  Edge injection_edge = Edge::left;
  Edge production_edge = Edge::right;
  double rate_pv_per_year = 0.1;      // injected pore volumes per year
  double production_pressure = 1.0e5; // [Pa]
  double inflow_saturation = -1.0;    // water saturation of inflow; <0 -> 1 - s_nr
  double inflow_concentration = 0.0;  // particle concentration of inflow (c0)
};

struct SimulationConfig {
  int nx = 60;
  int ny = 20;
  double lx = 0.3;  // [m]
  double ly = 0.2;  // [m]
  RockFluidParams rock;
  NanoparticleParams nano;
  bool transport_enabled = true;
  PermeabilityScenario perm;
  BoundaryConfig boundary;
  double dt = 0.025 * units::day;  // [s]
  double target_pvi = 0.5;         // stop once this many pore volumes injected (>0)
  double end_time = 0.0;           // [s] alternative stop when target_pvi == 0
  double initial_water_saturation = -1.0;  // <0 -> s_wr
  IterationControls iteration;
  LinearSolveControls linear;
  GravityModel gravity;
  double snapshot_every_pvi = 0.05;  // <=0 -> only initial and final snapshots

  void validate() const;  // throws ConfigError listing every violation
};

/// Uniform inflow Darcy flux [m/s] equivalent to a pore-volume-per-year
/// injection rate spread over an edge of the given length (365-day year).
double pv_rate_to_flux(double rate_pv_per_year, double pore_volume, double edge_length);

struct SimulationState {
  std::vector<double> s_w;        // water saturation
  std::vector<double> potential;  // water-phase flow potential [Pa]
  std::vector<double> c;          // suspended particle concentration
  std::vector<double> v1;         // surface deposit volume fraction
  std::vector<double> v2;         // pore-throat deposit volume fraction
  std::vector<double> porosity;
  std::vector<double> perm;       // current permeability [m^2]
  std::vector<double> perm0;      // initial permeability [m^2]
  std::vector<double> flux_w;     // committed face water fluxes [m^3/s]
  std::vector<double> flux_t;     // committed face total fluxes [m^3/s]
  std::vector<double> ux, uy, u_mag;  // committed water Darcy velocity [m/s]
  double time = 0.0;  // [s]
  double pvi = 0.0;
  std::int64_t step = 0;
};

/// Running volume accounts, all in [m^3] per unit thickness. The audited
/// identities are the raw conservation statements
///   |water_in_place - initial_water - injected_water + produced_water|
///       <= 1e-8 * max(initial_water, injected_water)
///   |suspended + deposited + entrapped + produced_particles
///       - initial_suspended - injected_particles| <= 1e-6 * injected_particles
/// at every output time. The remaining diagnostic accounts attribute whatever
/// residual exists: the clamp-adjust terms book volume created by clamping
/// saturations and concentrations back into their physical ranges; the
/// pore-drift terms book the in-place shift caused by porosity updating once
/// more after the final saturation/concentration solves of a step; and
/// particle_lag books the gap between the retention sink the concentration
/// matrix applied and the deposit growth committed afterwards (zero to
/// round-off for the implicit-consistent retention coupling, one iterate of
/// concentration history for the lagged-explicit coupling).
struct MassBalanceLedger {
  double initial_water = 0.0;
  double injected_water = 0.0;
  double produced_water = 0.0;
  double water_clamp_adjust = 0.0;   // diagnostic
  double pore_volume_drift = 0.0;    // diagnostic

  double initial_suspended = 0.0;
  double injected_particles = 0.0;
  double produced_particles = 0.0;
  double particle_clamp_adjust = 0.0;  // diagnostic
  double particle_pore_drift = 0.0;    // diagnostic
  double particle_lag = 0.0;           // diagnostic

  // Instantaneous state sums, refreshed after every committed step.
  double water_in_place = 0.0;
  double suspended = 0.0;
  double deposited = 0.0;   // sum of v1 * cell volume
  double entrapped = 0.0;   // sum of v2 * cell volume

  double water_residual() const;
  double water_residual_rel() const;
  double particle_residual() const;
  double particle_residual_rel() const;
};

struct StepReport {
  std::int64_t step = 0;
  double time = 0.0;  // [s] at end of step
  double pvi = 0.0;
  int outer_iterations = 0;
  double final_delta_s = 0.0;  // ||S^{k+1} - S^k||_2 of the accepted iteration
  bool converged = false;
  std::vector<double> theta_history;
  std::vector<int> pressure_iterations;
  std::vector<int> transport_iterations;
  EventCounters clamps;
  double water_residual_rel = 0.0;
  double particle_residual_rel = 0.0;
};

/// Owns the simulation state and runs the per-step outer iteration:
/// pressure solve, explicit saturation update with relaxation, implicit
/// concentration solve, pointwise deposit updates, damage update, repeated
/// until the saturation increment drops below eps_s. The committed saturation
/// is the final unrelaxed (clamped) proposal, which closes the water account
/// exactly; the relaxed iterate only steers the coefficients and the
/// convergence test.
class Simulator {
 public:
  explicit Simulator(SimulationConfig config);

  /// Advance one time step. On outer-iteration non-convergence the state is
  /// left at the last committed step and the report has converged == false.
  /// Linear-solver failures propagate as SolverError.
  StepReport advance();

  using StepCallback = std::function<void(const Simulator&, const StepReport&)>;
  using SnapshotCallback = std::function<void(const Simulator&, bool is_final)>;

  /// Run to the configured stop condition, invoking `on_step` after every
  /// step and `on_snapshot` at the PVI cadence (plus initial and final
  /// states). Returns false if a step failed to converge.
  bool run(const StepCallback& on_step = nullptr,
           const SnapshotCallback& on_snapshot = nullptr);

  const SimulationConfig& config() const { return cfg_; }
  const StructuredGrid2D& grid() const { return grid_; }
  const SimulationState& state() const { return st_; }
  const MassBalanceLedger& ledger() const { return ledger_; }
  double pore_volume() const { return pore_volume_; }
  double injection_flux() const { return injection_flux_; }
  bool done() const;

  /// Water pressure recovered from the flow potential.
  void pressure_field(std::vector<double>& p_w) const;

 private:
  SimulationConfig cfg_;
  StructuredGrid2D grid_;
  FlowSolver flow_;
  std::optional<TransportSolver> transport_;
  SimulationState st_;
  MassBalanceLedger ledger_;
  double pore_volume_ = 0.0;
  double injection_flux_ = 0.0;

  // Outer-iteration work buffers, allocated once.
  std::vector<double> s_iter_, s_next_, c_iter_, v1_iter_, v2_iter_, phi_iter_, perm_iter_;
  std::vector<double> pot_iter_, pot_new_, flux_w_, flux_t_, ux_, uy_, u_mag_;
  std::vector<double> c_new_, v1_new_, v2_new_, phi_new_, perm_new_, r_applied_, diff_;
  std::vector<double> s_elim_, scratch_;
};

}  // namespace nanoflood
