#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "nanoflood/grid.hpp"
#include "nanoflood/petrophysics.hpp"
#include "nanoflood/sparse.hpp"

// Pressure/saturation stage of the outer iteration. Space is discretized
// with cell-centered two-point flux finite volumes: harmonic face
// permeability, donor-cell (upwind) face mobilities frozen at the current
// outer iterate, Dirichlet boundaries through half-cell transmissibilities
// and Neumann boundaries as imposed face fluxes.
//
// The water potential is the implicit unknown. The capillary potential is
// either frozen at the current saturation iterate on the right-hand side
// (lagged_explicit) or linearized around it and coupled back through the
// discrete saturation update, which eliminates the provisional saturation
// and yields a single wider-stencil system (linearized_coupled). With a
// zero capillary coefficient both modes reduce to the same matrix.
//
// The water flux is the fractional flow times the water-potential-driven
// flux, F_w = f_w * (-lambda_t K grad Phi_w), which is the upwinded Darcy
// water flux itself: the capillary potential belongs to the non-wetting
// phase and never appears in the water flux directly. Capillary suction
// reaches the saturation update only through the solved potential, so in
// the coupled mode the saturation response to steep capillary contrasts is
// metered by the implicit linearization instead of an explicit capillary
// term, which is what keeps the explicit saturation update stable at
// field-strength capillary pressure.

namespace nanoflood {

enum class CapillaryMode { linearized_coupled, lagged_explicit };

struct IterationControls {
  double theta_min = 0.1;
  double theta_max = 0.9;
  double rho = 0.2;          // relaxation aggressiveness
  double eps_s = 1e-4;       // outer stopping tolerance on ||dS||_2
  int max_outer = 50;
  CapillaryMode capillary = CapillaryMode::linearized_coupled;
};

struct GravityModel {
  bool enabled = false;
  double gx = 0.0;
  double gy = -9.81;  // [m/s^2]
  double dot(double x, double y) const { return enabled ? gx * x + gy * y : 0.0; }
};

/// Harmonic-mean transmissibility of a face; boundary faces use the owner
/// permeability over the half-distance.
double face_transmissibility(const StructuredGrid2D& grid, std::span<const double> k,
                             int face);

/// Donor-cell mobility: the value from the higher-potential side, owner on ties.
inline double upwind_face_mobility(double dphi, double lam_owner, double lam_neighbor) {
  return dphi >= 0.0 ? lam_owner : lam_neighbor;
}

/// theta = clamp(rho * delta_prev / max(delta_curr, 1e-30), theta_min, theta_max)
double compute_relaxation_factor(double delta_prev, double delta_curr,
                                 const IterationControls& controls);

/// Per-iteration field inputs. Spans alias driver-owned storage.
struct FlowFields {
  std::span<const double> s_iter;         // S^k, the relaxed outer iterate
  std::span<const double> s_prev;         // S^n
  std::span<const double> porosity;       // phi^k
  std::span<const double> porosity_prev;  // phi^n; empty means phi^k (no damage yet)
  std::span<const double> perm;           // K^k [m^2]
  std::span<const double> potential_prev; // Phi_w^k, donors + warm start
  std::span<const double> q_water;        // per-cell source [m^3/s]; empty = none
  std::span<const double> q_total;
  double dt = 0.0;                        // [s]
};

class FlowSolver {
 public:
  FlowSolver(const StructuredGrid2D& grid, const RockFluidParams& rock,
             GravityModel gravity);

  /// Freezes mobilities and face coefficients at the iterate in `fields`
  /// and assembles the pressure system for the requested capillary mode.
  /// The returned reference stays valid until the next assemble call for
  /// the same mode.
  SparseSystem& assemble_pressure(const FlowFields& fields, CapillaryMode mode);

  /// Provisional saturation implied by the assembled coupled system for a
  /// solved potential: the same affine map the capillary elimination used.
  /// Only meaningful after an assemble in linearized_coupled mode.
  void eliminated_saturation(const FlowFields& fields, std::span<const double> potential,
                             std::vector<double>& s_elim) const;

  /// Face water fluxes (owner->neighbor / outward, [m^3/s]): the face
  /// fractional flow times the water-potential-driven flux on interior and
  /// Dirichlet faces, the imposed water inflow on Neumann faces. Uses the
  /// face coefficients frozen by the last assemble, so summing these fluxes
  /// reproduces the water divergence the coupled elimination assumed.
  void water_fluxes(std::span<const double> potential, std::vector<double>& flux_w) const;

  struct SaturationUpdate {
    std::vector<double> raw;      // unclamped provisional saturation
    std::vector<double> clamped;
    double clamp_volume = 0.0;    // pore volume the clamp added [m^3]
    std::int64_t clamps = 0;
  };
  SaturationUpdate explicit_saturation_update(const FlowFields& fields,
                                              const std::vector<double>& flux_w) const;

  /// Total face fluxes consistent with the assembled equation. In coupled
  /// mode the capillary part is evaluated at the linearized potential of
  /// the eliminated provisional saturation, so the discrete divergence
  /// matches the solved system; pass an empty span in lagged mode.
  void total_fluxes(const FlowFields& fields, std::span<const double> potential,
                    std::span<const double> s_tilde_raw, CapillaryMode mode,
                    std::vector<double>& flux_t) const;

  /// Cell-centered water velocity from opposing-face averages.
  void cell_velocities(const std::vector<double>& flux_w, std::span<double> ux,
                       std::span<double> uy, std::span<double> umag) const;

  const std::vector<double>& frac_flow() const { return f_w_; }

 private:
  static double carried_saturation(const FlowFields& fields, std::size_t c);
  void compute_cell_coefficients(const FlowFields& fields);
  void compute_face_coefficients(const FlowFields& fields);
  void fill_water_matrix(const FlowFields& fields, std::vector<Triplet>* pattern);
  void fill_pressure_matrix(const FlowFields& fields, CapillaryMode mode,
                            SparseSystem& sys, std::vector<Triplet>* pattern);
  double boundary_water_flux(const Face& face, int bface_id, double fw_owner) const;

  const StructuredGrid2D& grid_;
  const RockFluidParams& rock_;
  GravityModel gravity_;

  // Per-cell coefficients frozen at S^k.
  std::vector<double> lam_w_, lam_n_, lam_t_, f_w_;
  std::vector<double> cap_pot_, cap_dsw_;   // Phi_c(S^k), dp_c/dS_w(S^k)
  std::vector<double> grav_cell_;           // -(rho_n - rho_w) g.x per cell
  std::vector<double> a_lin_, beta_;        // capillary linearization pieces

  // Per-face coefficients (transmissibility includes permeability).
  std::vector<double> face_trans_, face_lw_, face_ln_, face_lt_;
  std::vector<double> dirichlet_pot_;       // Phi^D per face (boundary Dirichlet only)

  CsrMatrix m_w_;                 // water-flux divergence matrix (coupled mode)
  std::vector<double> w_affine_;  // potential-independent part of the water divergence
  bool m_w_patterned_ = false;

  SparseSystem sys_coupled_, sys_lagged_;
  bool coupled_patterned_ = false, lagged_patterned_ = false;
};

}  // namespace nanoflood
