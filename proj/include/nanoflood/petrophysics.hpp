#pragma once

#include <cmath>
#include <span>

#include "nanoflood/common.hpp"

// Petrophysical closures: normalized saturation, capillary pressure,
// relative permeabilities, phase mobilities, and the particle-damage
// updates of porosity, flow efficiency and permeability. All scalar
// closures are pure; the *_field variants are exec-mode aware kernels.

namespace nanoflood {

constexpr double kSaturationFloor = 1e-4;  // floor of the normalized saturation
constexpr double kPorosityFloor = 1e-3;

struct RockFluidParams {
  double s_wr = 0.001;        // residual water saturation
  double s_nr = 0.001;        // residual oil saturation
  double a = 2.0;             // water rel-perm exponent
  double b = 2.0;             // oil rel-perm exponent
  double krw0 = 1.0;          // water rel-perm endpoint
  double krn0 = 1.0;          // oil rel-perm endpoint
  double mu_w = 1.0e-3;       // [Pa s]
  double mu_n = 0.45e-3;      // [Pa s]
  double b_c = 5.0e6;         // [Pa] capillary pressure coefficient
  double phi0 = 0.3;          // initial porosity
  double k_f = 0.6;           // permeability fraction through plugged pores
  double damage_exp = 3.0;    // permeability damage exponent, in [2.5, 3.5]
  double gamma_f = 0.01;      // flow-efficiency sensitivity to entrapped particles
  double rho_w = 1000.0;      // [kg/m^3]
  double rho_n = 800.0;       // [kg/m^3]

  double mobile_range() const { return 1.0 - s_nr - s_wr; }
  void validate() const;  // throws ConfigError
};

struct Mobilities {
  double lam_w;  // [1/(Pa s)]
  double lam_n;
  double lam_t;
  double f_w;    // fractional flow of water
};

inline double normalized_saturation(double s_w, const RockFluidParams& p) {
  const double s = (s_w - p.s_wr) / p.mobile_range();
  if (s < kSaturationFloor) return kSaturationFloor;
  if (s > 1.0) return 1.0;
  return s;
}

/// Normalized saturation without the capillary floor, clamped to [0, 1].
/// Relative permeabilities use this so that each phase is exactly immobile
/// at its residual saturation; the floored variant above exists only to
/// keep p_c and dp_c/dS finite.
inline double mobile_fraction(double s_w, const RockFluidParams& p) {
  const double s = (s_w - p.s_wr) / p.mobile_range();
  if (s < 0.0) return 0.0;
  if (s > 1.0) return 1.0;
  return s;
}

/// p_c(S) = -B_c ln(S) on the normalized saturation; zero at S = 1 and
/// finite at the floor.
inline double capillary_pressure(double s_norm, double b_c) {
  return -b_c * std::log(s_norm);
}

/// dp_c/dS_w through the normalized-saturation chain rule, evaluated with
/// the floored S so that it stays finite as S_w -> S_wr.
inline double capillary_pressure_dsw(double s_w, const RockFluidParams& p) {
  const double s = normalized_saturation(s_w, p);
  return -p.b_c / (s * p.mobile_range());
}

inline double rel_perm_water(double s_norm, const RockFluidParams& p) {
  return p.krw0 * std::pow(s_norm, p.a);
}

inline double rel_perm_oil(double s_norm, const RockFluidParams& p) {
  return p.krn0 * std::pow(1.0 - s_norm, p.b);
}

inline Mobilities mobilities(double s_w, const RockFluidParams& p) {
  // Rel perms take the unfloored mobile fraction: water at connate
  // saturation has zero mobility, so no committed flux can drain a cell
  // below its residual, which is what keeps the explicit update inside
  // the physical bounds without clamp corrections. lam_t stays positive
  // because the two rel perms never vanish at the same saturation.
  const double s = mobile_fraction(s_w, p);
  Mobilities m;
  m.lam_w = rel_perm_water(s, p) / p.mu_w;
  m.lam_n = rel_perm_oil(s, p) / p.mu_n;
  m.lam_t = m.lam_w + m.lam_n;
  m.f_w = m.lam_w / m.lam_t;
  return m;
}

/// phi = phi0 - (v1 + v2), floored at kPorosityFloor (clamp is counted).
inline double update_porosity(double phi0, double v1, double v2, bool* clamped = nullptr) {
  const double phi = phi0 - (v1 + v2);
  if (phi < kPorosityFloor) {
    if (clamped) *clamped = true;
    return kPorosityFloor;
  }
  if (clamped) *clamped = false;
  return phi;
}

/// Fraction of the cross-section open to flow, declining with entrapment.
inline double flow_efficiency(double v2, double gamma_f) {
  const double f = 1.0 - gamma_f * v2;
  if (f < 0.0) return 0.0;
  if (f > 1.0) return 1.0;
  return f;
}

inline double update_permeability(double k0, double phi, double phi0, double f,
                                  double k_f, double damage_exp) {
  const double base = (1.0 - f) * k_f + f * (phi / phi0);
  return k0 * std::pow(base, damage_exp);
}

/// Converts a deposited mass per bulk volume into a volume fraction.
inline double sigma_to_volume(double sigma, double rho_b) { return sigma / rho_b; }

// Field kernels ------------------------------------------------------------

void mobilities_field(std::span<const double> s_w, const RockFluidParams& p,
                      std::span<double> lam_w, std::span<double> lam_n,
                      std::span<double> lam_t, std::span<double> f_w);

void capillary_field(std::span<const double> s_w, const RockFluidParams& p,
                     std::span<double> p_c, std::span<double> dpc_dsw);

/// Recomputes porosity, flow efficiency and permeability from the retention
/// fields (anchored to the initial k0/phi0, not incrementally).
void damage_update_field(std::span<const double> v1, std::span<const double> v2,
                         std::span<const double> k0, const RockFluidParams& p,
                         std::span<double> phi, std::span<double> k,
                         EventCounters& events);

}  // namespace nanoflood
