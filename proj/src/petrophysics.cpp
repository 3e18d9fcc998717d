#include "nanoflood/petrophysics.hpp"

#include <atomic>
#include <sstream>

#include "nanoflood/exec.hpp"

namespace nanoflood {

void RockFluidParams::validate() const {
  std::ostringstream bad;
  auto check = [&](bool ok, const char* msg) {
    if (!ok) bad << (bad.tellp() > 0 ? "; " : "") << msg;
  };
  check(s_wr >= 0.0 && s_nr >= 0.0, "residual saturations must be non-negative");
  check(mobile_range() > 0.0, "s_wr + s_nr must be below 1");
  check(a > 0.0 && b > 0.0, "rel-perm exponents must be positive");
  check(krw0 > 0.0 && krn0 > 0.0, "rel-perm endpoints must be positive");
  check(mu_w > 0.0 && mu_n > 0.0, "viscosities must be positive");
  check(b_c >= 0.0, "capillary coefficient must be non-negative");
  check(phi0 > kPorosityFloor && phi0 <= 1.0, "phi0 must lie in (1e-3, 1]");
  check(k_f >= 0.0 && k_f <= 1.0, "k_f must lie in [0, 1]");
  check(damage_exp >= 2.5 && damage_exp <= 3.5, "damage exponent must lie in [2.5, 3.5]");
  check(gamma_f >= 0.0, "gamma_f must be non-negative");
  check(rho_w > 0.0 && rho_n > 0.0, "densities must be positive");
  if (bad.tellp() > 0) throw ConfigError("rock/fluid parameters: " + bad.str());
}

void mobilities_field(std::span<const double> s_w, const RockFluidParams& p,
                      std::span<double> lam_w, std::span<double> lam_n,
                      std::span<double> lam_t, std::span<double> f_w) {
  par_for(s_w.size(), [&](std::size_t c) {
    const Mobilities m = mobilities(s_w[c], p);
    lam_w[c] = m.lam_w;
    lam_n[c] = m.lam_n;
    lam_t[c] = m.lam_t;
    f_w[c] = m.f_w;
  });
}

void capillary_field(std::span<const double> s_w, const RockFluidParams& p,
                     std::span<double> p_c, std::span<double> dpc_dsw) {
  par_for(s_w.size(), [&](std::size_t c) {
    const double s = normalized_saturation(s_w[c], p);
    p_c[c] = capillary_pressure(s, p.b_c);
    dpc_dsw[c] = -p.b_c / (s * p.mobile_range());
  });
}

void damage_update_field(std::span<const double> v1, std::span<const double> v2,
                         std::span<const double> k0, const RockFluidParams& p,
                         std::span<double> phi, std::span<double> k,
                         EventCounters& events) {
  std::atomic<std::int64_t> clamps{0};
  par_for(v1.size(), [&](std::size_t c) {
    bool clamped = false;
    phi[c] = update_porosity(p.phi0, v1[c], v2[c], &clamped);
    if (clamped) clamps.fetch_add(1, std::memory_order_relaxed);
    const double f = flow_efficiency(v2[c], p.gamma_f);
    k[c] = update_permeability(k0[c], phi[c], p.phi0, f, p.k_f, p.damage_exp);
  });
  events.porosity_clamps += clamps.load();
}

}  // namespace nanoflood
