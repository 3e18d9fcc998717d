#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace nanoflood {

/// Conversion factors from the field-friendly units used in config files to
/// the SI units used everywhere internally.
namespace units {
inline constexpr double millidarcy = 9.869233e-16;  // [m^2]
inline constexpr double bar = 1.0e5;                // [Pa]
inline constexpr double centipoise = 1.0e-3;        // [Pa s]
inline constexpr double day = 86400.0;              // [s]
inline constexpr double year = 365.0 * day;         // [s]
}  // namespace units

/// Bad or inconsistent user input (config file, CLI flags, boundary layout).
/// The CLI maps this to exit code 1.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A linear solve failed to reach its tolerance. Carries the residual
/// history so a failed run can be diagnosed from the error report alone.
struct SolverError : std::runtime_error {
  SolverError(const std::string& msg, std::vector<double> history)
      : std::runtime_error(msg), residual_history(std::move(history)) {}
  std::vector<double> residual_history;
};

/// Counts of clamp events applied to keep fields inside their physical
/// ranges. Counts are diagnostics: a healthy run keeps all of them at zero.
struct EventCounters {
  std::int64_t saturation_clamps = 0;
  std::int64_t concentration_clamps = 0;
  std::int64_t porosity_clamps = 0;

  EventCounters& operator+=(const EventCounters& o) {
    saturation_clamps += o.saturation_clamps;
    concentration_clamps += o.concentration_clamps;
    porosity_clamps += o.porosity_clamps;
    return *this;
  }
  std::int64_t total() const {
    return saturation_clamps + concentration_clamps + porosity_clamps;
  }
};

}  // namespace nanoflood
