#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "nanoflood/driver.hpp"

namespace nanoflood {

// --- Logging ----------------------------------------------------------------
// Verbosity comes from the NANOFLOOD_LOG environment variable:
// "quiet", "info" (default), or "debug". Messages go to stderr so stdout
// stays machine-readable.
enum class LogLevel { quiet = 0, info = 1, debug = 2 };
LogLevel log_level();
void log_info(const std::string& msg);
void log_debug(const std::string& msg);

// --- Config -----------------------------------------------------------------

/// Parse and fully validate a config document (JSON with // comments
/// allowed). Physical quantities carry their unit in the key name
/// (dt_days, bc_bar, mu_w_cp, uniform_md, ...) and are converted to SI here;
/// everything downstream is SI. Unknown keys are rejected with their full
/// path; missing required keys are all listed in one error.
SimulationConfig parse_config(const std::filesystem::path& path);

/// Same, from an in-memory document; `origin` labels error messages.
SimulationConfig parse_config_text(const std::string& text, const std::string& origin);

/// Canonical JSON echo of an effective config (field-friendly units, sorted
/// keys). Hashing this string defines the run id, so any two runs with the
/// same effective config and seed share it.
std::string serialize_config(const SimulationConfig& cfg);

std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t v);

// --- Output -----------------------------------------------------------------

/// Writes all run artifacts into one directory and accumulates the manifest:
///   fields_<step>.vtk   legacy-VTK ASCII structured-points cell data
///                       (s_w, p_w, c, v1, v2, phi, k)
///   fields_<step>.csv   flat per-cell table, 17 significant digits
///   timeseries.csv      one row per step: iteration counts, relaxation
///                       factors, clamp counters, ledger columns
///   failed_step.json    only when a step aborts; the offending report
///   manifest.json       run id, config echo, per-file checksums, final ledger
/// Nothing written here contains wall-clock time, so replays are
/// byte-identical and the manifest checksums reproducible.
class OutputWriter {
 public:
  /// Creates `dir` if needed. Throws ConfigError if it exists and is not a
  /// directory.
  OutputWriter(std::filesystem::path dir, const SimulationConfig& cfg);

  const std::string& run_id() const { return run_id_; }
  const std::filesystem::path& dir() const { return dir_; }

  /// Emit one field snapshot (VTK + CSV) of the current state.
  void write_snapshot(const Simulator& sim);

  /// Buffer one timeseries row.
  void record_step(const Simulator& sim, const StepReport& rep);

  /// Dump the report of a failed (non-converged or solver-error) step.
  void write_failed_step(const StepReport& rep, const std::string& reason,
                         const std::vector<double>& residual_history = {});

  /// Write timeseries.csv and manifest.json; returns the manifest path.
  /// `clean` records whether the run completed its stop condition.
  std::filesystem::path finalize(const Simulator& sim, bool clean);

 private:
  void emit(const std::string& name, std::int64_t step, double time, double pvi,
            const std::string& content);

  std::filesystem::path dir_;
  std::string run_id_;
  std::string config_echo_;
  std::string timeseries_;
  std::vector<std::string> file_entries_;  // serialized manifest rows
};

/// `run` subcommand entry point (also what main() calls). Returns 0 on clean
/// completion, 1 on config/CLI errors, 2 on numerical failure.
int cli_main(int argc, const char* const* argv);

}  // namespace nanoflood
