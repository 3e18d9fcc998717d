#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>

#include "json.hpp"
#include "nanoflood/io.hpp"

namespace nanoflood {

namespace {

using nlohmann::json;

/// Shortest exact decimal is not enough for golden-file comparisons across
/// libc versions; 17 significant digits always round-trips a double.
std::string fmt17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string join_seq(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ';';
    s += fmt17(v[i]);
  }
  return s;
}

std::string join_seq(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ';';
    s += std::to_string(v[i]);
  }
  return s;
}

void append_array(std::string& out, const char* name, std::span<const double> field) {
  out += "SCALARS ";
  out += name;
  out += " double 1\nLOOKUP_TABLE default\n";
  for (double v : field) {
    out += fmt17(v);
    out += '\n';
  }
}

json ledger_json(const MassBalanceLedger& l) {
  return json{{"initial_water_m3", l.initial_water},
              {"injected_water_m3", l.injected_water},
              {"produced_water_m3", l.produced_water},
              {"water_in_place_m3", l.water_in_place},
              {"water_clamp_adjust_m3", l.water_clamp_adjust},
              {"pore_volume_drift_m3", l.pore_volume_drift},
              {"water_residual_rel", l.water_residual_rel()},
              {"initial_suspended_m3", l.initial_suspended},
              {"injected_particles_m3", l.injected_particles},
              {"produced_particles_m3", l.produced_particles},
              {"suspended_m3", l.suspended},
              {"deposited_m3", l.deposited},
              {"entrapped_m3", l.entrapped},
              {"particle_clamp_adjust_m3", l.particle_clamp_adjust},
              {"particle_pore_drift_m3", l.particle_pore_drift},
              {"particle_lag_m3", l.particle_lag},
              {"particle_residual_rel", l.particle_residual_rel()}};
}

constexpr const char* kTimeseriesHeader =
    "step,time_s,pvi,outer_iterations,final_delta_s,theta_seq,pressure_iters,"
    "transport_iters,saturation_clamps,concentration_clamps,porosity_clamps,"
    "injected_water_m3,produced_water_m3,water_in_place_m3,water_clamp_adjust_m3,"
    "pore_volume_drift_m3,water_residual_rel,injected_particles_m3,"
    "produced_particles_m3,suspended_m3,deposited_m3,entrapped_m3,"
    "particle_clamp_adjust_m3,particle_pore_drift_m3,particle_lag_m3,"
    "particle_residual_rel\n";

}  // namespace

LogLevel log_level() {
  static const LogLevel lvl = [] {
    const char* e = std::getenv("NANOFLOOD_LOG");
    if (!e) return LogLevel::info;
    const std::string s(e);
    if (s == "quiet") return LogLevel::quiet;
    if (s == "debug") return LogLevel::debug;
    return LogLevel::info;
  }();
  return lvl;
}

void log_info(const std::string& msg) {
  if (log_level() >= LogLevel::info) std::cerr << "[nanoflood] " << msg << '\n';
}

void log_debug(const std::string& msg) {
  if (log_level() >= LogLevel::debug) std::cerr << "[nanoflood] " << msg << '\n';
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

OutputWriter::OutputWriter(std::filesystem::path dir, const SimulationConfig& cfg)
    : dir_(std::move(dir)) {
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  if (!std::filesystem::is_directory(dir_)) {
    throw ConfigError("output path is not a directory: " + dir_.string());
  }
  config_echo_ = serialize_config(cfg);
  run_id_ = hex64(fnv1a64(config_echo_));
  timeseries_ = kTimeseriesHeader;
}

void OutputWriter::emit(const std::string& name, std::int64_t step, double time, double pvi,
                        const std::string& content) {
  std::ofstream out(dir_ / name, std::ios::binary);
  if (!out) throw ConfigError("cannot write output file: " + (dir_ / name).string());
  out << content;
  out.close();
  if (!out) throw ConfigError("write failed: " + (dir_ / name).string());
  json entry{{"name", name},
             {"step", step},
             {"time_s", time},
             {"pvi", pvi},
             {"fnv1a64", hex64(fnv1a64(content))}};
  file_entries_.push_back(entry.dump());
}

void OutputWriter::write_snapshot(const Simulator& sim) {
  const StructuredGrid2D& g = sim.grid();
  const SimulationState& st = sim.state();
  std::vector<double> p_w;
  sim.pressure_field(p_w);

  char stem[32];
  std::snprintf(stem, sizeof(stem), "fields_%08lld", static_cast<long long>(st.step));

  std::string vtk;
  vtk.reserve(static_cast<std::size_t>(g.num_cells()) * 7 * 20 + 512);
  vtk += "# vtk DataFile Version 3.0\n";
  vtk += "nanoflood fields step=" + std::to_string(st.step) + " time_s=" + fmt17(st.time) +
         " pvi=" + fmt17(st.pvi) + "\n";
  vtk += "ASCII\n";
  vtk += "DATASET STRUCTURED_POINTS\n";
  vtk += "DIMENSIONS " + std::to_string(g.nx() + 1) + " " + std::to_string(g.ny() + 1) + " 1\n";
  vtk += "ORIGIN 0 0 0\n";
  vtk += "SPACING " + fmt17(g.dx()) + " " + fmt17(g.dy()) + " 1\n";
  vtk += "CELL_DATA " + std::to_string(g.num_cells()) + "\n";
  append_array(vtk, "s_w", st.s_w);
  append_array(vtk, "p_w", p_w);
  append_array(vtk, "c", st.c);
  append_array(vtk, "v1", st.v1);
  append_array(vtk, "v2", st.v2);
  append_array(vtk, "phi", st.porosity);
  append_array(vtk, "k", st.perm);
  emit(std::string(stem) + ".vtk", st.step, st.time, st.pvi, vtk);

  std::string csv = "i,j,x,y,s_w,p_w,c,v1,v2,phi,k\n";
  csv.reserve(static_cast<std::size_t>(g.num_cells()) * 200 + 64);
  for (int c = 0; c < g.num_cells(); ++c) {
    csv += std::to_string(g.cell_i(c)) + ',' + std::to_string(g.cell_j(c)) + ',' +
           fmt17(g.cell_x(c)) + ',' + fmt17(g.cell_y(c)) + ',' + fmt17(st.s_w[c]) + ',' +
           fmt17(p_w[c]) + ',' + fmt17(st.c[c]) + ',' + fmt17(st.v1[c]) + ',' +
           fmt17(st.v2[c]) + ',' + fmt17(st.porosity[c]) + ',' + fmt17(st.perm[c]) + '\n';
  }
  emit(std::string(stem) + ".csv", st.step, st.time, st.pvi, csv);
  log_debug("snapshot at step " + std::to_string(st.step) + ", pvi " + fmt17(st.pvi));
}

void OutputWriter::record_step(const Simulator& sim, const StepReport& rep) {
  const MassBalanceLedger& l = sim.ledger();
  std::string row;
  row += std::to_string(rep.step);
  row += ',' + fmt17(rep.time);
  row += ',' + fmt17(rep.pvi);
  row += ',' + std::to_string(rep.outer_iterations);
  row += ',' + fmt17(rep.final_delta_s);
  row += ',' + join_seq(rep.theta_history);
  row += ',' + join_seq(rep.pressure_iterations);
  row += ',' + join_seq(rep.transport_iterations);
  row += ',' + std::to_string(rep.clamps.saturation_clamps);
  row += ',' + std::to_string(rep.clamps.concentration_clamps);
  row += ',' + std::to_string(rep.clamps.porosity_clamps);
  row += ',' + fmt17(l.injected_water);
  row += ',' + fmt17(l.produced_water);
  row += ',' + fmt17(l.water_in_place);
  row += ',' + fmt17(l.water_clamp_adjust);
  row += ',' + fmt17(l.pore_volume_drift);
  row += ',' + fmt17(l.water_residual_rel());
  row += ',' + fmt17(l.injected_particles);
  row += ',' + fmt17(l.produced_particles);
  row += ',' + fmt17(l.suspended);
  row += ',' + fmt17(l.deposited);
  row += ',' + fmt17(l.entrapped);
  row += ',' + fmt17(l.particle_clamp_adjust);
  row += ',' + fmt17(l.particle_pore_drift);
  row += ',' + fmt17(l.particle_lag);
  row += ',' + fmt17(l.particle_residual_rel());
  row += '\n';
  timeseries_ += row;
}

void OutputWriter::write_failed_step(const StepReport& rep, const std::string& reason,
                                     const std::vector<double>& residual_history) {
  json j{{"reason", reason},
         {"step", rep.step},
         {"outer_iterations", rep.outer_iterations},
         {"final_delta_s", rep.final_delta_s},
         {"theta_seq", rep.theta_history},
         {"pressure_iterations", rep.pressure_iterations},
         {"transport_iterations", rep.transport_iterations},
         {"saturation_clamps", rep.clamps.saturation_clamps},
         {"concentration_clamps", rep.clamps.concentration_clamps},
         {"porosity_clamps", rep.clamps.porosity_clamps}};
  if (!residual_history.empty()) j["residual_history"] = residual_history;
  emit("failed_step.json", rep.step, rep.time, rep.pvi, j.dump(2) + "\n");
}

std::filesystem::path OutputWriter::finalize(const Simulator& sim, bool clean) {
  emit("timeseries.csv", sim.state().step, sim.state().time, sim.state().pvi, timeseries_);

  json files = json::array();
  for (const auto& e : file_entries_) files.push_back(json::parse(e));
  json manifest{{"run_id", run_id_},
                {"output_dir", dir_.string()},
                {"status", clean ? "clean" : "aborted"},
                {"final_step", sim.state().step},
                {"final_time_s", sim.state().time},
                {"final_pvi", sim.state().pvi},
                {"config", json::parse(config_echo_)},
                {"final_ledger", ledger_json(sim.ledger())},
                {"files", files}};
  const std::filesystem::path path = dir_ / "manifest.json";
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write manifest: " + path.string());
  out << manifest.dump(2) << '\n';
  out.close();
  if (!out) throw ConfigError("write failed: " + path.string());
  return path;
}

}  // namespace nanoflood
