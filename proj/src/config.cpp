#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "nanoflood/io.hpp"

namespace nanoflood {

namespace {

using nlohmann::json;

struct ParseState {
  std::vector<std::string> missing;
  std::vector<std::string> errors;
};

/// Strict reader over one JSON object: every accessed key is remembered so
/// check_unknown() can reject anything unrecognized, required keys collect
/// into one combined error instead of failing fast, and a missing section
/// reads as empty so its required leaves are reported with full paths.
class Reader {
 public:
  Reader(const json* obj, std::string path, ParseState& st)
      : obj_(obj), path_(std::move(path)), st_(st) {}

  Reader section(const std::string& name) {
    mark(name);
    const json* v = find(name);
    if (!v) return Reader(nullptr, join(name), st_);
    if (!v->is_object()) {
      st_.errors.push_back(join(name) + ": expected an object");
      return Reader(nullptr, join(name), st_);
    }
    return Reader(v, join(name), st_);
  }

  bool has(const std::string& name) {
    mark(name);
    return find(name) != nullptr;
  }

  double req_num(const std::string& name) {
    mark(name);
    const json* v = find(name);
    if (!v) {
      st_.missing.push_back(join(name));
      return 0.0;
    }
    return as_num(name, *v);
  }

  int req_int(const std::string& name) {
    mark(name);
    const json* v = find(name);
    if (!v) {
      st_.missing.push_back(join(name));
      return 0;
    }
    return as_int(name, *v);
  }

  double opt_num(const std::string& name, double def) {
    mark(name);
    const json* v = find(name);
    return v ? as_num(name, *v) : def;
  }

  /// Optional quantity given in display units; converted to SI by `factor`.
  double opt_unit(const std::string& name, double si_default, double factor) {
    mark(name);
    const json* v = find(name);
    return v ? as_num(name, *v) * factor : si_default;
  }

  int opt_int(const std::string& name, int def) {
    mark(name);
    const json* v = find(name);
    return v ? as_int(name, *v) : def;
  }

  std::uint64_t opt_u64(const std::string& name, std::uint64_t def) {
    mark(name);
    const json* v = find(name);
    if (!v) return def;
    if (!v->is_number_unsigned()) {
      st_.errors.push_back(join(name) + ": expected a non-negative integer");
      return def;
    }
    return v->get<std::uint64_t>();
  }

  bool opt_bool(const std::string& name, bool def) {
    mark(name);
    const json* v = find(name);
    if (!v) return def;
    if (!v->is_boolean()) {
      st_.errors.push_back(join(name) + ": expected a boolean");
      return def;
    }
    return v->get<bool>();
  }

  std::string opt_str(const std::string& name, const std::string& def) {
    mark(name);
    const json* v = find(name);
    if (!v) return def;
    if (!v->is_string()) {
      st_.errors.push_back(join(name) + ": expected a string");
      return def;
    }
    return v->get<std::string>();
  }

  /// Maps a string key onto one of the allowed values; unknown strings list
  /// the accepted spellings in the error.
  int opt_enum(const std::string& name, const std::vector<std::string>& values, int def) {
    const std::string s = opt_str(name, values[static_cast<std::size_t>(def)]);
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (s == values[i]) return static_cast<int>(i);
    }
    std::string msg = join(name) + ": must be one of";
    for (const auto& v : values) msg += " '" + v + "'";
    st_.errors.push_back(msg);
    return def;
  }

  void check_unknown() {
    if (!obj_) return;
    for (const auto& item : obj_->items()) {
      if (!seen_.count(item.key())) st_.errors.push_back("unknown key: " + join(item.key()));
    }
  }

 private:
  std::string join(const std::string& k) const { return path_.empty() ? k : path_ + "." + k; }
  void mark(const std::string& k) { seen_.insert(k); }
  const json* find(const std::string& k) const {
    if (!obj_) return nullptr;
    auto it = obj_->find(k);
    return it == obj_->end() ? nullptr : &*it;
  }
  double as_num(const std::string& name, const json& v) {
    if (!v.is_number()) {
      st_.errors.push_back(join(name) + ": expected a number");
      return 0.0;
    }
    return v.get<double>();
  }
  int as_int(const std::string& name, const json& v) {
    if (!v.is_number_integer()) {
      st_.errors.push_back(join(name) + ": expected an integer");
      return 0;
    }
    return v.get<int>();
  }

  const json* obj_;
  std::string path_;
  ParseState& st_;
  std::set<std::string> seen_;
};

const std::vector<std::string> kEdgeNames = {"left", "right", "bottom", "top"};
const std::vector<std::string> kScenarioNames = {"uniform", "regular_heterogeneous",
                                                 "random_log_uniform", "from_file"};
const std::vector<std::string> kCapillaryNames = {"linearized", "lagged"};
const std::vector<std::string> kRetentionNames = {"lagged_explicit", "implicit_consistent"};
const std::vector<std::string> kMethodNames = {"iterative", "dense"};
const std::vector<std::string> kPrecondNames = {"jacobi", "ilu0", "banded_lu"};

SimulationConfig parse_document(const json& root, const std::string& origin) {
  ParseState st;
  SimulationConfig cfg;
  Reader r(&root, "", st);

  {
    Reader g = r.section("grid");
    cfg.nx = g.req_int("nx");
    cfg.ny = g.req_int("ny");
    cfg.lx = g.req_num("lx_m");
    cfg.ly = g.req_num("ly_m");
    g.check_unknown();
  }
  {
    Reader t = r.section("time");
    cfg.dt = t.req_num("dt_days") * units::day;
    const double pvi = t.opt_num("target_pvi", -1.0);
    const double end_days = t.opt_num("end_time_days", -1.0);
    if (pvi < 0.0 && end_days < 0.0) {
      st.missing.push_back("time.target_pvi (or time.end_time_days)");
    }
    cfg.target_pvi = std::max(pvi, 0.0);
    cfg.end_time = std::max(end_days, 0.0) * units::day;
    t.check_unknown();
  }
  {
    Reader f = r.section("rock_fluid");
    RockFluidParams& p = cfg.rock;
    p.s_wr = f.opt_num("s_wr", p.s_wr);
    p.s_nr = f.opt_num("s_nr", p.s_nr);
    p.a = f.opt_num("krw_exponent", p.a);
    p.b = f.opt_num("krn_exponent", p.b);
    p.krw0 = f.opt_num("krw0", p.krw0);
    p.krn0 = f.opt_num("krn0", p.krn0);
    p.mu_w = f.opt_unit("mu_w_cp", p.mu_w, units::centipoise);
    p.mu_n = f.opt_unit("mu_n_cp", p.mu_n, units::centipoise);
    p.b_c = f.opt_unit("bc_bar", p.b_c, units::bar);
    p.phi0 = f.opt_num("phi0", p.phi0);
    p.k_f = f.opt_num("k_f", p.k_f);
    p.damage_exp = f.opt_num("damage_exponent", p.damage_exp);
    p.gamma_f = f.opt_num("gamma_f", p.gamma_f);
    p.rho_w = f.opt_num("rho_w_kg_m3", p.rho_w);
    p.rho_n = f.opt_num("rho_n_kg_m3", p.rho_n);
    f.check_unknown();
  }
  {
    Reader np = r.section("nanoparticles");
    NanoparticleParams& p = cfg.nano;
    cfg.transport_enabled = np.opt_bool("enabled", cfg.transport_enabled);
    p.gamma_d = np.opt_num("gamma_d_per_m", p.gamma_d);
    p.gamma_pt = np.opt_num("gamma_pt_per_m", p.gamma_pt);
    p.gamma_e = np.opt_num("gamma_e_per_m", p.gamma_e);
    p.u_crit = np.opt_num("u_crit_m_s", p.u_crit);
    p.diffusivity = np.opt_num("diffusivity_m2_s", p.diffusivity);
    p.coupling = static_cast<RetentionCoupling>(
        np.opt_enum("retention_coupling", kRetentionNames,
                    static_cast<int>(p.coupling)));
    np.check_unknown();
  }
  {
    Reader pm = r.section("permeability");
    PermeabilityScenario& p = cfg.perm;
    p.kind = static_cast<PermeabilityScenario::Kind>(
        pm.opt_enum("scenario", kScenarioNames, static_cast<int>(p.kind)));
    p.uniform_value = pm.opt_unit("uniform_md", p.uniform_value, units::millidarcy);
    p.high_value = pm.opt_unit("high_md", p.high_value, units::millidarcy);
    p.low_value = pm.opt_unit("low_md", p.low_value, units::millidarcy);
    p.block_nx = pm.opt_int("block_nx", p.block_nx);
    p.block_ny = pm.opt_int("block_ny", p.block_ny);
    p.random_min = pm.opt_unit("random_min_md", p.random_min, units::millidarcy);
    p.random_max = pm.opt_unit("random_max_md", p.random_max, units::millidarcy);
    p.seed = pm.opt_u64("seed", p.seed);
    p.file_path = pm.opt_str("file", p.file_path);
    pm.check_unknown();
  }
  {
    Reader b = r.section("boundary");
    BoundaryConfig& p = cfg.boundary;
    p.injection_edge = static_cast<Edge>(
        b.opt_enum("injection_edge", kEdgeNames, static_cast<int>(p.injection_edge)));
    p.production_edge = static_cast<Edge>(
        b.opt_enum("production_edge", kEdgeNames, static_cast<int>(p.production_edge)));
    p.rate_pv_per_year = b.opt_num("rate_pv_per_year", p.rate_pv_per_year);
    p.production_pressure =
        b.opt_unit("production_pressure_bar", p.production_pressure, units::bar);
    p.inflow_saturation = b.opt_num("inflow_saturation", p.inflow_saturation);
    p.inflow_concentration = b.opt_num("inflow_concentration", p.inflow_concentration);
    b.check_unknown();
  }
  {
    Reader ic = r.section("initial");
    cfg.initial_water_saturation =
        ic.opt_num("water_saturation", cfg.initial_water_saturation);
    ic.check_unknown();
  }
  {
    Reader it = r.section("iteration");
    IterationControls& p = cfg.iteration;
    p.eps_s = it.opt_num("eps_s", p.eps_s);
    p.max_outer = it.opt_int("max_outer", p.max_outer);
    p.theta_min = it.opt_num("theta_min", p.theta_min);
    p.theta_max = it.opt_num("theta_max", p.theta_max);
    p.rho = it.opt_num("rho", p.rho);
    p.capillary = static_cast<CapillaryMode>(
        it.opt_enum("capillary_mode", kCapillaryNames, static_cast<int>(p.capillary)));
    it.check_unknown();
  }
  {
    Reader ls = r.section("linear_solver");
    LinearSolveControls& p = cfg.linear;
    p.rel_tol = ls.opt_num("rel_tol", p.rel_tol);
    p.abs_tol = ls.opt_num("abs_tol", p.abs_tol);
    p.max_iter = ls.opt_int("max_iter", p.max_iter);
    p.method = static_cast<LinearSolveControls::Method>(
        ls.opt_enum("method", kMethodNames, static_cast<int>(p.method)));
    p.precond = static_cast<LinearSolveControls::Precond>(
        ls.opt_enum("precond", kPrecondNames, static_cast<int>(p.precond)));
    ls.check_unknown();
  }
  {
    Reader g = r.section("gravity");
    cfg.gravity.enabled = g.opt_bool("enabled", cfg.gravity.enabled);
    cfg.gravity.gx = g.opt_num("gx_m_s2", cfg.gravity.gx);
    cfg.gravity.gy = g.opt_num("gy_m_s2", cfg.gravity.gy);
    g.check_unknown();
  }
  {
    Reader o = r.section("output");
    cfg.snapshot_every_pvi = o.opt_num("snapshot_every_pvi", cfg.snapshot_every_pvi);
    o.check_unknown();
  }
  r.check_unknown();

  if (!st.missing.empty() || !st.errors.empty()) {
    std::string msg = "config " + origin + ":";
    if (!st.missing.empty()) {
      msg += " missing required keys:";
      for (const auto& k : st.missing) msg += " " + k;
      if (!st.errors.empty()) msg += ";";
    }
    for (const auto& e : st.errors) msg += " " + e + ";";
    if (msg.back() == ';') msg.pop_back();
    throw ConfigError(msg);
  }

  cfg.validate();
  return cfg;
}

void line_col_at(const std::string& text, std::size_t byte, std::size_t& line,
                 std::size_t& col) {
  line = 1;
  col = 1;
  for (std::size_t i = 0; i + 1 < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
}

bool only_whitespace(const std::string& s) {
  return std::all_of(s.begin(), s.end(),
                     [](unsigned char c) { return std::isspace(c) != 0; });
}

}  // namespace

SimulationConfig parse_config_text(const std::string& text, const std::string& origin) {
  json root = json::object();
  if (!only_whitespace(text)) {
    try {
      // Final `true` enables // and /* */ comments in config files.
      root = json::parse(text, nullptr, true, true);
    } catch (const json::parse_error& e) {
      std::size_t line = 0, col = 0;
      line_col_at(text, e.byte, line, col);
      throw ConfigError("config parse error at " + origin + ":" + std::to_string(line) + ":" +
                        std::to_string(col) + ": " + e.what());
    }
    if (!root.is_object()) {
      throw ConfigError("config " + origin + ": top level must be an object");
    }
  }
  return parse_document(root, origin);
}

SimulationConfig parse_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), path.string());
}

std::string serialize_config(const SimulationConfig& cfg) {
  json j;
  j["grid"] = {{"nx", cfg.nx}, {"ny", cfg.ny}, {"lx_m", cfg.lx}, {"ly_m", cfg.ly}};
  j["time"] = {{"dt_days", cfg.dt / units::day},
               {"target_pvi", cfg.target_pvi},
               {"end_time_days", cfg.end_time / units::day}};
  const RockFluidParams& p = cfg.rock;
  j["rock_fluid"] = {{"s_wr", p.s_wr},
                     {"s_nr", p.s_nr},
                     {"krw_exponent", p.a},
                     {"krn_exponent", p.b},
                     {"krw0", p.krw0},
                     {"krn0", p.krn0},
                     {"mu_w_cp", p.mu_w / units::centipoise},
                     {"mu_n_cp", p.mu_n / units::centipoise},
                     {"bc_bar", p.b_c / units::bar},
                     {"phi0", p.phi0},
                     {"k_f", p.k_f},
                     {"damage_exponent", p.damage_exp},
                     {"gamma_f", p.gamma_f},
                     {"rho_w_kg_m3", p.rho_w},
                     {"rho_n_kg_m3", p.rho_n}};
  const NanoparticleParams& np = cfg.nano;
  j["nanoparticles"] = {
      {"enabled", cfg.transport_enabled},
      {"gamma_d_per_m", np.gamma_d},
      {"gamma_pt_per_m", np.gamma_pt},
      {"gamma_e_per_m", np.gamma_e},
      {"u_crit_m_s", np.u_crit},
      {"diffusivity_m2_s", np.diffusivity},
      {"retention_coupling", kRetentionNames[static_cast<std::size_t>(np.coupling)]}};
  const PermeabilityScenario& pm = cfg.perm;
  j["permeability"] = {{"scenario", kScenarioNames[static_cast<std::size_t>(pm.kind)]},
                       {"uniform_md", pm.uniform_value / units::millidarcy},
                       {"high_md", pm.high_value / units::millidarcy},
                       {"low_md", pm.low_value / units::millidarcy},
                       {"block_nx", pm.block_nx},
                       {"block_ny", pm.block_ny},
                       {"random_min_md", pm.random_min / units::millidarcy},
                       {"random_max_md", pm.random_max / units::millidarcy},
                       {"seed", pm.seed},
                       {"file", pm.file_path}};
  const BoundaryConfig& b = cfg.boundary;
  j["boundary"] = {
      {"injection_edge", kEdgeNames[static_cast<std::size_t>(b.injection_edge)]},
      {"production_edge", kEdgeNames[static_cast<std::size_t>(b.production_edge)]},
      {"rate_pv_per_year", b.rate_pv_per_year},
      {"production_pressure_bar", b.production_pressure / units::bar},
      {"inflow_saturation", b.inflow_saturation},
      {"inflow_concentration", b.inflow_concentration}};
  j["initial"] = {{"water_saturation", cfg.initial_water_saturation}};
  const IterationControls& it = cfg.iteration;
  j["iteration"] = {{"eps_s", it.eps_s},
                    {"max_outer", it.max_outer},
                    {"theta_min", it.theta_min},
                    {"theta_max", it.theta_max},
                    {"rho", it.rho},
                    {"capillary_mode", kCapillaryNames[static_cast<std::size_t>(it.capillary)]}};
  const LinearSolveControls& ls = cfg.linear;
  j["linear_solver"] = {{"rel_tol", ls.rel_tol},
                        {"abs_tol", ls.abs_tol},
                        {"max_iter", ls.max_iter},
                        {"method", kMethodNames[static_cast<int>(ls.method)]},
                        {"precond", kPrecondNames[static_cast<int>(ls.precond)]}};
  j["gravity"] = {{"enabled", cfg.gravity.enabled},
                  {"gx_m_s2", cfg.gravity.gx},
                  {"gy_m_s2", cfg.gravity.gy}};
  j["output"] = {{"snapshot_every_pvi", cfg.snapshot_every_pvi}};
  return j.dump(2);
}

}  // namespace nanoflood
