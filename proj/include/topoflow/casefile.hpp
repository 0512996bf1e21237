#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "topoflow/core.hpp"
#include "topoflow/driver.hpp"

namespace topoflow {

namespace detail {

struct IniEntry {
  std::string key, value;
  int line = 0;
  bool used = false;
};

struct IniSection {
  std::string name;
  int line = 0;
  std::vector<IniEntry> entries;
};

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

// Flat INI: [section] headers, key = value pairs, '#' or ';' comments.
// Duplicate keys within one section are rejected.
inline std::vector<IniSection> parse_ini(std::istream& in, const std::string& label) {
  std::vector<IniSection> sections;
  std::string raw;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    const auto cut = raw.find_first_of("#;");
    std::string line = trim(cut == std::string::npos ? raw : raw.substr(0, cut));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError(label + ":" + std::to_string(lineno) + ": malformed section header");
      sections.push_back({trim(line.substr(1, line.size() - 2)), lineno, {}});
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(label + ":" + std::to_string(lineno) + ": expected key = value");
    if (sections.empty())
      throw ConfigError(label + ":" + std::to_string(lineno) + ": key before any [section]");
    IniEntry e{trim(line.substr(0, eq)), trim(line.substr(eq + 1)), lineno, false};
    if (e.key.empty() || e.value.empty())
      throw ConfigError(label + ":" + std::to_string(lineno) + ": empty key or value");
    for (const IniEntry& prev : sections.back().entries)
      if (prev.key == e.key)
        throw ConfigError(label + ":" + std::to_string(lineno) + ": duplicate key '" + e.key +
                          "' in [" + sections.back().name + "]");
    sections.back().entries.push_back(std::move(e));
  }
  return sections;
}

inline double to_double(const std::string& v, const std::string& where) {
  char* end = nullptr;
  const double x = std::strtod(v.c_str(), &end);
  if (end == v.c_str() || *end != '\0')
    throw ConfigError(where + ": '" + v + "' is not a number");
  return x;
}

inline int to_int(const std::string& v, const std::string& where) {
  char* end = nullptr;
  const long x = std::strtol(v.c_str(), &end, 10);
  if (end == v.c_str() || *end != '\0')
    throw ConfigError(where + ": '" + v + "' is not an integer");
  return static_cast<int>(x);
}

inline bool to_bool(const std::string& v, const std::string& where) {
  if (v == "on" || v == "true" || v == "1") return true;
  if (v == "off" || v == "false" || v == "0") return false;
  throw ConfigError(where + ": '" + v + "' is not on/off");
}

inline std::vector<std::string> split_ws(const std::string& v) {
  std::vector<std::string> out;
  std::istringstream ss(v);
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

// Accessor that marks entries used so leftovers can be reported as errors.
class SectionView {
 public:
  SectionView(IniSection* sec, std::string label) : sec_(sec), label_(std::move(label)) {}

  bool present() const { return sec_ != nullptr; }

  std::optional<std::string> get(const std::string& key) const {
    if (!sec_) return std::nullopt;
    for (IniEntry& e : sec_->entries)
      if (e.key == key) {
        e.used = true;
        return e.value;
      }
    return std::nullopt;
  }
  std::string require(const std::string& key) const {
    auto v = get(key);
    if (!v)
      throw ConfigError(label_ + ": missing required key '" + key + "' in [" +
                        (sec_ ? sec_->name : "?") + "]");
    return *v;
  }
  std::string where(const std::string& key) const {
    return label_ + ": [" + (sec_ ? sec_->name : "?") + "] " + key;
  }

  double number(const std::string& key, double fallback) const {
    auto v = get(key);
    return v ? to_double(*v, where(key)) : fallback;
  }
  double number(const std::string& key) const { return to_double(require(key), where(key)); }
  int integer(const std::string& key, int fallback) const {
    auto v = get(key);
    return v ? to_int(*v, where(key)) : fallback;
  }
  bool flag(const std::string& key, bool fallback) const {
    auto v = get(key);
    return v ? to_bool(*v, where(key)) : fallback;
  }

 private:
  IniSection* sec_;
  std::string label_;
};

// One value per line (optionally several whitespace/comma-separated columns);
// '#' comments allowed.
inline std::vector<std::vector<double>> load_columns(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open data file " + path.string());
  std::vector<std::vector<double>> rows;
  std::string raw;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    const auto cut = raw.find('#');
    std::string line = trim(cut == std::string::npos ? raw : raw.substr(0, cut));
    if (line.empty()) continue;
    for (char& ch : line)
      if (ch == ',') ch = ' ';
    std::vector<double> row;
    for (const std::string& tok : split_ws(line))
      row.push_back(to_double(tok, path.string() + ":" + std::to_string(lineno)));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline std::vector<double> load_scalar_file(const std::filesystem::path& path, int n,
                                            const std::string& what) {
  const auto rows = load_columns(path);
  if (static_cast<int>(rows.size()) != n)
    throw ConfigError(path.string() + ": expected " + std::to_string(n) + " " + what +
                      " values, got " + std::to_string(rows.size()));
  std::vector<double> out(n);
  for (int i = 0; i < n; ++i) {
    if (rows[i].size() != 1)
      throw ConfigError(path.string() + ": expected one value per line for " + what);
    out[i] = rows[i][0];
  }
  return out;
}

}  // namespace detail

// Parses a declarative case file into a ready-to-run SimCase. Units are SI
// except pressure [bar] and viscosity [cP]. Every key must be recognized;
// unknown keys or sections are hard errors naming the location.
inline SimCase load_case(const std::string& case_path) {
  namespace fs = std::filesystem;
  using detail::SectionView;

  std::ifstream in(case_path);
  if (!in) throw ConfigError("cannot open case file " + case_path);
  std::vector<detail::IniSection> sections = detail::parse_ini(in, case_path);
  const fs::path base = fs::path(case_path).parent_path();
  const auto resolve = [&](const std::string& p) {
    fs::path fp(p);
    return fp.is_absolute() ? fp : base / fp;
  };

  const auto view = [&](const char* name) -> SectionView {
    for (detail::IniSection& s : sections)
      if (s.name == name) return SectionView(&s, case_path);
    return SectionView(nullptr, case_path);
  };
  static const char* known[] = {"mesh", "rock", "fluid", "wells", "schedule", "solver", "init"};
  for (const detail::IniSection& s : sections) {
    bool ok = false;
    for (const char* k : known) ok |= s.name == k;
    if (!ok)
      throw ConfigError(case_path + ":" + std::to_string(s.line) + ": unknown section [" +
                        s.name + "]");
  }

  SimCase cs;

  // --- mesh ---
  SectionView mesh = view("mesh");
  if (!mesh.present()) throw ConfigError(case_path + ": missing [mesh] section");
  const std::string mtype = mesh.require("type");
  int nx = 0, ny = 0, nz = 0;
  if (mtype == "cartesian2d") {
    nx = mesh.integer("nx", 0);
    ny = mesh.integer("ny", 0);
    if (nx < 1 || ny < 1) throw ConfigError(mesh.where("nx") + ": cartesian2d needs nx, ny >= 1");
    cs.mesh = build_cartesian_2d(nx, ny, mesh.number("lx"), mesh.number("ly"));
  } else if (mtype == "cartesian3d") {
    nx = mesh.integer("nx", 0);
    ny = mesh.integer("ny", 0);
    nz = mesh.integer("nz", 0);
    if (nx < 1 || ny < 1 || nz < 1)
      throw ConfigError(mesh.where("nx") + ": cartesian3d needs nx, ny, nz >= 1");
    cs.mesh = build_cartesian(nx, ny, nz, mesh.number("lx"), mesh.number("ly"),
                              mesh.number("lz"));
  } else if (mtype == "file") {
    const fs::path mp = resolve(mesh.require("path"));
    if (!fs::exists(mp)) throw ConfigError("mesh file not found: " + mp.string());
    cs.mesh = load_mesh(mp.string());
  } else {
    throw ConfigError(mesh.where("type") + ": expected cartesian2d, cartesian3d or file");
  }
  const int n = cs.mesh.n_cells();

  // --- fluid (before rock: rock p_ref defaults to the fluid's) ---
  SectionView fl = view("fluid");
  if (!fl.present()) throw ConfigError(case_path + ": missing [fluid] section");
  cs.fluid.p_ref = fl.number("p_ref") * bar;
  cs.fluid.water.mu_ref = fl.number("mu_w") * centipoise;
  cs.fluid.oil.mu_ref = fl.number("mu_o") * centipoise;
  cs.fluid.water.compr = fl.number("c_w", 0.0);
  cs.fluid.oil.compr = fl.number("c_o", 0.0);
  cs.fluid.water.visc_compr = fl.number("visc_compr_w", 0.0);
  cs.fluid.oil.visc_compr = fl.number("visc_compr_o", 0.0);
  cs.fluid.water.rho_surf = fl.number("rho_w", 1000.0);
  cs.fluid.oil.rho_surf = fl.number("rho_o", 800.0);
  cs.fluid.water.b_ref = fl.number("b_w_ref", 1.0);
  cs.fluid.oil.b_ref = fl.number("b_o_ref", 1.0);
  cs.fluid.swr = fl.number("swr", 0.0);
  cs.fluid.sor = fl.number("sor", 0.0);
  cs.fluid.nw = fl.number("nw", 2.0);
  cs.fluid.no = fl.number("no", 2.0);
  cs.fluid.gravity = fl.number("gravity", 0.0);
  if (auto pc = fl.get("pc")) {
    for (const std::string& tok : detail::split_ws(*pc)) {
      const auto colon = tok.find(':');
      if (colon == std::string::npos)
        throw ConfigError(fl.where("pc") + ": expected sw:pc_bar pairs");
      PcEntry e;
      e.sw = detail::to_double(tok.substr(0, colon), fl.where("pc"));
      e.pc = detail::to_double(tok.substr(colon + 1), fl.where("pc")) * bar;
      cs.fluid.pc_table.push_back(e);
    }
  }
  cs.fluid.validate();

  // --- rock ---
  SectionView rock = view("rock");
  if (!rock.present()) throw ConfigError(case_path + ": missing [rock] section");
  cs.rock.rock_compr = rock.number("rock_compr", 0.0);
  cs.rock.p_ref = rock.number("p_ref", cs.fluid.p_ref / bar) * bar;
  if (auto pf = rock.get("poro_file")) {
    cs.rock.poro_ref = detail::load_scalar_file(resolve(*pf), n, "porosity");
  } else {
    cs.rock.poro_ref.assign(n, rock.number("poro"));
  }
  for (double phi : cs.rock.poro_ref)
    if (!(phi > 0.0) || phi > 1.0)
      throw ConfigError(rock.where("poro") + ": porosity must lie in (0, 1]");
  if (auto pf = rock.get("perm_file")) {
    const auto rows = detail::load_columns(resolve(*pf));
    if (static_cast<int>(rows.size()) != n)
      throw ConfigError(resolve(*pf).string() + ": expected " + std::to_string(n) +
                        " permeability rows");
    cs.rock.perm.resize(n);
    for (int c = 0; c < n; ++c) {
      if (rows[c].size() == 1)
        cs.rock.perm[c] = {rows[c][0], rows[c][0], rows[c][0]};
      else if (rows[c].size() == 3)
        cs.rock.perm[c] = {rows[c][0], rows[c][1], rows[c][2]};
      else
        throw ConfigError(resolve(*pf).string() + ": permeability rows need 1 or 3 columns");
    }
  } else {
    const auto toks = detail::split_ws(rock.require("perm"));
    Vec3 k;
    if (toks.size() == 1) {
      k[0] = k[1] = k[2] = detail::to_double(toks[0], rock.where("perm"));
    } else if (toks.size() == 3) {
      for (int a = 0; a < 3; ++a) k[a] = detail::to_double(toks[a], rock.where("perm"));
    } else {
      throw ConfigError(rock.where("perm") + ": expected 1 or 3 values");
    }
    cs.rock.perm.assign(n, k);
  }
  for (const Vec3& k : cs.rock.perm)
    if (!(k[0] > 0.0) || !(k[1] > 0.0) || !(k[2] > 0.0))
      throw ConfigError(rock.where("perm") + ": permeability must be positive");

  // --- wells ---
  SectionView wells = view("wells");
  if (wells.present()) {
    for (int wi = 1;; ++wi) {
      const auto spec = wells.get("well" + std::to_string(wi));
      if (!spec) break;
      const std::string where = wells.where("well" + std::to_string(wi));
      const auto toks = detail::split_ws(*spec);
      std::size_t pos = 0;
      const auto next = [&]() -> const std::string& {
        if (pos >= toks.size()) throw ConfigError(where + ": truncated well description");
        return toks[pos++];
      };
      WellSpec w;
      w.name = next();
      const std::string ctrl = next();
      if (ctrl == "bhp") {
        w.control = WellControl::bhp;
        w.target = detail::to_double(next(), where) * bar;
      } else if (ctrl == "rate") {
        w.control = WellControl::rate;
        w.target = detail::to_double(next(), where);
      } else {
        throw ConfigError(where + ": control must be bhp or rate, got '" + ctrl + "'");
      }
      WellCompletion comp;
      double wi_override = -1.0;
      while (pos < toks.size()) {
        const std::string kw = next();
        if (kw == "water") {
          w.water_fraction = detail::to_double(next(), where);
        } else if (kw == "cell") {
          if (nx == 0) throw ConfigError(where + ": 'cell i j k' needs a cartesian mesh");
          const int i = detail::to_int(next(), where);
          const int j = detail::to_int(next(), where);
          const int k = cs.mesh.dim == 3 ? detail::to_int(next(), where) : 1;
          const int nzz = cs.mesh.dim == 3 ? nz : 1;
          if (i < 1 || i > nx || j < 1 || j > ny || k < 1 || k > nzz)
            throw ConfigError(where + ": completion i j k outside the grid");
          comp.cell = (i - 1) + nx * ((j - 1) + static_cast<long>(ny) * (k - 1));
        } else if (kw == "cellid") {
          comp.cell = detail::to_int(next(), where);
          if (comp.cell < 0 || comp.cell >= n)
            throw ConfigError(where + ": cellid outside 0.." + std::to_string(n - 1));
        } else if (kw == "wi") {
          wi_override = detail::to_double(next(), where);
        } else {
          throw ConfigError(where + ": unknown token '" + kw + "'");
        }
      }
      if (comp.cell < 0) throw ConfigError(where + ": no completion (use cell or cellid)");
      if (w.water_fraction < 0.0 || w.water_fraction > 1.0)
        throw ConfigError(where + ": water fraction must lie in [0, 1]");
      if (wi_override > 0.0) {
        comp.wi = wi_override;
      } else if (nx > 0) {
        const Vec3 widths = cs.mesh.cell_box_widths(comp.cell);
        const Vec3& k = cs.rock.perm[comp.cell];
        const double dz = cs.mesh.dim == 3 ? widths[2] : 1.0;
        comp.wi = peaceman_wi(k[0], k[1], widths[0], widths[1], dz);
      } else {
        throw ConfigError(where + ": unstructured meshes need an explicit wi");
      }
      w.completions.push_back(comp);
      cs.wells.push_back(std::move(w));
    }
  }

  // --- schedule ---
  SectionView sch = view("schedule");
  if (!sch.present()) throw ConfigError(case_path + ": missing [schedule] section");
  if (auto rt = sch.get("report_times")) {
    for (const std::string& tok : detail::split_ws(*rt))
      cs.schedule.report_times.push_back(detail::to_double(tok, sch.where("report_times")));
  } else {
    const double t_end = sch.number("t_end");
    const int n_rep = sch.integer("n_reports", 1);
    if (n_rep < 1) throw ConfigError(sch.where("n_reports") + ": need at least 1");
    for (int i = 1; i <= n_rep; ++i)
      cs.schedule.report_times.push_back(t_end * i / n_rep);
  }
  cs.schedule.dt_init = sch.number("dt_init", cs.schedule.dt_init);
  cs.schedule.dt_min = sch.number("dt_min", cs.schedule.dt_min);
  cs.schedule.dt_max = sch.number("dt_max", cs.schedule.dt_max);
  cs.schedule.growth = sch.number("growth", cs.schedule.growth);
  cs.schedule.cut = sch.number("cut", cs.schedule.cut);
  cs.schedule.validate();

  // --- solver ---
  SectionView sol = view("solver");
  cs.degree = sol.integer("degree", 0);
  if (cs.degree != 0 && cs.degree != 1)
    throw ConfigError(sol.where("degree") + ": degree must be 0 or 1");
  if (auto mode = sol.get("mode")) {
    if (*mode == "reordered")
      cs.mode = SolveMode::reordered;
    else if (*mode == "global")
      cs.mode = SolveMode::global;
    else if (*mode == "compare")
      cs.mode = SolveMode::compare;
    else
      throw ConfigError(sol.where("mode") + ": expected reordered, global or compare");
  }
  cs.block_size = sol.integer("block_size", 1);
  cs.threads = sol.integer("threads", 1);
  if (cs.threads < 1) throw ConfigError(sol.where("threads") + ": need >= 1");
  cs.transport.tol = sol.number("tol_t", cs.transport.tol);
  cs.transport.max_newton = sol.integer("max_newton", cs.transport.max_newton);
  cs.transport.max_sweeps = sol.integer("max_sweeps", cs.transport.max_sweeps);
  cs.transport.ds_mean_cap = sol.number("ds_cap", cs.transport.ds_mean_cap);
  cs.transport.jump_tol = sol.number("jump_tol", cs.transport.jump_tol);
  cs.transport.range_eps = sol.number("range_eps", cs.transport.range_eps);
  cs.transport.order_reduction = sol.flag("order_reduction", cs.transport.order_reduction);
  cs.pressure.tol = sol.number("pressure_tol", cs.pressure.tol);
  cs.pressure.max_iters = sol.integer("pressure_max_newton", cs.pressure.max_iters);
  if (!(cs.transport.tol > 0.0) || !(cs.pressure.tol > 0.0))
    throw ConfigError(sol.where("tol_t") + ": tolerances must be positive");
  if (cs.degree == 1 && cs.fluid.has_capillary())
    throw ConfigError(sol.where("degree") + ": capillary pressure requires degree 0");

  // --- init ---
  SectionView init = view("init");
  if (!init.present()) throw ConfigError(case_path + ": missing [init] section");
  if (auto pf = init.get("p_file")) {
    cs.p0 = detail::load_scalar_file(resolve(*pf), n, "pressure");
    for (double& x : cs.p0) x *= bar;
  } else {
    cs.p0.assign(n, init.number("p") * bar);
  }
  if (auto sf = init.get("sw_file")) {
    cs.sw0 = detail::load_scalar_file(resolve(*sf), n, "saturation");
  } else {
    cs.sw0.assign(n, init.number("sw"));
  }

  // Reject anything not consumed: typos must not pass silently.
  for (const detail::IniSection& s : sections)
    for (const detail::IniEntry& e : s.entries)
      if (!e.used)
        throw ConfigError(case_path + ":" + std::to_string(e.line) + ": unknown key '" + e.key +
                          "' in [" + s.name + "]");
  return cs;
}

}  // namespace topoflow
