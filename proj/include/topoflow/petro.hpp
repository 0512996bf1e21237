#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "topoflow/core.hpp"
#include "topoflow/mesh.hpp"

namespace topoflow {

// Per-cell static rock data. Permeability is a diagonal tensor; porosity
// responds linearly to pressure about p_ref.
struct RockProperties {
  std::vector<double> poro_ref;
  std::vector<Vec3> perm;
  double rock_compr = 0.0;
  double p_ref = 0.0;

  static RockProperties uniform(int n_cells, double poro, double k, double c_r = 0.0,
                                double p_ref_ = 0.0) {
    RockProperties r;
    r.poro_ref.assign(n_cells, poro);
    r.perm.assign(n_cells, Vec3{k, k, k});
    r.rock_compr = c_r;
    r.p_ref = p_ref_;
    return r;
  }

  double porosity(int cell, double p) const {
    return poro_ref[cell] * (1.0 + rock_compr * (p - p_ref));
  }
  double dporosity_dp(int cell) const { return poro_ref[cell] * rock_compr; }
  double pore_volume(const PolyMesh& m, int cell, double p) const {
    return porosity(cell, p) * m.cells[cell].volume;
  }
};

struct RelPerm {
  double krw = 0.0, kro = 0.0;
  double dkrw = 0.0, dkro = 0.0;
};

struct Mobilities {
  double lw = 0.0, lo = 0.0;      // [1/(Pa.s)]
  double dlw_ds = 0.0, dlo_ds = 0.0;
  double dlw_dp = 0.0, dlo_dp = 0.0;
};

struct FracFlow {
  double fw = 0.0, fo = 0.0;
  double dfw_ds = 0.0;
  double dfw_dp = 0.0;
};

struct PcEntry {
  double sw = 0.0;
  double pc = 0.0;  // [Pa]
};

// Two-phase water/oil fluid description: Corey relative permeabilities with
// residual saturations, linearized shrinkage factors b(p) = b_ref(1+c(p-p_ref)),
// optional linear viscosity pressure dependence, and an optional monotone
// piecewise-linear capillary pressure table P_cow(S_w) with p_w = p_o - P_cow.
struct FluidModel {
  struct Phase {
    double mu_ref = 1.0e-3;   // [Pa.s]
    double visc_compr = 0.0;  // [1/Pa]
    double b_ref = 1.0;
    double compr = 0.0;       // [1/Pa]
    double rho_surf = 1000.0; // [kg/m^3]
  };
  Phase water;
  Phase oil;
  double p_ref = 0.0;
  double swr = 0.0;
  double sor = 0.0;
  double nw = 2.0;
  double no = 2.0;
  std::vector<PcEntry> pc_table;  // empty: capillary off
  double domain_eps = 1.0e-4;     // admissible overshoot outside [0,1]
  double gravity = 0.0;           // [m/s^2]; acts along -z (3D) or -y (2D)

  bool has_capillary() const { return !pc_table.empty(); }

  void check_domain(double sw) const {
    if (!(sw >= -domain_eps && sw <= 1.0 + domain_eps))
      throw std::domain_error("saturation " + std::to_string(sw) + " outside [-eps, 1+eps]");
  }

  // Corey curves, clamped to [0,1] with flat extension outside the mobile
  // window. Throws for saturations beyond the admissible overshoot.
  RelPerm relperm(double sw) const {
    check_domain(sw);
    return relperm_clamped(sw);
  }

  // Same curves with the input clamped to [0,1]; safe for solver iterates.
  RelPerm relperm_clamped(double sw) const {
    const double s = std::clamp(sw, 0.0, 1.0);
    const double width = 1.0 - swr - sor;
    RelPerm r;
    if (width <= 0.0) throw ConfigError("relperm: residual saturations leave no mobile window");
    const double se = (s - swr) / width;
    if (se <= 0.0) {
      r.krw = 0.0;
    } else if (se >= 1.0) {
      r.krw = 1.0;
    } else {
      r.krw = std::pow(se, nw);
      r.dkrw = nw * std::pow(se, nw - 1.0) / width;
    }
    const double soe = (1.0 - s - sor) / width;
    if (soe <= 0.0) {
      r.kro = 0.0;
    } else if (soe >= 1.0) {
      r.kro = 1.0;
    } else {
      r.kro = std::pow(soe, no);
      r.dkro = -no * std::pow(soe, no - 1.0) / width;
    }
    return r;
  }

  double b_w(double p) const { return water.b_ref * (1.0 + water.compr * (p - p_ref)); }
  double b_o(double p) const { return oil.b_ref * (1.0 + oil.compr * (p - p_ref)); }
  double db_w_dp() const { return water.b_ref * water.compr; }
  double db_o_dp() const { return oil.b_ref * oil.compr; }

  double rho_w(double p) const { return water.rho_surf * b_w(p); }
  double rho_o(double p) const { return oil.rho_surf * b_o(p); }
  double drho_w_dp() const { return water.rho_surf * db_w_dp(); }
  double drho_o_dp() const { return oil.rho_surf * db_o_dp(); }

  double mu_w(double p) const { return water.mu_ref * (1.0 + water.visc_compr * (p - p_ref)); }
  double mu_o(double p) const { return oil.mu_ref * (1.0 + oil.visc_compr * (p - p_ref)); }
  double dmu_w_dp() const { return water.mu_ref * water.visc_compr; }
  double dmu_o_dp() const { return oil.mu_ref * oil.visc_compr; }

  Mobilities mobility(double sw, double p) const {
    const RelPerm r = relperm(sw);
    return mobility_from(r, p);
  }

  Mobilities mobility_clamped(double sw, double p) const {
    const RelPerm r = relperm_clamped(sw);
    return mobility_from(r, p);
  }

  Mobilities mobility_from(const RelPerm& r, double p) const {
    Mobilities m;
    const double muw = mu_w(p), muo = mu_o(p);
    if (!(muw > 0.0) || !(muo > 0.0)) throw ConfigError("viscosity must stay positive");
    m.lw = r.krw / muw;
    m.lo = r.kro / muo;
    m.dlw_ds = r.dkrw / muw;
    m.dlo_ds = r.dkro / muo;
    m.dlw_dp = -r.krw * dmu_w_dp() / (muw * muw);
    m.dlo_dp = -r.kro * dmu_o_dp() / (muo * muo);
    return m;
  }

  // Water fractional flow f_w = lw/(lw+lo); f_o is the exact complement.
  // Throws when both phases are immobile.
  FracFlow frac_flow(double sw, double p) const {
    const Mobilities m = mobility(sw, p);
    const double lt = m.lw + m.lo;
    if (!(lt > 0.0))
      throw std::domain_error("fractional flow undefined: both phases immobile at sw = " +
                              std::to_string(sw));
    FracFlow f;
    f.fw = m.lw / lt;
    f.fo = 1.0 - f.fw;
    f.dfw_ds = (m.dlw_ds * m.lo - m.lw * m.dlo_ds) / (lt * lt);
    f.dfw_dp = (m.dlw_dp * m.lo - m.lw * m.dlo_dp) / (lt * lt);
    return f;
  }

  // P_cow(S_w) by linear interpolation in the table, flat outside it.
  // Returns {0,0} when capillary is off.
  std::pair<double, double> pc(double sw) const {
    if (pc_table.empty()) return {0.0, 0.0};
    if (sw <= pc_table.front().sw) return {pc_table.front().pc, 0.0};
    if (sw >= pc_table.back().sw) return {pc_table.back().pc, 0.0};
    const auto hi = std::upper_bound(
        pc_table.begin(), pc_table.end(), sw,
        [](double s, const PcEntry& e) { return s < e.sw; });
    const auto lo = hi - 1;
    const double slope = (hi->pc - lo->pc) / (hi->sw - lo->sw);
    return {lo->pc + slope * (sw - lo->sw), slope};
  }

  void validate() const {
    if (swr < 0.0 || sor < 0.0 || swr + sor >= 1.0)
      throw ConfigError("fluid: residual saturations must be >= 0 with swr + sor < 1");
    if (nw < 1.0 || no < 1.0) throw ConfigError("fluid: Corey exponents must be >= 1");
    if (!(water.mu_ref > 0.0) || !(oil.mu_ref > 0.0))
      throw ConfigError("fluid: reference viscosities must be > 0");
    if (!(water.b_ref > 0.0) || !(oil.b_ref > 0.0))
      throw ConfigError("fluid: reference shrinkage factors must be > 0");
    if (water.compr < 0.0 || oil.compr < 0.0)
      throw ConfigError("fluid: compressibilities must be >= 0");
    if (gravity < 0.0) throw ConfigError("fluid: gravity must be >= 0");
    for (std::size_t i = 0; i + 1 < pc_table.size(); ++i) {
      if (!(pc_table[i + 1].sw > pc_table[i].sw))
        throw ConfigError("fluid: capillary table saturations must increase strictly");
      if (pc_table[i + 1].pc > pc_table[i].pc)
        throw ConfigError("fluid: capillary pressure must be non-increasing in S_w");
    }
  }

  // Direction of gravity as a unit vector; the vertical coordinate is z in
  // 3D and y in 2D.
  Vec3 gravity_vector(int dim) const {
    if (gravity == 0.0) return {0.0, 0.0, 0.0};
    return (dim == 2) ? Vec3{0.0, -gravity, 0.0} : Vec3{0.0, 0.0, -gravity};
  }
};

// Volume-balance weighting factors that eliminate saturations from the
// weighted sum of the phase conservation equations: one part water plus one
// part oil measured in reservoir volumes, i.e. (1/b_w, 1/b_o).
inline std::pair<double, double> weighting_factors(const FluidModel& fluid, double p) {
  const double bw = fluid.b_w(p), bo = fluid.b_o(p);
  if (!(bw > 0.0) || !(bo > 0.0))
    throw std::domain_error("shrinkage factor non-positive at p = " + std::to_string(p));
  return {1.0 / bw, 1.0 / bo};
}

}  // namespace topoflow
