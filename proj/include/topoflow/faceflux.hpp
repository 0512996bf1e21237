#pragma once

#include "topoflow/core.hpp"
#include "topoflow/petro.hpp"

namespace topoflow {

// Explicit two-phase upwind assignment for a face with signed total flux v
// (from side i to side j) and buoyancy/capillary drive G acting on water in
// the same direction. Returns, per phase, whether side i is upstream. The
// assignment is the consistent one: each phase's upwind side matches the sign
// of its own resulting flux, with ties (zero flux) assigned to side j.
//
// Derivation sketch for G >= 0 (water pulled i -> j relative to oil):
//   v_w = f_w (v + lambda_o G), v_o = f_o (v - lambda_w G).
//   v > 0 forces water from i; oil then flows from i iff v > lambda_w(s_i) G.
//   v <= 0 forces oil from j; water then flows from i iff v + lambda_o(s_j) G > 0.
// G < 0 mirrors the roles.
struct PhaseUpwind {
  bool water_from_i = false;
  bool oil_from_i = false;
};

inline PhaseUpwind phase_upwind(double v, double G, double lw_i, double lw_j, double lo_i,
                                double lo_j) {
  PhaseUpwind u;
  if (G >= 0.0) {
    if (v > 0.0) {
      u.water_from_i = true;
      u.oil_from_i = v - lw_i * G > 0.0;
    } else {
      u.oil_from_i = false;
      u.water_from_i = v + lo_j * G > 0.0;
    }
  } else {
    if (v > 0.0) {
      u.oil_from_i = true;
      u.water_from_i = v + lo_i * G > 0.0;
    } else {
      u.water_from_i = false;
      u.oil_from_i = v - lw_j * G > 0.0;
    }
  }
  return u;
}

// Water and oil fluxes through one face quadrature location, with analytic
// derivatives of the water flux w.r.t. the two side saturations. All drives
// share the caller's scale (totals for a single-point face, per-area
// otherwise). The capillary drive -cpc (Pc(s_i) - Pc(s_j)) joins the gravity
// drive; both phases immobile short-circuits to zero flux. The water flux is
// reported in surface volumes (upstream b_w applied); the oil flux is a
// reservoir-volume value used for flow-direction thresholds only.
struct WaterFaceFlux {
  double water = 0.0;
  double dwater_dsi = 0.0;
  double dwater_dsj = 0.0;
  double oil = 0.0;
  PhaseUpwind up;
};

inline WaterFaceFlux water_face_flux(const FluidModel& fluid, double v, double g_drive,
                                     double cpc, double si, double sj, double pi, double pj) {
  WaterFaceFlux r;
  const Mobilities mi = fluid.mobility_clamped(si, pi);
  const Mobilities mj = fluid.mobility_clamped(sj, pj);

  double G = g_drive;
  double dG_dsi = 0.0, dG_dsj = 0.0;
  if (cpc != 0.0 && fluid.has_capillary()) {
    const auto [pci, dpci] = fluid.pc(si);
    const auto [pcj, dpcj] = fluid.pc(sj);
    G -= cpc * (pci - pcj);
    dG_dsi = -cpc * dpci;
    dG_dsj = cpc * dpcj;
  }

  r.up = phase_upwind(v, G, mi.lw, mj.lw, mi.lo, mj.lo);
  const double lw = r.up.water_from_i ? mi.lw : mj.lw;
  const double dlw = r.up.water_from_i ? mi.dlw_ds : mj.dlw_ds;
  const double lo = r.up.oil_from_i ? mi.lo : mj.lo;
  const double dlo = r.up.oil_from_i ? mi.dlo_ds : mj.dlo_ds;
  const double lt = lw + lo;
  if (!(lt > 0.0)) return r;

  const double fw = lw / lt;
  const double bw = fluid.b_w(r.up.water_from_i ? pi : pj);
  const double drive = v + lo * G;
  r.water = bw * fw * drive;
  r.oil = (lo / lt) * (v - lw * G);

  // d(fw)/dlw = lo/lt^2, d(fw)/dlo = -lw/lt^2; upwind branches are frozen.
  const double dfw_dlw = lo / (lt * lt);
  const double dfw_dlo = -lw / (lt * lt);
  double dfw_dsi = 0.0, dfw_dsj = 0.0;
  double ddrive_dsi = lo * dG_dsi, ddrive_dsj = lo * dG_dsj;
  if (r.up.water_from_i)
    dfw_dsi += dfw_dlw * dlw;
  else
    dfw_dsj += dfw_dlw * dlw;
  if (r.up.oil_from_i) {
    dfw_dsi += dfw_dlo * dlo;
    ddrive_dsi += dlo * G;
  } else {
    dfw_dsj += dfw_dlo * dlo;
    ddrive_dsj += dlo * G;
  }
  r.dwater_dsi = bw * (dfw_dsi * drive + fw * ddrive_dsi);
  r.dwater_dsj = bw * (dfw_dsj * drive + fw * ddrive_dsj);
  return r;
}

}  // namespace topoflow
