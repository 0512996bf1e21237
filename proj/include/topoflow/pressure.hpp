#pragma once

#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <cmath>
#include <string>
#include <vector>

#include "topoflow/core.hpp"
#include "topoflow/mesh.hpp"
#include "topoflow/petro.hpp"

namespace topoflow {

struct WellCompletion {
  int cell = -1;
  double wi = 0.0;  // well index [m^3]
};

enum class WellControl { bhp, rate };

// target: [Pa] under BHP control, reservoir-volume rate [m^3/s] under rate
// control (positive injects). water_fraction is the injected stream
// composition; produced composition follows the completion cell.
struct WellSpec {
  std::string name;
  WellControl control = WellControl::rate;
  double target = 0.0;
  double water_fraction = 1.0;
  std::vector<WellCompletion> completions;
};

// Peaceman index for a vertical well through a full Cartesian cell of plan
// dimensions dx, dy and height dz.
inline double peaceman_wi(double kx, double ky, double dx, double dy, double dz,
                          double r_well = 0.1, double skin = 0.0) {
  const double a = std::sqrt(ky / kx), b = std::sqrt(kx / ky);
  const double r_eq = 0.28 * std::sqrt(a * dx * dx + b * dy * dy) / (std::sqrt(a) + std::sqrt(b));
  const double denom = std::log(r_eq / r_well) + skin;
  if (!(denom > 0.0)) throw ConfigError("well index: equivalent radius too close to r_well");
  return 2.0 * M_PI * std::sqrt(kx * ky) * dz / denom;
}

// Converged per-well quantities. Completion rates are reservoir volumes,
// positive into the reservoir. The phase split is the one the pressure
// equation used (frozen saturations).
struct WellState {
  double bhp = 0.0;
  std::vector<double> q_total;
  std::vector<double> q_w;
  std::vector<double> q_o;
  double rate_w() const { double s = 0.0; for (double q : q_w) s += q; return s; }
  double rate_o() const { double s = 0.0; for (double q : q_o) s += q; return s; }
};

// Per-face ingredients the transport step consumes: total volumetric flux v
// (owner to neighbor), the gravity drive g = T (rho_w - rho_o) g_z dz, and
// the transmissibility (for the capillary drive, which depends on the
// transport unknowns). Boundary faces hold zeros.
struct FluxField {
  std::vector<double> v;
  std::vector<double> g;
  std::vector<double> trans;
  std::vector<double> dz;  // vertical drop owner to neighbor
};

struct PressureOptions {
  double tol = 1.0e-8;  // on max_i |R_i| dt / porevolume_i
  int max_iters = 25;
};

struct PressureSolution {
  std::vector<double> p;
  FluxField flux;
  std::vector<WellState> wells;
  int iterations = 0;
};

// Two-point transmissibilities: harmonic combination of the directional
// half-transmissibilities area * (K d . n)/|d|^2 with d from cell centroid to
// face centroid and n outward. Floored at a small positive value so strongly
// sheared cells cannot produce a sign flip.
inline std::vector<double> compute_transmissibilities(const PolyMesh& m,
                                                      const RockProperties& rock) {
  std::vector<double> trans(m.n_faces(), 0.0);
  const auto half = [&](int cell, int face) {
    const MeshFace& f = m.faces[face];
    const Vec3 d = f.centroid - m.cells[cell].centroid;
    const double d2 = dot(d, d);
    if (!(d2 > 0.0)) throw ConfigError("transmissibility: face centroid coincides with cell");
    const Vec3 n = m.outward_sign(face, cell) * f.normal;
    const Vec3& k = rock.perm[cell];
    const double kdn = k[0] * d[0] * n[0] + k[1] * d[1] * n[1] + k[2] * d[2] * n[2];
    const double kmag = std::max({k[0], k[1], k[2]});
    return std::max(f.area * kdn / d2, 1.0e-12 * f.area * kmag / std::sqrt(d2));
  };
  for (int f : m.interior_faces) {
    const double ti = half(m.faces[f].owner, f);
    const double tj = half(m.faces[f].neighbor, f);
    trans[f] = 1.0 / (1.0 / ti + 1.0 / tj);
  }
  return trans;
}

namespace detail {

inline double vertical_coord(const PolyMesh& m, const Vec3& x) {
  return (m.dim == 2) ? x[1] : x[2];
}

struct CompletionRate {
  double q_t = 0.0, q_w = 0.0, q_o = 0.0;
  double dq_w_dp = 0.0, dq_o_dp = 0.0;  // w.r.t. the completion cell pressure
};

// Phase rates for one completion at the current iterate. Rate-controlled
// wells pass the frozen per-completion share in `q_share`; BHP wells derive
// rates from the drawdown, injecting with total mobility and the configured
// stream or producing with the cell's phase mobilities (crossflow-safe).
inline CompletionRate completion_rate(const WellSpec& w, const WellCompletion& c, double q_share,
                                      double sw_n, double p, const FluidModel& fluid) {
  CompletionRate r;
  if (w.control == WellControl::rate) {
    r.q_t = q_share;
    if (r.q_t >= 0.0) {
      r.q_w = w.water_fraction * r.q_t;
      r.q_o = r.q_t - r.q_w;
    } else {
      const Mobilities mob = fluid.mobility_clamped(sw_n, p);
      const double lt = mob.lw + mob.lo;
      const double fw = lt > 0.0 ? mob.lw / lt : 0.0;
      r.q_w = fw * r.q_t;
      r.q_o = r.q_t - r.q_w;
    }
    return r;
  }
  const double drawdown = w.target - p;  // positive injects
  const Mobilities mob = fluid.mobility_clamped(sw_n, p);
  if (drawdown >= 0.0) {
    const double lt = mob.lw + mob.lo;
    r.q_t = c.wi * lt * drawdown;
    r.q_w = w.water_fraction * r.q_t;
    r.q_o = r.q_t - r.q_w;
    const double dq_t = c.wi * ((mob.dlw_dp + mob.dlo_dp) * drawdown - lt);
    r.dq_w_dp = w.water_fraction * dq_t;
    r.dq_o_dp = dq_t - r.dq_w_dp;
  } else {
    r.q_w = c.wi * mob.lw * drawdown;
    r.q_o = c.wi * mob.lo * drawdown;
    r.q_t = r.q_w + r.q_o;
    r.dq_w_dp = c.wi * (mob.dlw_dp * drawdown - mob.lw);
    r.dq_o_dp = c.wi * (mob.dlo_dp * drawdown - mob.lo);
  }
  return r;
}

}  // namespace detail

// One sequential pressure solve: saturations frozen at sw_n, the two phase
// balances combined with weights (1/b_w, 1/b_o) so the accumulation term
// reduces to a volume balance. Newton with an analytic Jacobian and a sparse
// direct linear solve. Throws StepFailure on non-convergence and ConfigError
// when no pressure datum exists (incompressible with only rate wells).
inline PressureSolution solve_pressure(const PolyMesh& m, const RockProperties& rock,
                                       const FluidModel& fluid,
                                       const std::vector<WellSpec>& wells,
                                       const std::vector<double>& sw_n,
                                       const std::vector<double>& p_n, double dt,
                                       const std::vector<double>& trans,
                                       const PressureOptions& opts = {}) {
  const int n = m.n_cells();
  const bool incompressible =
      rock.rock_compr == 0.0 && fluid.water.compr == 0.0 && fluid.oil.compr == 0.0;
  bool has_bhp = false;
  for (const WellSpec& w : wells) {
    if (w.completions.empty())
      throw ConfigError("well " + w.name + " has no completions");
    for (const WellCompletion& c : w.completions)
      if (c.cell < 0 || c.cell >= n)
        throw ConfigError("well " + w.name + " completion cell out of range");
    if (w.control == WellControl::bhp) has_bhp = true;
  }
  if (incompressible && !has_bhp)
    throw ConfigError("pressure equation is singular: incompressible fluids and rock with only "
                      "rate-controlled wells leave the pressure level undetermined");

  const double g_z = fluid.gravity;
  // Frozen per-completion shares for rate wells, weighted by deliverability.
  std::vector<std::vector<double>> rate_share(wells.size());
  for (std::size_t wi = 0; wi < wells.size(); ++wi) {
    const WellSpec& w = wells[wi];
    if (w.control != WellControl::rate) continue;
    std::vector<double> wgt(w.completions.size());
    double sum = 0.0;
    for (std::size_t c = 0; c < w.completions.size(); ++c) {
      const Mobilities mob =
          fluid.mobility_clamped(sw_n[w.completions[c].cell], p_n[w.completions[c].cell]);
      wgt[c] = w.completions[c].wi * (mob.lw + mob.lo);
      sum += wgt[c];
    }
    if (!(sum > 0.0))
      throw ConfigError("well " + w.name + " has zero deliverability at all completions");
    for (double& x : wgt) x = w.target * x / sum;
    rate_share[wi] = std::move(wgt);
  }

  std::vector<double> p = p_n;
  std::vector<double> pv_scale(n);
  std::vector<double> pc_n(n, 0.0);
  for (int i = 0; i < n; ++i) {
    pv_scale[i] = std::max(rock.pore_volume(m, i, p_n[i]), 1.0e-300);
    if (fluid.has_capillary()) pc_n[i] = fluid.pc(sw_n[i]).first;
  }

  Eigen::VectorXd R(n);
  std::vector<Eigen::Triplet<double>> trips;
  int iters = 0;
  for (;; ++iters) {
    R.setZero();
    trips.clear();
    std::vector<double> aw(n, 0.0), ao(n, 0.0);  // unweighted phase residuals
    std::vector<double> omw(n), omo(n), bw(n), bo(n);
    for (int i = 0; i < n; ++i) {
      std::tie(omw[i], omo[i]) = weighting_factors(fluid, p[i]);
      bw[i] = fluid.b_w(p[i]);
      bo[i] = fluid.b_o(p[i]);
    }

    // Accumulation: S^n (phi b - phi^n b^n) |cell| / dt per phase.
    for (int i = 0; i < n; ++i) {
      const double vol_dt = m.cells[i].volume / dt;
      const double phi = rock.porosity(i, p[i]);
      const double phi_n = rock.porosity(i, p_n[i]);
      const double acc_w = vol_dt * sw_n[i] * (phi * bw[i] - phi_n * fluid.b_w(p_n[i]));
      const double acc_o = vol_dt * (1.0 - sw_n[i]) * (phi * bo[i] - phi_n * fluid.b_o(p_n[i]));
      aw[i] += acc_w;
      ao[i] += acc_o;
      const double dacc_w = vol_dt * sw_n[i] * (rock.dporosity_dp(i) * bw[i] + phi * fluid.db_w_dp());
      const double dacc_o =
          vol_dt * (1.0 - sw_n[i]) * (rock.dporosity_dp(i) * bo[i] + phi * fluid.db_o_dp());
      R[i] += omw[i] * acc_w + omo[i] * acc_o;
      trips.emplace_back(i, i, omw[i] * dacc_w + omo[i] * dacc_o);
    }

    // Phase fluxes with potential-based single-point upstream weighting.
    for (int f : m.interior_faces) {
      const int i = m.faces[f].owner, j = m.faces[f].neighbor;
      const double T = trans[f];
      const double dz = detail::vertical_coord(m, m.cells[i].centroid) -
                        detail::vertical_coord(m, m.cells[j].centroid);
      for (int phase = 0; phase < 2; ++phase) {
        const bool water = phase == 0;
        const double rho_i = water ? fluid.rho_w(p[i]) : fluid.rho_o(p[i]);
        const double rho_j = water ? fluid.rho_w(p[j]) : fluid.rho_o(p[j]);
        const double drho = 0.5 * (water ? fluid.drho_w_dp() : fluid.drho_o_dp());
        const double rho_f = 0.5 * (rho_i + rho_j);
        const double pc_off = water ? pc_n[i] - pc_n[j] : 0.0;
        const double dphi = (p[i] - p[j]) - pc_off + rho_f * g_z * dz;
        const double ddphi_di = 1.0 + drho * g_z * dz;
        const double ddphi_dj = -1.0 + drho * g_z * dz;
        const int up = dphi > 0.0 ? i : j;
        const Mobilities mob = fluid.mobility_clamped(sw_n[up], p[up]);
        const double lam = water ? mob.lw : mob.lo;
        const double dlam_dp = water ? mob.dlw_dp : mob.dlo_dp;
        const double b_up = water ? bw[up] : bo[up];
        const double db = water ? fluid.db_w_dp() : fluid.db_o_dp();
        const double F = T * b_up * lam * dphi;
        double dF_di = T * b_up * lam * ddphi_di;
        double dF_dj = T * b_up * lam * ddphi_dj;
        const double dF_dup = T * (db * lam + b_up * dlam_dp) * dphi;
        if (up == i)
          dF_di += dF_dup;
        else
          dF_dj += dF_dup;
        const double om_i = water ? omw[i] : omo[i];
        const double om_j = water ? omw[j] : omo[j];
        (water ? aw : ao)[i] += F;
        (water ? aw : ao)[j] -= F;
        R[i] += om_i * F;
        R[j] -= om_j * F;
        trips.emplace_back(i, i, om_i * dF_di);
        trips.emplace_back(i, j, om_i * dF_dj);
        trips.emplace_back(j, i, -om_j * dF_di);
        trips.emplace_back(j, j, -om_j * dF_dj);
      }
    }

    // Wells: sources enter the phase residuals as -b q; with the chosen
    // weights the weighted equation sees plain reservoir-volume rates.
    for (std::size_t wi = 0; wi < wells.size(); ++wi) {
      const WellSpec& w = wells[wi];
      for (std::size_t ci = 0; ci < w.completions.size(); ++ci) {
        const WellCompletion& c = w.completions[ci];
        const int i = c.cell;
        const double share = w.control == WellControl::rate ? rate_share[wi][ci] : 0.0;
        const auto r = detail::completion_rate(w, c, share, sw_n[i], p[i], fluid);
        aw[i] -= bw[i] * r.q_w;
        ao[i] -= bo[i] * r.q_o;
        R[i] -= omw[i] * bw[i] * r.q_w + omo[i] * bo[i] * r.q_o;
        // omega * b == 1; only the rate's own pressure dependence survives.
        trips.emplace_back(i, i, -(r.dq_w_dp + r.dq_o_dp));
      }
    }

    // d(omega)/dp times the unweighted phase residual closes the product rule.
    for (int i = 0; i < n; ++i) {
      const double domw = -fluid.db_w_dp() / (bw[i] * bw[i]);
      const double domo = -fluid.db_o_dp() / (bo[i] * bo[i]);
      trips.emplace_back(i, i, domw * aw[i] + domo * ao[i]);
    }

    double worst = 0.0;
    for (int i = 0; i < n; ++i) worst = std::max(worst, std::abs(R[i]) * dt / pv_scale[i]);
    if (worst <= opts.tol) break;
    if (iters >= opts.max_iters)
      throw StepFailure("pressure Newton did not converge: scaled residual " +
                        std::to_string(worst));

    Eigen::SparseMatrix<double> J(n, n);
    J.setFromTriplets(trips.begin(), trips.end());
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu(J);
    if (lu.info() != Eigen::Success)
      throw StepFailure("pressure Jacobian factorization failed");
    const Eigen::VectorXd delta = lu.solve(-R);
    for (int i = 0; i < n; ++i) p[i] += delta[i];
  }

  // Converged state: export total fluxes, gravity ingredients, well results.
  PressureSolution sol;
  sol.p = p;
  sol.iterations = iters;
  sol.flux.v.assign(m.n_faces(), 0.0);
  sol.flux.g.assign(m.n_faces(), 0.0);
  sol.flux.trans = trans;
  sol.flux.dz.assign(m.n_faces(), 0.0);
  for (int f : m.interior_faces) {
    const int i = m.faces[f].owner, j = m.faces[f].neighbor;
    const double T = trans[f];
    const double dz = detail::vertical_coord(m, m.cells[i].centroid) -
                      detail::vertical_coord(m, m.cells[j].centroid);
    double v_tot = 0.0;
    for (int phase = 0; phase < 2; ++phase) {
      const bool water = phase == 0;
      const double rho_f =
          0.5 * ((water ? fluid.rho_w(p[i]) : fluid.rho_o(p[i])) +
                 (water ? fluid.rho_w(p[j]) : fluid.rho_o(p[j])));
      const double pc_off = water ? pc_n[i] - pc_n[j] : 0.0;
      const double dphi = (p[i] - p[j]) - pc_off + rho_f * g_z * dz;
      const int up = dphi > 0.0 ? i : j;
      const Mobilities mob = fluid.mobility_clamped(sw_n[up], p[up]);
      v_tot += T * (water ? mob.lw : mob.lo) * dphi;
    }
    sol.flux.v[f] = v_tot;
    const double rho_wf = 0.5 * (fluid.rho_w(p[i]) + fluid.rho_w(p[j]));
    const double rho_of = 0.5 * (fluid.rho_o(p[i]) + fluid.rho_o(p[j]));
    sol.flux.g[f] = T * (rho_wf - rho_of) * g_z * dz;
    sol.flux.dz[f] = dz;
  }
  sol.wells.resize(wells.size());
  for (std::size_t wi = 0; wi < wells.size(); ++wi) {
    const WellSpec& w = wells[wi];
    WellState& ws = sol.wells[wi];
    const std::size_t nc = w.completions.size();
    ws.q_total.resize(nc);
    ws.q_w.resize(nc);
    ws.q_o.resize(nc);
    double wlam_sum = 0.0, wlam_p_sum = 0.0;
    for (std::size_t ci = 0; ci < nc; ++ci) {
      const WellCompletion& c = w.completions[ci];
      const double share = w.control == WellControl::rate ? rate_share[wi][ci] : 0.0;
      const auto r = detail::completion_rate(w, c, share, sw_n[c.cell], p[c.cell], fluid);
      ws.q_total[ci] = r.q_t;
      ws.q_w[ci] = r.q_w;
      ws.q_o[ci] = r.q_o;
      const Mobilities mob = fluid.mobility_clamped(sw_n[c.cell], p[c.cell]);
      wlam_sum += c.wi * (mob.lw + mob.lo);
      wlam_p_sum += c.wi * (mob.lw + mob.lo) * p[c.cell];
    }
    ws.bhp = w.control == WellControl::bhp
                 ? w.target
                 : (wlam_sum > 0.0 ? (w.target + wlam_p_sum) / wlam_sum : 0.0);
  }
  return sol;
}

}  // namespace topoflow
