#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "topoflow/core.hpp"
#include "topoflow/cubature.hpp"
#include "topoflow/dgspace.hpp"
#include "topoflow/faceflux.hpp"
#include "topoflow/fluxgraph.hpp"
#include "topoflow/mesh.hpp"
#include "topoflow/petro.hpp"
#include "topoflow/pressure.hpp"

namespace topoflow {

struct TransportOptions {
  double tol = 1.0e-9;        // CNV-style: max_l |R_l| dt / porevolume
  int max_newton = 25;        // per cell / unit
  int max_sweeps = 50;        // Gauss-Seidel sweeps over one cycle
  double ds_mean_cap = 0.2;   // per-iteration cap on the cell-mean update
  double range_eps = 1.0e-4;  // admissible overshoot outside [0, 1]
  double jump_tol = 0.2;      // face-mean trace jump triggering order reduction
  bool order_reduction = true;
};

struct TransportStats {
  int n_cells = 0;
  std::vector<int> cell_iters;  // Newton iterations attributed per cell
  long long total_iters = 0;
  int max_cell_iters = 0;
  int active_cells = 0;  // cells with at least one iteration
  int zero_iter_cells = 0;
  int gs_sweeps = 0;       // total Gauss-Seidel sweeps this step
  int max_cycle_sweeps = 0;
  int gs_fallbacks = 0;    // cycles that fell back to simultaneous Newton
  int global_iters = 0;    // global-Newton mode only
  int traversals = 0;      // ordering passes (1 + demotion re-runs)
  int demoted_cells = 0;
  int n_components = 0, n_cycles = 0, max_component = 0;
  double mean_cycle_size = 0.0;
  double water_balance = 0.0;       // |sum_i R_{w,i,0}| dt / total pore volume
  double oil_balance = 0.0;         // splitting-error indicator, same scaling
  double max_scaled_residual = 0.0; // audit: worst converged cell residual

  double avg_iters_per_cell() const {
    return n_cells ? static_cast<double>(total_iters) / n_cells : 0.0;
  }
};

// Frozen per-step transport problem: end-of-step pressures and total fluxes
// from the pressure solve, time-n accumulation, and well source data. The
// residual for one cell tests the water balance against each active basis
// function; with upstream traces frozen it depends on the cell's own dofs
// plus the traces explicitly exposed through `Cross` entries.
class TransportSystem {
 public:
  struct Cross {
    int cell;  // the neighboring cell the derivative couples to
    int l, k;
    double val;  // dR_l / ds_{cell,k}
  };

  TransportSystem(const PolyMesh& m, const DGSpace& space, const FluidModel& fluid,
                  const RockProperties& rock, const FluxField& flux,
                  const std::vector<WellSpec>& wells, const std::vector<WellState>& well_states,
                  const SatField& s_n, const std::vector<double>& p_n,
                  const std::vector<double>& p, double dt)
      : m_(m), space_(space), fluid_(fluid), flux_(flux), p_(p), dt_(dt) {
    if (space.degree >= 1 && fluid.has_capillary())
      throw ConfigError("capillary pressure is only supported with degree 0");
    const int n = m.n_cells();
    const int nd = space.ndof;
    bw_.resize(n);
    acc_coef_.resize(n);
    acc_old_.assign(static_cast<std::size_t>(n) * nd, 0.0);
    pv_.resize(n);
    mean_n_.resize(n);
    oil_acc_old_.resize(n);
    src_const_.assign(static_cast<std::size_t>(n) * nd, 0.0);
    src_oil_const_.assign(n, 0.0);
    prod_qt_.assign(n, 0.0);
    for (int c = 0; c < n; ++c) {
      bw_[c] = fluid.b_w(p[c]);
      const double phi = rock.porosity(c, p[c]);
      const double phi_n = rock.porosity(c, p_n[c]);
      acc_coef_[c] = phi * bw_[c] / dt;
      pv_[c] = std::max(rock.pore_volume(m, c, p[c]), 1.0e-300);
      pv_total_ += pv_[c];
      const double* M = &space.mass[static_cast<std::size_t>(c) * nd * nd];
      const double coef_n = phi_n * fluid.b_w(p_n[c]) / dt;
      for (int l = 0; l < nd; ++l) {
        double ms = 0.0;
        for (int k = 0; k < nd; ++k) ms += M[l * nd + k] * s_n.dof[static_cast<std::size_t>(c) * nd + k];
        acc_old_[static_cast<std::size_t>(c) * nd + l] = coef_n * ms;
      }
      mean_n_[c] = s_n.mean(space, c);
      oil_acc_old_[c] =
          phi_n * fluid.b_o(p_n[c]) * m.cells[c].volume * (1.0 - mean_n_[c]) / dt;
    }
    for (std::size_t w = 0; w < wells.size(); ++w) {
      for (std::size_t ci = 0; ci < wells[w].completions.size(); ++ci) {
        const int c = wells[w].completions[ci].cell;
        const double qt = well_states[w].q_total[ci];
        if (qt >= 0.0) {
          const double qw = wells[w].water_fraction * qt;
          for (int l = 0; l < nd; ++l)
            src_const_[static_cast<std::size_t>(c) * nd + l] +=
                bw_[c] * qw * space.moments[static_cast<std::size_t>(c) * nd + l];
          src_oil_const_[c] += fluid.b_o(p[c]) * (qt - qw);
        } else {
          prod_qt_[c] += qt;
        }
      }
    }
    if (space.degree >= 1) {
      vel_.resize(n);
      grav_.resize(n);
      for (int c = 0; c < n; ++c) {
        vel_[c] = interpolate_velocity(m, c, flux.v);
        grav_[c] = interpolate_velocity(m, c, flux.g);
      }
    }
  }

  const PolyMesh& mesh() const { return m_; }
  const DGSpace& space() const { return space_; }
  const FluidModel& fluid() const { return fluid_; }
  double dt() const { return dt_; }
  double pore_volume(int cell) const { return pv_[cell]; }
  double total_pore_volume() const { return pv_total_; }

  double scaled_norm(const double* R, int nd, int cell) const {
    double worst = 0.0;
    for (int l = 0; l < nd; ++l) worst = std::max(worst, std::abs(R[l]) * dt_ / pv_[cell]);
    return worst;
  }

  // Residual over the cell's active dofs; J (row-major nd x nd, may be null)
  // holds derivatives w.r.t. the cell's own dofs, `cross` (may be null)
  // receives derivatives w.r.t. neighboring cells' dofs.
  void cell_residual(const SatField& s, int cell, double* R, double* J,
                     std::vector<Cross>* cross) const {
    const int ndof = space_.ndof;
    const int nd = s.active_ndof(cell);
    std::fill(R, R + nd, 0.0);
    if (J) std::fill(J, J + nd * nd, 0.0);

    // Accumulation (phi b_w M s)/dt at the new pressure minus the stored
    // time-n value.
    const double* M = &space_.mass[static_cast<std::size_t>(cell) * ndof * ndof];
    const double* d = &s.dof[static_cast<std::size_t>(cell) * ndof];
    for (int l = 0; l < nd; ++l) {
      double ms = 0.0;
      for (int k = 0; k < nd; ++k) ms += M[l * ndof + k] * d[k];
      R[l] += acc_coef_[cell] * ms - acc_old_[static_cast<std::size_t>(cell) * ndof + l];
      if (J)
        for (int k = 0; k < nd; ++k) J[l * nd + k] += acc_coef_[cell] * M[l * ndof + k];
    }

    // Face fluxes, all drives per unit area so quadrature weights carry the
    // measure. Boundary faces are no-flow (zero total flux and gravity).
    std::array<double, 16> cbuf;
    for (int f : m_.cells[cell].faces) {
      const MeshFace& face = m_.faces[f];
      if (face.neighbor < 0) continue;
      const int other = m_.other_cell(f, cell);
      const double sign = m_.outward_sign(f, cell);
      const double inv_area = 1.0 / face.area;
      const double vt = sign * flux_.v[f] * inv_area;
      const double gt = sign * flux_.g[f] * inv_area;
      const double cpc = flux_.trans[f] * inv_area;
      const FaceQuadrature& fq = space_.faces[f];
      const bool is_owner = face.owner == cell;
      const double* psi_own = is_owner ? fq.psi_own.data() : fq.psi_nbr.data();
      const double* psi_oth = is_owner ? fq.psi_nbr.data() : fq.psi_own.data();
      const int nd_o = s.active_ndof(other);
      const int nq = static_cast<int>(fq.pts.size());
      double* cj = nullptr;
      if (cross) {
        cbuf.fill(0.0);
        cj = cbuf.data();
      }
      for (int q = 0; q < nq; ++q) {
        const double si = s.face_value(space_, f, q, cell);
        const double sj = s.face_value(space_, f, q, other);
        const WaterFaceFlux ff =
            water_face_flux(fluid_, vt, gt, cpc, si, sj, p_[cell], p_[other]);
        const double wq = fq.pts[q].w;
        const double* po = &psi_own[static_cast<std::size_t>(q) * ndof];
        const double* pn = &psi_oth[static_cast<std::size_t>(q) * ndof];
        for (int l = 0; l < nd; ++l) {
          R[l] += wq * po[l] * ff.water;
          if (J)
            for (int k = 0; k < nd; ++k) J[l * nd + k] += wq * po[l] * ff.dwater_dsi * po[k];
          if (cj)
            for (int k = 0; k < nd_o; ++k) cj[l * nd_o + k] += wq * po[l] * ff.dwater_dsj * pn[k];
        }
      }
      if (cj)
        for (int l = 0; l < nd; ++l)
          for (int k = 0; k < nd_o; ++k)
            if (cj[l * nd_o + k] != 0.0) cross->push_back({other, l, k, cj[l * nd_o + k]});
    }

    // Volume term, active only at degree >= 1: the flux density against the
    // basis gradients, with cell-centered velocity and gravity
    // reconstructions standing in for the face-normal data.
    if (nd > 1) {
      const CellQuadrature& cq = space_.cells[cell];
      const double vol = m_.cells[cell].volume;
      const int nq = static_cast<int>(cq.pts.size());
      for (int q = 0; q < nq; ++q) {
        const double sq = s.point_value(space_, cell, q);
        const Mobilities mob = fluid_.mobility_clamped(sq, p_[cell]);
        const double lt = mob.lw + mob.lo;
        if (!(lt > 0.0)) continue;
        const double fw = mob.lw / lt;
        const double dfw = (mob.dlw_ds * mob.lo - mob.lw * mob.dlo_ds) / (lt * lt);
        const double wv = vol * cq.pts[q].w * bw_[cell];
        const Vec3 flow = vel_[cell] + mob.lo * grav_[cell];
        const double* psi = &cq.psi[static_cast<std::size_t>(q) * ndof];
        for (int l = 1; l < nd; ++l) {
          const Vec3& gp = cq.grad_psi[static_cast<std::size_t>(q) * ndof + l];
          R[l] -= wv * fw * dot(flow, gp);
          if (J) {
            const double dterm = dfw * dot(flow, gp) + fw * mob.dlo_ds * dot(grav_[cell], gp);
            for (int k = 0; k < nd; ++k) J[l * nd + k] -= wv * dterm * psi[k];
          }
        }
      }
    }

    // Wells: injection is a fixed surface-volume source; production takes
    // water by the implicit fractional flow at the cell's quadrature points.
    for (int l = 0; l < nd; ++l) R[l] -= src_const_[static_cast<std::size_t>(cell) * ndof + l];
    if (prod_qt_[cell] != 0.0) {
      const CellQuadrature& cq = space_.cells[cell];
      const double bq = bw_[cell] * prod_qt_[cell];
      const int nq = static_cast<int>(cq.pts.size());
      for (int q = 0; q < nq; ++q) {
        const double sq = s.point_value(space_, cell, q);
        const Mobilities mob = fluid_.mobility_clamped(sq, p_[cell]);
        const double lt = mob.lw + mob.lo;
        if (!(lt > 0.0)) continue;
        const double fw = mob.lw / lt;
        const double dfw = (mob.dlw_ds * mob.lo - mob.lw * mob.dlo_ds) / (lt * lt);
        const double* psi = &cq.psi[static_cast<std::size_t>(q) * ndof];
        for (int l = 0; l < nd; ++l) {
          R[l] -= bq * cq.pts[q].w * fw * psi[l];
          if (J)
            for (int k = 0; k < nd; ++k) J[l * nd + k] -= bq * cq.pts[q].w * dfw * psi[l] * psi[k];
        }
      }
    }
  }

  // Oil-side balance for the audit: faces cancel exactly in the global sum,
  // so only accumulation and sources contribute.
  double oil_imbalance(const SatField& s) const {
    double sum = 0.0;
    for (int c = 0; c < m_.n_cells(); ++c) {
      const double acc = acc_coef_[c] / bw_[c] * fluid_.b_o(p_[c]) * m_.cells[c].volume *
                             (1.0 - s.mean(space_, c)) -
                         oil_acc_old_[c];
      double src = src_oil_const_[c];
      if (prod_qt_[c] != 0.0) {
        const CellQuadrature& cq = space_.cells[c];
        double fo_avg = 0.0;
        for (std::size_t q = 0; q < cq.pts.size(); ++q) {
          const double sq = s.point_value(space_, c, static_cast<int>(q));
          const Mobilities mob = fluid_.mobility_clamped(sq, p_[c]);
          const double lt = mob.lw + mob.lo;
          fo_avg += cq.pts[q].w * (lt > 0.0 ? mob.lo / lt : 0.0);
        }
        src += fluid_.b_o(p_[c]) * prod_qt_[c] * fo_avg;
      }
      sum += acc - src;
    }
    return std::abs(sum) * dt_ / pv_total_;
  }

 private:
  const PolyMesh& m_;
  const DGSpace& space_;
  const FluidModel& fluid_;
  const FluxField& flux_;
  const std::vector<double>& p_;
  double dt_;
  std::vector<double> bw_, acc_coef_, acc_old_, pv_, mean_n_, oil_acc_old_;
  std::vector<double> src_const_, src_oil_const_, prod_qt_;
  std::vector<Vec3> vel_, grav_;
  double pv_total_ = 0.0;
};

struct UnitResult {
  int iters = 0;
  bool converged = true;
};

// Newton on a single cell with all neighbor traces frozen. Zero iterations
// when already converged. The scalar (dG(0)) path is safeguarded by the
// monotonicity of the consistent upwind residual: the iterate keeps a
// shrinking bracket and bisects whenever the Newton proposal leaves it.
inline UnitResult solve_cell(const TransportSystem& sys, SatField& s, int cell,
                             const TransportOptions& opt) {
  const int ndof = s.ndof;
  const int nd = s.active_ndof(cell);
  std::array<double, 8> R;
  std::array<double, 64> J;

  if (nd == 1) {
    double* x = &s.dof[static_cast<std::size_t>(cell) * ndof];
    double lo = -0.05, hi = 1.05;
    for (int it = 0;; ++it) {
      sys.cell_residual(s, cell, R.data(), J.data(), nullptr);
      if (sys.scaled_norm(R.data(), 1, cell) <= opt.tol) return {it, true};
      if (it >= opt.max_newton) return {it, false};
      if (R[0] > 0.0)
        hi = std::min(hi, *x);
      else
        lo = std::max(lo, *x);
      double dx = -R[0] / J[0];
      if (!std::isfinite(dx)) dx = 0.0;
      dx = std::clamp(dx, -opt.ds_mean_cap, opt.ds_mean_cap);
      double xn = std::clamp(*x + dx, -0.05, 1.05);
      if (xn <= lo || xn >= hi || dx == 0.0) xn = 0.5 * (lo + hi);
      *x = xn;
    }
  }

  const double* mom = &sys.space().moments[static_cast<std::size_t>(cell) * ndof];
  double* d = &s.dof[static_cast<std::size_t>(cell) * ndof];
  for (int it = 0;; ++it) {
    sys.cell_residual(s, cell, R.data(), J.data(), nullptr);
    const double norm = sys.scaled_norm(R.data(), nd, cell);
    if (norm <= opt.tol) return {it, true};
    if (it >= opt.max_newton) return {it, false};
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> Jm(
        J.data(), nd, nd);
    Eigen::Map<Eigen::VectorXd> Rm(R.data(), nd);
    Eigen::VectorXd ds = Jm.partialPivLu().solve(-Rm);
    if (!ds.allFinite()) return {it, false};
    double mean_update = 0.0;
    for (int k = 0; k < nd; ++k) mean_update += ds[k] * mom[k];
    if (std::abs(mean_update) > opt.ds_mean_cap) ds *= opt.ds_mean_cap / std::abs(mean_update);
    // Backtracking: halve the update while it makes the residual worse, so
    // the S-shaped flux function cannot trap the iteration in a limit cycle.
    // The last halving is kept unconditionally to keep making progress.
    double applied = 0.0;
    for (double frac = 1.0;; frac *= 0.5) {
      for (int k = 0; k < nd; ++k) d[k] += (frac - applied) * ds[k];
      applied = frac;
      if (frac < 0.1) break;
      sys.cell_residual(s, cell, R.data(), nullptr, nullptr);
      if (sys.scaled_norm(R.data(), nd, cell) <= norm) break;
    }
  }
}

// Simultaneous damped Newton on a set of cells; intra-set couplings enter the
// Jacobian, everything else stays frozen. Shared by block mode, the cycle
// fallback, and the global reference solver (all cells). `loc` is scratch of
// size n_cells, all -1 on entry, restored on exit.
inline UnitResult multi_cell_newton(const TransportSystem& sys, SatField& s,
                                    const std::vector<int>& cells, const TransportOptions& opt,
                                    std::vector<int>& loc) {
  const int ndof = s.ndof;
  const int nu = static_cast<int>(cells.size());
  std::vector<int> offset(nu + 1, 0);
  for (int u = 0; u < nu; ++u) {
    loc[cells[u]] = u;
    offset[u + 1] = offset[u] + s.active_ndof(cells[u]);
  }
  const int ntot = offset[nu];
  std::array<double, 8> R;
  std::array<double, 64> J;
  std::vector<TransportSystem::Cross> cross;
  Eigen::VectorXd Rbig(ntot);
  std::vector<Eigen::Triplet<double>> trips;
  UnitResult result;

  const auto restore = [&] {
    for (int c : cells) loc[c] = -1;
  };
  for (int it = 0;; ++it) {
    Rbig.setZero();
    trips.clear();
    double worst = 0.0;
    for (int u = 0; u < nu; ++u) {
      const int c = cells[u];
      const int nd = s.active_ndof(c);
      cross.clear();
      sys.cell_residual(s, c, R.data(), J.data(), &cross);
      worst = std::max(worst, sys.scaled_norm(R.data(), nd, c));
      for (int l = 0; l < nd; ++l) {
        Rbig[offset[u] + l] = R[l];
        for (int k = 0; k < nd; ++k)
          trips.emplace_back(offset[u] + l, offset[u] + k, J[l * nd + k]);
      }
      for (const auto& x : cross)
        if (loc[x.cell] >= 0)
          trips.emplace_back(offset[u] + x.l, offset[loc[x.cell]] + x.k, x.val);
    }
    if (worst <= opt.tol) {
      result.iters = it;
      restore();
      return result;
    }
    if (it >= opt.max_newton) break;
    Eigen::SparseMatrix<double> A(ntot, ntot);
    A.setFromTriplets(trips.begin(), trips.end());
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu(A);
    if (lu.info() != Eigen::Success) break;
    Eigen::VectorXd ds = lu.solve(-Rbig);
    if (!ds.allFinite()) break;
    for (int u = 0; u < nu; ++u) {
      const int c = cells[u];
      const int nd = s.active_ndof(c);
      const double* mom = &sys.space().moments[static_cast<std::size_t>(c) * ndof];
      double mean_update = 0.0;
      for (int k = 0; k < nd; ++k) mean_update += ds[offset[u] + k] * mom[k];
      const double scale =
          std::abs(mean_update) > opt.ds_mean_cap ? opt.ds_mean_cap / std::abs(mean_update) : 1.0;
      for (int k = 0; k < nd; ++k) ds[offset[u] + k] *= scale;
    }
    // Backtracking on the stacked update, same safeguard as the single-cell
    // path: halve while the worst scaled residual grows, keep the last try.
    double applied = 0.0;
    for (double frac = 1.0;; frac *= 0.5) {
      for (int u = 0; u < nu; ++u)
        for (int k = 0; k < s.active_ndof(cells[u]); ++k)
          s.dof[static_cast<std::size_t>(cells[u]) * ndof + k] +=
              (frac - applied) * ds[offset[u] + k];
      applied = frac;
      if (frac < 0.1) break;
      double w2 = 0.0;
      for (int u = 0; u < nu; ++u) {
        sys.cell_residual(s, cells[u], R.data(), nullptr, nullptr);
        w2 = std::max(w2, sys.scaled_norm(R.data(), s.active_ndof(cells[u]), cells[u]));
      }
      if (w2 <= worst) break;
    }
    result.iters = it + 1;
  }
  result.converged = false;
  restore();
  return result;
}

// Nonlinear Gauss-Seidel over a cycle: repeated single-cell solves in
// ascending cell order, using current neighbor values as frozen traces.
// Converged when a full sweep performs zero Newton iterations (every cell
// residual within tolerance simultaneously).
inline UnitResult solve_cycle_gauss_seidel(const TransportSystem& sys, SatField& s,
                                           const std::vector<int>& cells,
                                           const TransportOptions& opt, TransportStats& st) {
  UnitResult total;
  int sweeps = 0;
  while (sweeps < opt.max_sweeps) {
    ++sweeps;
    int sweep_iters = 0;
    for (int c : cells) {
      const UnitResult r = solve_cell(sys, s, c, opt);
      if (!r.converged) {
        st.gs_sweeps += sweeps;
        st.max_cycle_sweeps = std::max(st.max_cycle_sweeps, sweeps);
        return {total.iters + r.iters, false};
      }
      st.cell_iters[c] += r.iters;
      sweep_iters += r.iters;
    }
    total.iters += sweep_iters;
    if (sweep_iters == 0) {
      st.gs_sweeps += sweeps;
      st.max_cycle_sweeps = std::max(st.max_cycle_sweeps, sweeps);
      return total;
    }
  }
  st.gs_sweeps += sweeps;
  st.max_cycle_sweeps = std::max(st.max_cycle_sweeps, sweeps);
  return {total.iters, false};
}

namespace detail {

// Order-reduction scan over cells still at the run's maximum degree: demote
// on a face-mean trace jump beyond jump_tol or any value (mean, interior
// quadrature point, or face trace) outside [-eps, 1+eps]. Demotion collapses
// the cell to its mean. Returns the demoted cells.
inline std::vector<int> demotion_pass(const TransportSystem& sys, SatField& s,
                                      const TransportOptions& opt) {
  std::vector<int> demoted;
  const DGSpace& space = sys.space();
  const PolyMesh& m = sys.mesh();
  if (space.degree == 0) return demoted;
  const double lo = -opt.range_eps, hi = 1.0 + opt.range_eps;
  for (int c = 0; c < m.n_cells(); ++c) {
    if (s.degree[c] == 0) continue;
    bool trigger = false;
    const double mean = s.mean(space, c);
    if (mean < lo || mean > hi) trigger = true;
    for (std::size_t q = 0; !trigger && q < space.cells[c].pts.size(); ++q) {
      const double v = s.point_value(space, c, static_cast<int>(q));
      if (v < lo || v > hi) trigger = true;
    }
    for (std::size_t fi = 0; !trigger && fi < m.cells[c].faces.size(); ++fi) {
      const int f = m.cells[c].faces[fi];
      const FaceQuadrature& fq = space.faces[f];
      const int other = m.faces[f].neighbor < 0 ? -1 : m.other_cell(f, c);
      double jump = 0.0;
      for (std::size_t q = 0; q < fq.pts.size(); ++q) {
        const double v = s.face_value(space, f, static_cast<int>(q), c);
        if (v < lo || v > hi) {
          trigger = true;
          break;
        }
        if (other >= 0)
          jump += fq.pts[q].w * (v - s.face_value(space, f, static_cast<int>(q), other));
      }
      if (other >= 0 && std::abs(jump) / m.faces[f].area > opt.jump_tol) trigger = true;
    }
    if (trigger) {
      s.reduce_to_constant(space, c);
      demoted.push_back(c);
    }
  }
  return demoted;
}

// Final audit at the converged state: the signed sum of all water residual
// means (interior faces cancel in exact arithmetic, leaving accumulation
// versus sources), the worst converged cell residual, and the oil-side
// imbalance carried by the sequential splitting.
inline void mass_audit(const TransportSystem& sys, const SatField& s, TransportStats& st) {
  std::array<double, 8> R;
  double sum = 0.0, worst = 0.0;
  for (int c = 0; c < sys.mesh().n_cells(); ++c) {
    sys.cell_residual(s, c, R.data(), nullptr, nullptr);
    sum += R[0];
    worst = std::max(worst, sys.scaled_norm(R.data(), s.active_ndof(c), c));
  }
  st.water_balance = std::abs(sum) * sys.dt() / sys.total_pore_volume();
  st.oil_balance = sys.oil_imbalance(s);
  st.max_scaled_residual = worst;
}

inline void finalize_counts(TransportStats& st) {
  for (int it : st.cell_iters) {
    st.total_iters += it;
    st.max_cell_iters = std::max(st.max_cell_iters, it);
    if (it == 0)
      ++st.zero_iter_cells;
    else
      ++st.active_cells;
  }
}

// Cell means must stay physical once the limiter has had its say; a
// violation here means the time step was too aggressive.
inline void check_means(const TransportSystem& sys, const SatField& s,
                        const TransportOptions& opt) {
  if (!opt.order_reduction) return;
  for (int c = 0; c < sys.mesh().n_cells(); ++c) {
    const double mean = s.mean(sys.space(), c);
    if (mean < -opt.range_eps || mean > 1.0 + opt.range_eps)
      throw StepFailure("transport: cell mean saturation " + std::to_string(mean) +
                        " outside admissible range");
  }
}

}  // namespace detail

// One reordered transport step: traverse the solve units in topological
// order, skipping any unit whose cells saw no upstream update and whose
// residuals are already converged. Units solve cell-by-cell, by nonlinear
// Gauss-Seidel (single multi-cell component), or by simultaneous Newton
// (packed blocks); a failed Gauss-Seidel cycle falls back to simultaneous
// Newton. After each traversal the order-reduction pass may demote cells,
// which dirties their graph successors and forces another traversal.
inline TransportStats transport_step(const TransportSystem& sys, const FluxGraph& graph,
                                     const Ordering& ord, const std::vector<SolveUnit>& units,
                                     SatField& s, const TransportOptions& opt) {
  const PolyMesh& m = sys.mesh();
  const int n = m.n_cells();
  TransportStats st;
  st.n_cells = n;
  st.cell_iters.assign(n, 0);
  st.n_components = ord.n_components();
  st.n_cycles = ord.n_cycles();
  st.max_component = ord.max_component();
  st.mean_cycle_size = ord.mean_cycle_size();

  if (opt.order_reduction)
    for (int c = 0; c < n; ++c) s.degree[c] = sys.space().degree;  // re-promote

  std::vector<int> loc(n, -1);
  std::vector<char> dirty(n, 0);
  std::array<double, 8> R;

  for (int round = 1;; ++round) {
    if (round > n + 1) throw StepFailure("transport: order-reduction loop did not settle");
    st.traversals = round;
    for (const SolveUnit& unit : units) {
      bool unit_dirty = false;
      for (int c : unit.cells) unit_dirty |= dirty[c] != 0;
      if (!unit_dirty) {
        bool all_converged = true;
        for (int c : unit.cells) {
          sys.cell_residual(s, c, R.data(), nullptr, nullptr);
          if (sys.scaled_norm(R.data(), s.active_ndof(c), c) > opt.tol) {
            all_converged = false;
            break;
          }
        }
        if (all_converged) continue;  // skip: zero iterations, not updated
      }
      UnitResult r;
      if (unit.cells.size() == 1) {
        r = solve_cell(sys, s, unit.cells[0], opt);
        st.cell_iters[unit.cells[0]] += r.iters;
      } else if (unit.has_cycle && unit.n_components == 1) {
        r = solve_cycle_gauss_seidel(sys, s, unit.cells, opt, st);
        if (!r.converged) {
          ++st.gs_fallbacks;
          r = multi_cell_newton(sys, s, unit.cells, opt, loc);
          for (int c : unit.cells) st.cell_iters[c] += r.iters;
        }
      } else {
        r = multi_cell_newton(sys, s, unit.cells, opt, loc);
        for (int c : unit.cells) st.cell_iters[c] += r.iters;
      }
      if (!r.converged)
        throw StepFailure("transport: solve unit of " + std::to_string(unit.cells.size()) +
                          " cells did not converge");
      if (r.iters > 0)
        for (int c : unit.cells)
          for (int w : graph.out[c]) dirty[w] = 1;
    }
    const std::vector<int> demoted = detail::demotion_pass(sys, s, opt);
    if (demoted.empty()) break;
    st.demoted_cells += static_cast<int>(demoted.size());
    std::fill(dirty.begin(), dirty.end(), 0);
    for (int c : demoted) {
      dirty[c] = 1;
      for (int w : graph.out[c]) dirty[w] = 1;
    }
  }

  detail::check_means(sys, s, opt);
  detail::mass_audit(sys, s, st);
  detail::finalize_counts(st);
  return st;
}

// Reference solver: simultaneous Newton over all cells, with the same
// order-reduction rounds so both solvers converge to the same discrete
// problem.
inline TransportStats solve_global_newton(const TransportSystem& sys, SatField& s,
                                          const TransportOptions& opt) {
  const int n = sys.mesh().n_cells();
  TransportStats st;
  st.n_cells = n;
  st.cell_iters.assign(n, 0);

  if (opt.order_reduction)
    for (int c = 0; c < n; ++c) s.degree[c] = sys.space().degree;  // re-promote

  std::vector<int> loc(n, -1);
  std::vector<int> all(n);
  for (int c = 0; c < n; ++c) all[c] = c;

  for (int round = 1;; ++round) {
    if (round > n + 1) throw StepFailure("transport: order-reduction loop did not settle");
    st.traversals = round;
    const UnitResult r = multi_cell_newton(sys, s, all, opt, loc);
    if (!r.converged) throw StepFailure("transport: global Newton did not converge");
    st.global_iters += r.iters;
    for (int c = 0; c < n; ++c) st.cell_iters[c] += r.iters;
    const std::vector<int> demoted = detail::demotion_pass(sys, s, opt);
    if (demoted.empty()) break;
    st.demoted_cells += static_cast<int>(demoted.size());
  }

  detail::check_means(sys, s, opt);
  detail::mass_audit(sys, s, st);
  detail::finalize_counts(st);
  return st;
}

}  // namespace topoflow
