#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#include "topoflow/core.hpp"
#include "topoflow/dgspace.hpp"
#include "topoflow/fluxgraph.hpp"
#include "topoflow/mesh.hpp"
#include "topoflow/petro.hpp"
#include "topoflow/pressure.hpp"
#include "topoflow/transport.hpp"

namespace topoflow {

struct Schedule {
  std::vector<double> report_times;  // [s], strictly increasing, all > 0
  double dt_init = 86400.0;
  double dt_min = 1.0;
  double dt_max = 30.0 * 86400.0;
  double growth = 1.25;
  double cut = 0.5;

  void validate() const {
    if (report_times.empty()) throw ConfigError("schedule: no report times");
    double prev = 0.0;
    for (double t : report_times) {
      if (!(t > prev)) throw ConfigError("schedule: report times must be strictly increasing");
      prev = t;
    }
    if (!(dt_min > 0.0) || !(dt_init >= dt_min) || !(dt_max >= dt_init))
      throw ConfigError("schedule: need 0 < dt_min <= dt_init <= dt_max");
    if (!(growth >= 1.0) || !(cut > 0.0) || !(cut < 1.0))
      throw ConfigError("schedule: need growth >= 1 and 0 < cut < 1");
  }
};

enum class SolveMode { reordered, global, compare };

struct SimCase {
  PolyMesh mesh;
  RockProperties rock;
  FluidModel fluid;
  std::vector<WellSpec> wells;
  Schedule schedule;
  int degree = 0;
  SolveMode mode = SolveMode::reordered;
  int block_size = 1;
  int threads = 1;
  TransportOptions transport;
  PressureOptions pressure;
  std::vector<double> p0;   // [Pa] per cell
  std::vector<double> sw0;  // per cell
};

struct WellRecord {
  double q_w = 0.0;   // reservoir-volume rates, positive into the reservoir
  double q_o = 0.0;
  double bhp = 0.0;
  double wcut = 0.0;  // producer water cut at the end-of-step cell state
};

struct StepRecord {
  int step = 0;
  double t = 0.0;   // time at the end of the step [s]
  double dt = 0.0;
  int pressure_iters = 0;
  TransportStats transport;
  int compare_global_iters = 0;  // compare mode only
  double discrepancy = 0.0;      // compare mode: max dof difference
  std::vector<WellRecord> wells;
};

struct Snapshot {
  double t = 0.0;
  SatField s;
  std::vector<double> p;
};

struct RunReport {
  std::vector<StepRecord> steps;
  std::vector<Snapshot> snapshots;  // one per report time
  double injected_volume = 0.0;     // reservoir volume, sum of positive well rates x dt
  double produced_volume = 0.0;     // magnitude of the negative side
  double cum_water_balance = 0.0;   // sum of per-step audit errors
  double max_water_balance = 0.0;
  double min_mean = 1.0, max_mean = 0.0;  // extremes over all steps and cells
  SparsityPattern first_pattern;    // permuted Jacobian pattern of step 1
  std::string first_histogram;      // component-size histogram of step 1
  long long total_transport_iters = 0;
  int total_steps = 0, cut_count = 0;
};

namespace detail {

inline double producer_wcut(const FluidModel& fluid, double sw, double p) {
  const Mobilities mob = fluid.mobility_clamped(sw, p);
  const double lt = mob.lw + mob.lo;
  return lt > 0.0 ? mob.lw / lt : 0.0;
}

}  // namespace detail

// Sequential time loop: pressure solve with frozen saturations, flux-graph
// construction and ordering, then the transport step, once per time step (no
// outer iterations). A failed stage cuts the step and retries; success grows
// it. Steps land exactly on every report time.
inline RunReport run_case(const SimCase& cs) {
  const PolyMesh& m = cs.mesh;
  const int n = m.n_cells();
  cs.fluid.validate();
  cs.schedule.validate();
  if (cs.degree < 0 || cs.degree > 1) throw ConfigError("degree must be 0 or 1");
  if (cs.degree >= 1 && cs.fluid.has_capillary())
    throw ConfigError("capillary pressure is only supported with degree 0");
  if (static_cast<int>(cs.p0.size()) != n || static_cast<int>(cs.sw0.size()) != n)
    throw ConfigError("initial state size does not match the mesh");
  if (cs.block_size < 1) throw ConfigError("block size must be >= 1");
  for (double s0 : cs.sw0)
    if (s0 < -cs.fluid.domain_eps || s0 > 1.0 + cs.fluid.domain_eps)
      throw ConfigError("initial saturation outside [0, 1]");

  const DGSpace space = DGSpace::build(m, cs.degree, cs.threads);
  const std::vector<double> trans = compute_transmissibilities(m, cs.rock);

  SatField s = SatField::constant(space, 0.0);
  for (int c = 0; c < n; ++c) s.dof[static_cast<std::size_t>(c) * space.ndof] = cs.sw0[c];
  std::vector<double> p = cs.p0;

  RunReport rep;
  double t = 0.0;
  double dt = cs.schedule.dt_init;
  int step_no = 0;

  for (double target : cs.schedule.report_times) {
    while (t < target) {
      double dt_try = std::min(dt, target - t);
      if (target - t - dt_try < 1.0e-9 * target) dt_try = target - t;

      std::vector<double> sw_mean(n);
      for (int c = 0; c < n; ++c) sw_mean[c] = s.mean(space, c);

      try {
        const PressureSolution ps =
            solve_pressure(m, cs.rock, cs.fluid, cs.wells, sw_mean, p, dt_try, trans,
                           cs.pressure);
        const FluxGraph graph = build_flux_graph(m, ps.flux, cs.fluid, space, s, ps.p);
        const Ordering ord = condense_and_sort(graph);
        const std::vector<SolveUnit> units = block_partition(ord, cs.block_size);
        const TransportSystem sys(m, space, cs.fluid, cs.rock, ps.flux, cs.wells, ps.wells, s,
                                  p, ps.p, dt_try);

        StepRecord rec;
        SatField s_new = s;
        if (cs.mode == SolveMode::global) {
          rec.transport = solve_global_newton(sys, s_new, cs.transport);
          rec.transport.n_components = ord.n_components();
          rec.transport.n_cycles = ord.n_cycles();
          rec.transport.max_component = ord.max_component();
          rec.transport.mean_cycle_size = ord.mean_cycle_size();
        } else {
          rec.transport = transport_step(sys, graph, ord, units, s_new, cs.transport);
        }
        if (cs.mode == SolveMode::compare) {
          SatField s_glob = s;
          const TransportStats gst = solve_global_newton(sys, s_glob, cs.transport);
          rec.compare_global_iters = gst.global_iters;
          for (std::size_t i = 0; i < s_new.dof.size(); ++i)
            rec.discrepancy = std::max(rec.discrepancy, std::abs(s_new.dof[i] - s_glob.dof[i]));
        }

        if (rep.steps.empty()) {
          rep.first_pattern = permuted_sparsity(graph, ord, space.ndof);
          rep.first_histogram = component_histogram(ord);
        }

        s = std::move(s_new);
        p = ps.p;
        t += dt_try;
        if (target - t < 1.0e-9 * target) t = target;

        rec.step = ++step_no;
        rec.t = t;
        rec.dt = dt_try;
        rec.pressure_iters = ps.iterations;
        rec.wells.resize(cs.wells.size());
        for (std::size_t w = 0; w < cs.wells.size(); ++w) {
          WellRecord& wr = rec.wells[w];
          wr.bhp = ps.wells[w].bhp;
          for (std::size_t ci = 0; ci < cs.wells[w].completions.size(); ++ci) {
            const int cell = cs.wells[w].completions[ci].cell;
            const double qt = ps.wells[w].q_total[ci];
            if (qt >= 0.0) {
              wr.q_w += cs.wells[w].water_fraction * qt;
              wr.q_o += (1.0 - cs.wells[w].water_fraction) * qt;
            } else {
              const double fw = detail::producer_wcut(cs.fluid, s.mean(space, cell), ps.p[cell]);
              wr.q_w += fw * qt;
              wr.q_o += (1.0 - fw) * qt;
            }
            rep.injected_volume += std::max(qt, 0.0) * dt_try;
            rep.produced_volume -= std::min(qt, 0.0) * dt_try;
          }
          const double q_tot = wr.q_w + wr.q_o;
          wr.wcut = q_tot < 0.0 ? wr.q_w / q_tot : 0.0;
        }
        rep.cum_water_balance += rec.transport.water_balance;
        rep.max_water_balance = std::max(rep.max_water_balance, rec.transport.water_balance);
        rep.total_transport_iters += rec.transport.total_iters;
        for (int c = 0; c < n; ++c) {
          const double mean = s.mean(space, c);
          rep.min_mean = std::min(rep.min_mean, mean);
          rep.max_mean = std::max(rep.max_mean, mean);
        }
        rep.steps.push_back(std::move(rec));
        dt = std::min(dt_try * cs.schedule.growth, cs.schedule.dt_max);
      } catch (const StepFailure& e) {
        const double dt_next = dt_try * cs.schedule.cut;
        ++rep.cut_count;
        if (dt_next < cs.schedule.dt_min)
          throw RunAbort("time step underflow at t = " + std::to_string(t) + " s: " + e.what());
        dt = dt_next;
      }
    }
    rep.snapshots.push_back({t, s, p});
  }
  rep.total_steps = step_no;
  return rep;
}

// CSV report, one row per accepted step. Numbers print with %.17g so reruns
// are byte-identical. Schema is versioned by the first header line.
inline void write_steps_csv(const RunReport& rep, const std::vector<WellSpec>& wells,
                            std::ostream& out) {
  const auto g17 = [](double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return std::string(buf);
  };
  out << "# topoflow-steps-v1\n";
  out << "step,t,dt,pressure_iters,transport_iters,avg_iters_per_cell,max_cell_iters,"
         "active_cells,zero_iter_cells,traversals,demoted_cells,components,cycles,"
         "max_component,mean_cycle_size,gs_sweeps,gs_fallbacks,water_balance,oil_balance,"
         "global_iters,discrepancy";
  for (const WellSpec& w : wells)
    out << "," << w.name << "_qw," << w.name << "_qo," << w.name << "_bhp," << w.name
        << "_wcut";
  out << "\n";
  for (const StepRecord& r : rep.steps) {
    const TransportStats& ts = r.transport;
    out << r.step << "," << g17(r.t) << "," << g17(r.dt) << "," << r.pressure_iters << ","
        << ts.total_iters << "," << g17(ts.avg_iters_per_cell()) << "," << ts.max_cell_iters
        << "," << ts.active_cells << "," << ts.zero_iter_cells << "," << ts.traversals << ","
        << ts.demoted_cells << "," << ts.n_components << "," << ts.n_cycles << ","
        << ts.max_component << "," << g17(ts.mean_cycle_size) << "," << ts.gs_sweeps << ","
        << ts.gs_fallbacks << "," << g17(ts.water_balance) << "," << g17(ts.oil_balance) << ","
        << r.compare_global_iters << "," << g17(r.discrepancy);
    for (const WellRecord& w : r.wells)
      out << "," << g17(w.q_w) << "," << g17(w.q_o) << "," << g17(w.bhp) << ","
          << g17(w.wcut);
    out << "\n";
  }
}

}  // namespace topoflow
