#include <catch2/catch_amalgamated.hpp>

#include "topoflow/pressure.hpp"

using namespace topoflow;
using Catch::Approx;

namespace {

FluidModel unit_fluid(double c_w = 0.0, double c_o = 0.0) {
  FluidModel f;
  f.p_ref = 100.0 * bar;
  f.water.mu_ref = 1.0 * centipoise;
  f.oil.mu_ref = 2.0 * centipoise;
  f.water.compr = c_w;
  f.oil.compr = c_o;
  f.water.rho_surf = 1000.0;
  f.oil.rho_surf = 800.0;
  f.validate();
  return f;
}

WellSpec rate_well(const std::string& name, double q, int cell, double wi) {
  WellSpec w;
  w.name = name;
  w.control = WellControl::rate;
  w.target = q;
  w.completions.push_back({cell, wi});
  return w;
}

WellSpec bhp_well(const std::string& name, double p, int cell, double wi) {
  WellSpec w;
  w.name = name;
  w.control = WellControl::bhp;
  w.target = p;
  w.completions.push_back({cell, wi});
  return w;
}

}  // namespace

TEST_CASE("peaceman well index matches hand-computed values") {
  // isotropic square cell: r_eq = 0.14 sqrt(2) dx
  CHECK(peaceman_wi(1e-13, 1e-13, 10.0, 10.0, 2.0) ==
        Approx(4.2089497836524743e-13).epsilon(1e-12));
  // anisotropic with skin
  CHECK(peaceman_wi(1e-13, 4e-13, 10.0, 20.0, 2.0, 0.1, 0.5) ==
        Approx(6.660656372713386e-13).epsilon(1e-12));
  // equivalent radius below the well radius must be rejected
  CHECK_THROWS_AS(peaceman_wi(1e-13, 1e-13, 0.1, 0.1, 1.0), ConfigError);
}

TEST_CASE("transmissibility is the harmonic half-trans combination") {
  const PolyMesh m = build_cartesian_2d(2, 1, 2.0, 1.0);
  RockProperties rock = RockProperties::uniform(2, 0.2, 1e-13);
  rock.perm[1] = {4e-13, 4e-13, 4e-13};
  const auto trans = compute_transmissibilities(m, rock);
  REQUIRE(m.interior_faces.size() == 1u);
  // half-trans: A k / d = 1 * k / 0.5 -> 2e-13 and 8e-13, harmonic 1.6e-13
  CHECK(trans[m.interior_faces[0]] == Approx(1.6e-13).epsilon(1e-13));
  for (int f = 0; f < m.n_faces(); ++f)
    if (m.faces[f].neighbor < 0) CHECK(trans[f] == 0.0);
}

TEST_CASE("incompressible chain carries the injected rate through every face") {
  const int nx = 5;
  const PolyMesh m = build_cartesian_2d(nx, 1, 5.0, 1.0);
  const RockProperties rock = RockProperties::uniform(nx, 0.2, 1e-13);
  const FluidModel fluid = unit_fluid();
  const auto trans = compute_transmissibilities(m, rock);
  const double q = 1.0e-6;
  const std::vector<WellSpec> wells = {rate_well("I", q, 0, 1e-12),
                                       bhp_well("P", 95.0 * bar, nx - 1, 1e-12)};
  const std::vector<double> sw(nx, 0.5), p0(nx, 100.0 * bar);
  const auto sol = solve_pressure(m, rock, fluid, wells, sw, p0, 1000.0, trans);

  for (int f : m.interior_faces) CHECK(sol.flux.v[f] == Approx(q).epsilon(1e-9));
  CHECK(sol.wells[1].q_total[0] == Approx(-q).epsilon(1e-9));
  CHECK(sol.wells[1].bhp == Approx(95.0 * bar));
  // pressure drop per face is q / (T lambda_t), cells in a row
  const Mobilities mob = fluid.mobility_clamped(0.5, sol.p[0]);
  const double lt = mob.lw + mob.lo;
  for (int c = 0; c + 1 < nx; ++c)
    CHECK(sol.p[c] - sol.p[c + 1] ==
          Approx(q / (trans[m.interior_faces[0]] * lt)).epsilon(1e-7));
  // rate well reports a finite derived bottom-hole pressure above the cell
  CHECK(sol.wells[0].bhp > sol.p[0]);
  // producer drawdown consistency: q = WI * (lw+lo) * (bhp - p_cell)
  const Mobilities mp = fluid.mobility_clamped(0.5, sol.p[nx - 1]);
  CHECK(sol.wells[1].q_total[0] ==
        Approx(1e-12 * (mp.lw + mp.lo) * (95.0 * bar - sol.p[nx - 1])).epsilon(1e-9));
}

TEST_CASE("cell-wise volume conservation for incompressible flow") {
  const PolyMesh m = build_cartesian_2d(4, 4, 4.0, 4.0);
  const RockProperties rock = RockProperties::uniform(16, 0.25, 2e-13);
  const FluidModel fluid = unit_fluid();
  const auto trans = compute_transmissibilities(m, rock);
  const double q = 3.0e-6;
  const std::vector<WellSpec> wells = {rate_well("I", q, 0, 1e-12),
                                       bhp_well("P", 90.0 * bar, 15, 1e-12)};
  std::vector<double> sw(16);
  for (int c = 0; c < 16; ++c) sw[c] = 0.2 + 0.03 * c;  // nonuniform mobilities
  const std::vector<double> p0(16, 100.0 * bar);
  const auto sol = solve_pressure(m, rock, fluid, wells, sw, p0, 500.0, trans);
  for (int c = 0; c < 16; ++c) {
    double div = 0.0;
    for (int f : m.cells[c].faces)
      if (m.faces[f].neighbor >= 0) div += m.outward_sign(f, c) * sol.flux.v[f];
    double src = 0.0;
    if (c == 0) src = q;
    if (c == 15) src = sol.wells[1].q_total[0];
    CHECK(div == Approx(src).margin(1e-6 * q));
  }
}

TEST_CASE("incompressible system without a pressure datum is rejected") {
  const PolyMesh m = build_cartesian_2d(2, 1, 2.0, 1.0);
  const RockProperties rock = RockProperties::uniform(2, 0.2, 1e-13);
  const FluidModel fluid = unit_fluid();
  const auto trans = compute_transmissibilities(m, rock);
  const std::vector<double> sw(2, 0.5), p0(2, 100.0 * bar);
  // only rate wells
  CHECK_THROWS_AS(solve_pressure(m, rock, fluid, {rate_well("I", 1e-7, 0, 1e-12)}, sw, p0,
                                 100.0, trans),
                  ConfigError);
  // no wells at all
  CHECK_THROWS_AS(solve_pressure(m, rock, fluid, {}, sw, p0, 100.0, trans), ConfigError);
  // a bhp well or compressibility provides the datum
  CHECK_NOTHROW(
      solve_pressure(m, rock, fluid, {bhp_well("P", 99.0 * bar, 1, 1e-12)}, sw, p0, 100.0, trans));
  const FluidModel comp = unit_fluid(4e-10, 9e-10);
  CHECK_NOTHROW(solve_pressure(m, rock, comp, {}, sw, p0, 100.0, trans));
}

TEST_CASE("hydrostatic single-phase column is at rest") {
  // water-filled vertical column with an exactly hydrostatic initial state:
  // the converged solution keeps zero flux and zero well rate.
  const int ny = 8;
  const PolyMesh m = build_cartesian_2d(1, ny, 1.0, 8.0);
  const RockProperties rock = RockProperties::uniform(ny, 0.2, 1e-13);
  FluidModel fluid = unit_fluid();
  fluid.gravity = 9.81;
  fluid.validate();
  const auto trans = compute_transmissibilities(m, rock);
  std::vector<double> sw(ny, 1.0), p0(ny);
  const double p_top = 100.0 * bar;
  const double y_top = m.cells[ny - 1].centroid[1];
  for (int c = 0; c < ny; ++c)
    p0[c] = p_top + fluid.water.rho_surf * 9.81 * (y_top - m.cells[c].centroid[1]);
  const std::vector<WellSpec> wells = {bhp_well("datum", p0[ny - 1], ny - 1, 1e-12)};
  const auto sol = solve_pressure(m, rock, fluid, wells, sw, p0, 1000.0, trans);
  for (int f : m.interior_faces) CHECK(std::abs(sol.flux.v[f]) < 1e-18);
  CHECK(std::abs(sol.wells[0].q_total[0]) < 1e-18);
  for (int c = 0; c < ny; ++c) CHECK(sol.p[c] == Approx(p0[c]).epsilon(1e-12));
  // gravity ingredients: g = T (rho_w - rho_o) g dz with dz owner minus
  // neighbor vertical coordinates
  for (int f : m.interior_faces) {
    const int i = m.faces[f].owner, j = m.faces[f].neighbor;
    const double dz = m.cells[i].centroid[1] - m.cells[j].centroid[1];
    CHECK(sol.flux.dz[f] == Approx(dz));
    const double rho_w =
        0.5 * (fluid.rho_w(sol.p[i]) + fluid.rho_w(sol.p[j]));
    const double rho_o =
        0.5 * (fluid.rho_o(sol.p[i]) + fluid.rho_o(sol.p[j]));
    CHECK(sol.flux.g[f] == Approx(trans[f] * (rho_w - rho_o) * 9.81 * dz).epsilon(1e-12));
  }
}

TEST_CASE("rate wells split across completions by deliverability") {
  const PolyMesh m = build_cartesian_2d(3, 1, 3.0, 1.0);
  const RockProperties rock = RockProperties::uniform(3, 0.2, 1e-13);
  const FluidModel fluid = unit_fluid(4e-10, 9e-10);
  const auto trans = compute_transmissibilities(m, rock);
  WellSpec inj = rate_well("I", 2e-6, 0, 1e-12);
  inj.completions.push_back({1, 3e-12});  // same fluid state: share ratio = wi ratio
  const std::vector<double> sw(3, 0.5), p0(3, 100.0 * bar);
  const auto sol = solve_pressure(m, rock, fluid, {inj}, sw, p0, 100.0, trans);
  CHECK(sol.wells[0].q_total[0] + sol.wells[0].q_total[1] == Approx(2e-6).epsilon(1e-14));
  CHECK(sol.wells[0].q_total[1] == Approx(3.0 * sol.wells[0].q_total[0]).epsilon(1e-12));
  // injected stream honors water_fraction = 1
  CHECK(sol.wells[0].rate_w() == Approx(2e-6).epsilon(1e-14));
  CHECK(sol.wells[0].rate_o() == Approx(0.0).margin(1e-20));
}

TEST_CASE("pressure solve is deterministic") {
  const PolyMesh m = build_cartesian_2d(6, 6, 6.0, 6.0);
  const RockProperties rock = RockProperties::uniform(36, 0.2, 1e-13, 1e-10, 100.0 * bar);
  const FluidModel fluid = unit_fluid(4e-10, 9e-10);
  const auto trans = compute_transmissibilities(m, rock);
  const std::vector<WellSpec> wells = {rate_well("I", 1e-6, 0, 1e-12),
                                       bhp_well("P", 90.0 * bar, 35, 1e-12)};
  std::vector<double> sw(36, 0.3), p0(36, 100.0 * bar);
  const auto a = solve_pressure(m, rock, fluid, wells, sw, p0, 1e4, trans);
  const auto b = solve_pressure(m, rock, fluid, wells, sw, p0, 1e4, trans);
  REQUIRE(a.p.size() == b.p.size());
  for (std::size_t i = 0; i < a.p.size(); ++i) CHECK(a.p[i] == b.p[i]);
  for (int f : m.interior_faces) CHECK(a.flux.v[f] == b.flux.v[f]);
}

TEST_CASE("well validation") {
  const PolyMesh m = build_cartesian_2d(2, 1, 2.0, 1.0);
  const RockProperties rock = RockProperties::uniform(2, 0.2, 1e-13);
  const FluidModel fluid = unit_fluid(1e-10, 1e-10);
  const auto trans = compute_transmissibilities(m, rock);
  const std::vector<double> sw(2, 0.5), p0(2, 100.0 * bar);
  WellSpec bad;
  bad.name = "empty";
  CHECK_THROWS_AS(solve_pressure(m, rock, fluid, {bad}, sw, p0, 100.0, trans), ConfigError);
  CHECK_THROWS_AS(solve_pressure(m, rock, fluid, {rate_well("oob", 1e-7, 7, 1e-12)}, sw, p0,
                                 100.0, trans),
                  ConfigError);
}
