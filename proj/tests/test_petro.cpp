#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "oracles.hpp"
#include "topoflow/petro.hpp"

using namespace topoflow;
using Catch::Approx;

namespace {
FluidModel demo_fluid() {
  FluidModel f;
  f.p_ref = 200.0 * bar;
  f.water.mu_ref = 1.0 * centipoise;
  f.oil.mu_ref = 4.0 * centipoise;
  f.water.compr = 4.0e-10;
  f.oil.compr = 9.0e-10;
  f.water.visc_compr = 2.0e-11;
  f.oil.visc_compr = 5.0e-11;
  f.water.rho_surf = 1000.0;
  f.oil.rho_surf = 820.0;
  f.swr = 0.15;
  f.sor = 0.1;
  f.nw = 2.5;
  f.no = 1.8;
  f.validate();
  return f;
}
}  // namespace

TEST_CASE("relative permeability endpoints") {
  const FluidModel f = demo_fluid();
  CHECK(f.relperm(f.swr).krw == Approx(0.0).margin(1e-15));
  CHECK(f.relperm(1.0 - f.sor).krw == Approx(1.0).epsilon(1e-14));
  CHECK(f.relperm(1.0 - f.sor).kro == Approx(0.0).margin(1e-15));
  CHECK(f.relperm(f.swr).kro == Approx(1.0).epsilon(1e-14));
  // flat extension outside the mobile window
  CHECK(f.relperm(0.05).krw == 0.0);
  CHECK(f.relperm(0.05).kro == 1.0);
  CHECK(f.relperm(0.97).krw == 1.0);
  CHECK(f.relperm(0.97).kro == 0.0);
}

TEST_CASE("relperm derivatives match finite differences") {
  const FluidModel f = demo_fluid();
  for (double sw : {0.2, 0.35, 0.5, 0.62, 0.8}) {
    const RelPerm r = f.relperm(sw);
    const double dw = oracle::central_diff([&](double s) { return f.relperm(s).krw; }, sw);
    const double doo = oracle::central_diff([&](double s) { return f.relperm(s).kro; }, sw);
    CHECK(r.dkrw == Approx(dw).margin(1e-6));
    CHECK(r.dkro == Approx(doo).margin(1e-6));
  }
}

TEST_CASE("shrinkage, density and viscosity are linear in pressure") {
  const FluidModel f = demo_fluid();
  CHECK(f.b_w(f.p_ref) == Approx(1.0));
  CHECK(f.b_o(f.p_ref) == Approx(1.0));
  const double dp = 25.0 * bar;
  CHECK(f.b_w(f.p_ref + dp) == Approx(1.0 + f.water.compr * dp).epsilon(1e-14));
  CHECK(f.b_o(f.p_ref - dp) == Approx(1.0 - f.oil.compr * dp).epsilon(1e-14));
  CHECK(f.rho_w(f.p_ref) == Approx(1000.0));
  CHECK(f.mu_w(f.p_ref) == Approx(1.0 * centipoise));
  CHECK(f.mu_o(f.p_ref + dp) == Approx(4.0 * centipoise * (1.0 + 5.0e-11 * dp)).epsilon(1e-14));
  // derivative accessors agree with finite differences
  const double p0 = 180.0 * bar;
  CHECK(f.db_w_dp() == Approx(oracle::central_diff([&](double p) { return f.b_w(p); }, p0, 1.0)));
  CHECK(f.drho_o_dp() ==
        Approx(oracle::central_diff([&](double p) { return f.rho_o(p); }, p0, 1.0)));
  CHECK(f.dmu_w_dp() ==
        Approx(oracle::central_diff([&](double p) { return f.mu_w(p); }, p0, 1.0)).margin(1e-22));
}

TEST_CASE("mobility and fractional flow derivatives match finite differences") {
  const FluidModel f = demo_fluid();
  const double p = 195.0 * bar;
  for (double sw : {0.2, 0.4, 0.55, 0.7, 0.85}) {
    const Mobilities m = f.mobility(sw, p);
    CHECK(m.dlw_ds ==
          Approx(oracle::central_diff([&](double s) { return f.mobility(s, p).lw; }, sw))
              .margin(1e-3 * std::abs(m.lw) + 1e-9));
    CHECK(m.dlo_ds ==
          Approx(oracle::central_diff([&](double s) { return f.mobility(s, p).lo; }, sw))
              .margin(1e-3 * std::abs(m.lo) + 1e-9));
    CHECK(m.dlw_dp ==
          Approx(oracle::central_diff([&](double q) { return f.mobility(sw, q).lw; }, p, 1.0))
              .margin(1e-12 * std::abs(m.lw) + 1e-18));
    const FracFlow ff = f.frac_flow(sw, p);
    CHECK(ff.fw + ff.fo == Approx(1.0).epsilon(1e-14));
    CHECK(ff.dfw_ds ==
          Approx(oracle::central_diff([&](double s) { return f.frac_flow(s, p).fw; }, sw))
              .margin(1e-5));
  }
}

TEST_CASE("mobility is monotone in saturation") {
  const FluidModel f = demo_fluid();
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> us(0.0, 1.0);
  const double p = 210.0 * bar;
  double prev = us(rng);
  for (int t = 0; t < 300; ++t) {
    const double a = us(rng), b = us(rng);
    const double lo_s = std::min(a, b), hi_s = std::max(a, b);
    CHECK(f.mobility_clamped(hi_s, p).lw >= f.mobility_clamped(lo_s, p).lw - 1e-15);
    CHECK(f.mobility_clamped(hi_s, p).lo <= f.mobility_clamped(lo_s, p).lo + 1e-15);
    prev = a;
  }
  (void)prev;
}

TEST_CASE("capillary table interpolation and flat extrapolation") {
  FluidModel f = demo_fluid();
  f.pc_table = {{0.1, 0.8 * bar}, {0.5, 0.3 * bar}, {0.9, 0.0}};
  f.validate();
  CHECK(f.pc(0.1).first == Approx(0.8 * bar));
  CHECK(f.pc(0.5).first == Approx(0.3 * bar));
  CHECK(f.pc(0.3).first == Approx(0.55 * bar));  // midpoint of first segment
  CHECK(f.pc(0.3).second == Approx((0.3 - 0.8) * bar / 0.4));
  // flat outside, zero slope
  CHECK(f.pc(0.0).first == Approx(0.8 * bar));
  CHECK(f.pc(0.0).second == 0.0);
  CHECK(f.pc(1.0).first == Approx(0.0).margin(1e-12));
  CHECK(f.pc(1.0).second == 0.0);
  // interior slope matches finite differences
  CHECK(f.pc(0.7).second ==
        Approx(oracle::central_diff([&](double s) { return f.pc(s).first; }, 0.7)).epsilon(1e-6));
}

TEST_CASE("validate rejects inconsistent fluids") {
  FluidModel f = demo_fluid();
  SECTION("residuals fill the window") {
    f.swr = 0.6;
    f.sor = 0.5;
    CHECK_THROWS_AS(f.validate(), ConfigError);
  }
  SECTION("sub-linear Corey exponent") {
    f.nw = 0.5;
    CHECK_THROWS_AS(f.validate(), ConfigError);
  }
  SECTION("non-monotone capillary table") {
    f.pc_table = {{0.2, 0.1 * bar}, {0.6, 0.5 * bar}};
    CHECK_THROWS_AS(f.validate(), ConfigError);
  }
  SECTION("negative viscosity") {
    f.water.mu_ref = -1.0;
    CHECK_THROWS_AS(f.validate(), ConfigError);
  }
}

TEST_CASE("saturations far outside the admissible window throw") {
  const FluidModel f = demo_fluid();
  CHECK_THROWS_AS(f.relperm(-0.2), std::domain_error);
  CHECK_THROWS_AS(f.relperm(1.2), std::domain_error);
  CHECK_NOTHROW(f.relperm(-0.5e-4));  // inside the overshoot slack
  CHECK_NOTHROW(f.relperm(1.0 + 0.5e-4));
}

TEST_CASE("rock porosity, compressibility and pore volume") {
  const PolyMesh m = build_cartesian_2d(2, 2, 2.0, 2.0);
  RockProperties rock = RockProperties::uniform(4, 0.25, 1e-13, 5e-10, 200.0 * bar);
  CHECK(rock.porosity(0, 200.0 * bar) == Approx(0.25));
  const double dp = 10.0 * bar;
  CHECK(rock.porosity(1, 200.0 * bar + dp) == Approx(0.25 * (1.0 + 5e-10 * dp)).epsilon(1e-14));
  CHECK(rock.dporosity_dp(2) ==
        Approx(oracle::central_diff([&](double p) { return rock.porosity(2, p); }, 180.0 * bar,
                                    1.0)));
  CHECK(rock.pore_volume(m, 0, 200.0 * bar) == Approx(0.25 * 1.0).epsilon(1e-14));
}

TEST_CASE("weighting factors are reciprocal shrinkage factors") {
  const FluidModel f = demo_fluid();
  const double p = 230.0 * bar;
  const auto [ww, wo] = weighting_factors(f, p);
  CHECK(ww == Approx(1.0 / f.b_w(p)).epsilon(1e-14));
  CHECK(wo == Approx(1.0 / f.b_o(p)).epsilon(1e-14));
}

TEST_CASE("gravity vector points down the vertical coordinate") {
  FluidModel f = demo_fluid();
  f.gravity = 9.81;
  CHECK(f.gravity_vector(2)[1] == Approx(-9.81));
  CHECK(f.gravity_vector(2)[0] == 0.0);
  CHECK(f.gravity_vector(3)[2] == Approx(-9.81));
  f.gravity = 0.0;
  CHECK(norm(f.gravity_vector(3)) == 0.0);
}
