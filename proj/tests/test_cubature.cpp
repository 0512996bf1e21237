#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "meshgen.hpp"
#include "oracles.hpp"
#include "topoflow/cubature.hpp"

using namespace topoflow;
using Catch::Approx;

namespace {

// Relative mismatch between a cubature rule (normalized weights) and the
// independent simplex integrator, maximized over all monomials of total
// degree <= deg.
double worst_moment_error(const PolyMesh& m, int cell, const CubatureRule& rule, int deg) {
  double worst = 0.0;
  const double vol = m.cells[cell].volume;
  for (int a = 0; a <= deg; ++a)
    for (int b = 0; a + b <= deg; ++b)
      for (int c = 0; a + b + c <= deg; ++c) {
        if (m.dim == 2 && c > 0) continue;
        const auto mono = [&](const Vec3& x) {
          return std::pow(x[0], a) * std::pow(x[1], b) * std::pow(x[2], c);
        };
        double got = 0.0;
        for (const QuadPoint& q : rule.points) got += q.w * mono(q.x);
        got *= vol;
        const double want = oracle::integrate_cell(m, cell, mono);
        // scale by the cell's size so the comparison is unit-free
        const double scale =
            vol * std::pow(m.cell_diameter(cell) + norm(m.cells[cell].centroid), a + b + c);
        worst = std::max(worst, std::abs(got - want) / scale);
      }
  return worst;
}

}  // namespace

TEST_CASE("gauss segments integrate polynomials exactly") {
  for (int prec : {1, 3, 5, 7}) {
    const auto pts = quadrules::gauss_segment(prec);
    for (int deg = 0; deg <= prec; ++deg) {
      double got = 0.0;
      for (const auto& g : pts) got += g.w * std::pow(g.x, deg);
      const double want = (deg % 2 == 1) ? 0.0 : 2.0 / (deg + 1);  // int_{-1}^{1} x^deg
      CHECK(got == Approx(want).margin(1e-14));
    }
  }
}

TEST_CASE("triangle and tet rules are exact on reference simplices") {
  // reference triangle (0,0),(1,0),(0,1): int x^a y^b = a! b! / (a+b+2)!
  const auto fact = [](int n) {
    double r = 1.0;
    for (int i = 2; i <= n; ++i) r *= i;
    return r;
  };
  const Vec3 t0{0, 0, 0}, t1{1, 0, 0}, t2{0, 1, 0};
  for (int prec : {1, 2, 3, 4}) {
    const auto rule = quadrules::triangle_rule(prec);
    for (int a = 0; a + 0 <= prec; ++a)
      for (int b = 0; a + b <= prec; ++b) {
        double got = 0.0;
        for (const auto& bp : rule) {
          const Vec3 x = bp.l[0] * t0 + bp.l[1] * t1 + bp.l[2] * t2;
          got += bp.w * std::pow(x[0], a) * std::pow(x[1], b);
        }
        got *= 0.5;  // reference area
        const double want = fact(a) * fact(b) / fact(a + b + 2);
        CHECK(got == Approx(want).margin(1e-14));
      }
  }
  // reference tet: int x^a y^b z^c = a! b! c! / (a+b+c+3)!
  const Vec3 d0{0, 0, 0}, d1{1, 0, 0}, d2{0, 1, 0}, d3{0, 0, 1};
  for (int prec : {1, 2, 3}) {
    const auto rule = quadrules::tet_rule(prec);
    for (int a = 0; a <= prec; ++a)
      for (int b = 0; a + b <= prec; ++b)
        for (int c = 0; a + b + c <= prec; ++c) {
          double got = 0.0;
          for (const auto& bp : rule) {
            const Vec3 x = bp.l[1] * d1 + bp.l[2] * d2 + bp.l[3] * d3;
            (void)d0;
            got += bp.w * std::pow(x[0], a) * std::pow(x[1], b) * std::pow(x[2], c);
          }
          got /= 6.0;  // reference volume
          const double want = fact(a) * fact(b) * fact(c) / fact(a + b + c + 3);
          CHECK(got == Approx(want).margin(1e-13));
        }
  }
}

TEST_CASE("subdivision rule reproduces simplex-integrator moments") {
  std::mt19937 rng(21);
  for (int t = 0; t < 5; ++t) {
    const PolyMesh m = meshgen::polygon_cell(meshgen::random_convex_polygon(rng, 4 + t));
    const auto pts = subdivision_rule(m, 0, 2);
    double vol = 0.0;
    for (const auto& q : pts) vol += q.w;
    CHECK(vol == Approx(m.cells[0].volume).epsilon(1e-13));
    for (int a = 0; a <= 2; ++a)
      for (int b = 0; a + b <= 2; ++b) {
        const auto mono = [&](const Vec3& x) { return std::pow(x[0], a) * std::pow(x[1], b); };
        double got = 0.0;
        for (const auto& q : pts) got += q.w * mono(q.x);
        CHECK(got == Approx(oracle::integrate_cell(m, 0, mono)).epsilon(1e-12).margin(1e-13));
      }
  }
}

TEST_CASE("moment-fitted cell rules are exact to 1e-10 on random polygons") {
  std::mt19937 rng(31);
  for (int t = 0; t < 25; ++t) {
    const PolyMesh m = meshgen::polygon_cell(meshgen::random_convex_polygon(rng, 3 + t % 6));
    const CubatureRule rule = build_cubature(m, 0, 2);
    CHECK_FALSE(rule.fallback);
    CHECK(worst_moment_error(m, 0, rule, 2) < 1e-10);
    double sw = 0.0;
    for (const QuadPoint& q : rule.points) {
      sw += q.w;
      CHECK(m.point_in_cell(0, q.x, 1e-9));  // interior points only
    }
    CHECK(sw == Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("moment-fitted cell rules are exact to 1e-10 on random polyhedra") {
  std::mt19937 rng(41);
  for (int t = 0; t < 8; ++t) {
    const PolyMesh m = meshgen::random_prism_cell(rng, 3 + t % 5);
    const CubatureRule rule = build_cubature(m, 0, 2);
    CHECK_FALSE(rule.fallback);
    CHECK(worst_moment_error(m, 0, rule, 2) < 1e-10);
  }
}

TEST_CASE("face quadrature integrates polynomials on faces") {
  std::mt19937 rng(51);
  // 2D edges
  const PolyMesh m2 = meshgen::polygon_cell(meshgen::random_convex_polygon(rng, 5));
  for (int f = 0; f < m2.n_faces(); ++f) {
    // monomials x^a y have total degree a + 1, so ask for that precision
    const CubatureRule rule = build_face_quadrature(m2, f, 4);
    for (int a = 0; a <= 3; ++a) {
      const auto mono = [&](const Vec3& x) { return std::pow(x[0], a) * x[1]; };
      double got = 0.0;
      for (const QuadPoint& q : rule.points) got += q.w * mono(q.x);
      CHECK(got == Approx(oracle::integrate_face(m2, f, mono)).epsilon(1e-11).margin(1e-12));
    }
  }
  // 3D planar polygons
  const PolyMesh m3 = meshgen::random_prism_cell(rng, 5);
  for (int f = 0; f < m3.n_faces(); ++f) {
    const CubatureRule rule = build_face_quadrature(m3, f, 3);
    double area = 0.0;
    for (const QuadPoint& q : rule.points) area += q.w;
    CHECK(area == Approx(m3.faces[f].area).epsilon(1e-11));
    for (int a = 0; a <= 2; ++a) {
      const auto mono = [&](const Vec3& x) { return std::pow(x[0], a) * x[2]; };
      double got = 0.0;
      for (const QuadPoint& q : rule.points) got += q.w * mono(q.x);
      CHECK(got == Approx(oracle::integrate_face(m3, f, mono)).epsilon(1e-10).margin(1e-11));
    }
  }
}

TEST_CASE("velocity interpolation is exact for uniform flow") {
  // With face values q_f = area * (v . n) of a constant field, the
  // first-moment reconstruction returns exactly that field on any cell.
  std::mt19937 rng(61);
  const PolyMesh vm = meshgen::voronoi_mesh_2d(25, 2.0, 1.5, 8);
  const Vec3 v{1.3, -0.4, 0.0};
  std::vector<double> face_values(vm.n_faces());
  for (int f = 0; f < vm.n_faces(); ++f)
    face_values[f] = vm.faces[f].area * dot(v, vm.faces[f].normal);
  for (int c = 0; c < vm.n_cells(); ++c) {
    const Vec3 got = interpolate_velocity(vm, c, face_values);
    CHECK(got[0] == Approx(v[0]).epsilon(1e-12));
    CHECK(got[1] == Approx(v[1]).epsilon(1e-12));
  }
  // same identity on a polyhedron
  const PolyMesh pm = meshgen::random_prism_cell(rng, 6);
  const Vec3 w{0.2, 0.7, -1.1};
  std::vector<double> fv(pm.n_faces());
  for (int f = 0; f < pm.n_faces(); ++f)
    fv[f] = pm.faces[f].area * dot(w, pm.faces[f].normal);
  const Vec3 got = interpolate_velocity(pm, 0, fv);
  for (int a = 0; a < 3; ++a) CHECK(got[a] == Approx(w[a]).margin(1e-12));
}
