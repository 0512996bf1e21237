#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "oracles.hpp"
#include "topoflow/basis.hpp"

using namespace topoflow;
using Catch::Approx;

TEST_CASE("legendre recursion against closed forms") {
  // P_0..P_4 have well-known closed forms; check values and derivatives.
  std::mt19937 rng(2);
  std::uniform_real_distribution<double> ux(-1.0, 1.0);
  for (int t = 0; t < 50; ++t) {
    const double x = ux(rng);
    CHECK(legendre_eval(0, x).first == 1.0);
    CHECK(legendre_eval(1, x).first == Approx(x));
    CHECK(legendre_eval(2, x).first == Approx(0.5 * (3.0 * x * x - 1.0)).margin(1e-14));
    CHECK(legendre_eval(3, x).first == Approx(0.5 * (5.0 * x * x * x - 3.0 * x)).margin(1e-14));
    CHECK(legendre_eval(4, x).first ==
          Approx((35.0 * x * x * x * x - 30.0 * x * x + 3.0) / 8.0).margin(1e-14));
    CHECK(legendre_eval(2, x).second == Approx(3.0 * x).margin(1e-14));
    CHECK(legendre_eval(3, x).second == Approx(0.5 * (15.0 * x * x - 3.0)).margin(1e-13));
  }
}

TEST_CASE("legendre orthogonality on [-1,1]") {
  // integrate P_i P_j with the tabulated 5-point Gauss rule (exact to degree
  // 9, enough for i + j <= 4 + 4): expect 2/(2i+1) on the diagonal.
  using oracle::detail::G5;
  for (int i = 0; i <= 4; ++i)
    for (int j = 0; j <= 4; ++j) {
      double sum = 0.0;
      for (int q = 0; q < 5; ++q) {
        const double x = G5::xi[q];
        sum += G5::wi[q] * legendre_eval(i, x).first * legendre_eval(j, x).first;
      }
      if (i == j)
        CHECK(sum == Approx(2.0 / (2.0 * i + 1.0)).epsilon(1e-12));
      else
        CHECK(std::abs(sum) < 1e-13);
    }
}

TEST_CASE("basis sizes follow the simplex dimension formula") {
  CHECK(basis_size(0, 2) == 1);
  CHECK(basis_size(1, 2) == 3);
  CHECK(basis_size(2, 2) == 6);
  CHECK(basis_size(0, 3) == 1);
  CHECK(basis_size(1, 3) == 4);
  CHECK(basis_size(2, 3) == 10);
  CHECK(BasisSet::make(2, 1).size() == 3);
  CHECK(BasisSet::make(3, 2).size() == 10);
}

TEST_CASE("dof 0 is the constant and degree-1 dofs are the scaled coordinates") {
  const BasisSet b = BasisSet::make(2, 1);
  const Vec3 c{3.0, -1.0, 0.0}, w{2.0, 4.0, 0.0};
  std::vector<double> v(b.size());
  b.eval(c, w, {3.5, 0.0, 0.0}, v.data());
  CHECK(v[0] == 1.0);
  CHECK(v[1] == Approx(0.5));   // (x - cx) / (wx/2) = 0.5/1
  CHECK(v[2] == Approx(0.5));   // (y - cy) / (wy/2) = 1/2
}

TEST_CASE("gradients match finite differences") {
  std::mt19937 rng(9);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int dim : {2, 3}) {
    const BasisSet b = BasisSet::make(dim, dim == 2 ? 3 : 2);
    const Vec3 c{0.4, -0.2, 0.7}, w{1.5, 0.8, 2.0};
    std::vector<double> vals(b.size());
    std::vector<Vec3> grads(b.size());
    for (int t = 0; t < 20; ++t) {
      Vec3 x = c;
      for (int a = 0; a < dim; ++a) x[a] += 0.5 * w[a] * u(rng);
      b.eval_grad(c, w, x, vals.data(), grads.data());
      for (int j = 0; j < b.size(); ++j) {
        for (int a = 0; a < dim; ++a) {
          const double fd = oracle::central_diff(
              [&](double t2) {
                Vec3 y = x;
                y[a] = t2;
                std::vector<double> vv(b.size());
                b.eval(c, w, y, vv.data());
                return vv[j];
              },
              x[a]);
          CHECK(grads[j][a] == Approx(fd).margin(1e-6));
        }
      }
    }
  }
}

TEST_CASE("eval and eval_grad return identical values") {
  const BasisSet b = BasisSet::make(3, 2);
  const Vec3 c{0.0, 0.0, 0.0}, w{2.0, 2.0, 2.0};
  std::vector<double> v1(b.size()), v2(b.size());
  std::vector<Vec3> g(b.size());
  const Vec3 x{0.3, -0.8, 0.55};
  b.eval(c, w, x, v1.data());
  b.eval_grad(c, w, x, v2.data(), g.data());
  for (int j = 0; j < b.size(); ++j) CHECK(v1[j] == v2[j]);
}

TEST_CASE("basis guards its arguments") {
  CHECK_THROWS_AS(BasisSet::make(1, 1), ConfigError);
  CHECK_THROWS_AS(BasisSet::make(2, 5), ConfigError);
  CHECK_THROWS_AS(legendre_eval(-1, 0.0), ConfigError);
}
