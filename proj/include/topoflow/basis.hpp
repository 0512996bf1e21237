#pragma once

#include <array>
#include <utility>
#include <vector>

#include "topoflow/core.hpp"

namespace topoflow {

// Legendre value and derivative at x from the three-term recursion
//   (k+1) P_{k+1} = (2k+1) x P_k - k P_{k-1},  P'_{k+1} = P'_{k-1} + (2k+1) P_k.
// Stable for the low orders used here; x may lie slightly outside [-1,1]
// because cells are scaled about their centroid, not the box center.
inline std::pair<double, double> legendre_eval(int n, double x) {
  if (n < 0) throw ConfigError("legendre_eval: order must be >= 0");
  double pm1 = 1.0, dm1 = 0.0;  // P_0
  if (n == 0) return {pm1, dm1};
  double p = x, d = 1.0;  // P_1
  for (int k = 1; k < n; ++k) {
    const double pn = ((2.0 * k + 1.0) * x * p - k * pm1) / (k + 1.0);
    const double dn = dm1 + (2.0 * k + 1.0) * p;
    pm1 = p;
    dm1 = d;
    p = pn;
    d = dn;
  }
  return {p, d};
}

inline int binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  long long r = 1;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return static_cast<int>(r);
}

// Number of polynomial dofs of total degree <= k in d dimensions.
inline int basis_size(int degree, int dim) { return binomial(degree + dim, dim); }

// Tensor-product Legendre basis of total degree <= `degree` on a cell's
// centroid-scaled coordinates xi_a = (x_a - c_a) / (dx_a / 2). Dof 0 is the
// constant; degree-1 dofs follow axis by axis, so truncating to the leading
// dof is the mean-preserving projection used by order reduction.
struct BasisSet {
  int dim = 0;
  int degree = 0;
  std::vector<std::array<int, 3>> exponents;

  static BasisSet make(int dim, int degree) {
    if (dim != 2 && dim != 3) throw ConfigError("basis: dimension must be 2 or 3");
    if (degree < 0 || degree > 4) throw ConfigError("basis: degree must be in [0,4]");
    BasisSet b;
    b.dim = dim;
    b.degree = degree;
    for (int total = 0; total <= degree; ++total) {
      if (dim == 2) {
        for (int i = total; i >= 0; --i) b.exponents.push_back({i, total - i, 0});
      } else {
        for (int i = total; i >= 0; --i)
          for (int j = total - i; j >= 0; --j) b.exponents.push_back({i, j, total - i - j});
      }
    }
    return b;
  }

  int size() const { return static_cast<int>(exponents.size()); }

  // Values of all basis functions at x; `vals` must hold size() entries.
  void eval(const Vec3& centroid, const Vec3& box_widths, const Vec3& x, double* vals) const {
    std::array<std::array<double, 5>, 3> leg{};  // per axis, per order
    for (int a = 0; a < dim; ++a) {
      const double half = 0.5 * box_widths[a];
      const double xi = half > 0.0 ? (x[a] - centroid[a]) / half : 0.0;
      for (int n = 0; n <= degree; ++n) leg[a][n] = legendre_eval(n, xi).first;
    }
    for (int j = 0; j < size(); ++j) {
      double v = 1.0;
      for (int a = 0; a < dim; ++a) v *= leg[a][exponents[j][a]];
      vals[j] = v;
    }
  }

  // Values and physical-space gradients; each axis factor carries the chain
  // factor 2/dx_a.
  void eval_grad(const Vec3& centroid, const Vec3& box_widths, const Vec3& x, double* vals,
                 Vec3* grads) const {
    std::array<std::array<double, 5>, 3> leg{}, dleg{};
    std::array<double, 3> chain{0.0, 0.0, 0.0};
    for (int a = 0; a < dim; ++a) {
      const double half = 0.5 * box_widths[a];
      const double xi = half > 0.0 ? (x[a] - centroid[a]) / half : 0.0;
      chain[a] = half > 0.0 ? 1.0 / half : 0.0;
      for (int n = 0; n <= degree; ++n) {
        const auto [p, d] = legendre_eval(n, xi);
        leg[a][n] = p;
        dleg[a][n] = d;
      }
    }
    for (int j = 0; j < size(); ++j) {
      double v = 1.0;
      for (int a = 0; a < dim; ++a) v *= leg[a][exponents[j][a]];
      vals[j] = v;
      Vec3 g{0.0, 0.0, 0.0};
      for (int a = 0; a < dim; ++a) {
        double t = dleg[a][exponents[j][a]] * chain[a];
        for (int b = 0; b < dim; ++b)
          if (b != a) t *= leg[b][exponents[j][b]];
        g[a] = t;
      }
      grads[j] = g;
    }
  }
};

}  // namespace topoflow
