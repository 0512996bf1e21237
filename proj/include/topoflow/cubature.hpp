#pragma once

#include <Eigen/Dense>
#include <cstdio>
#include <utility>
#include <vector>

#include "topoflow/basis.hpp"
#include "topoflow/core.hpp"
#include "topoflow/mesh.hpp"

namespace topoflow {

struct QuadPoint {
  Vec3 x{0.0, 0.0, 0.0};
  double w = 0.0;
};

// Volume rule weights are normalized (sum = 1): integrate f over the cell as
// volume * sum_q w_q f(x_q). Face rule weights carry the physical surface
// measure (sum = area): integrate as sum_q w_q f(x_q).
struct CubatureRule {
  std::vector<QuadPoint> points;
  int precision = 0;
  bool fallback = false;  // moment fitting failed; raw subdivision rule in use
};

namespace quadrules {

struct GaussPoint {
  double x, w;
};

// Gauss-Legendre on [-1,1], exact to degree 2n-1.
inline std::vector<GaussPoint> gauss_segment(int precision) {
  const int n = precision / 2 + 1;
  switch (n) {
    case 1:
      return {{0.0, 2.0}};
    case 2:
      return {{-0.5773502691896257, 1.0}, {0.5773502691896257, 1.0}};
    case 3:
      return {{-0.7745966692414834, 5.0 / 9.0}, {0.0, 8.0 / 9.0}, {0.7745966692414834, 5.0 / 9.0}};
    case 4:
      return {{-0.8611363115940526, 0.3478548451374538},
              {-0.3399810435848563, 0.6521451548625461},
              {0.3399810435848563, 0.6521451548625461},
              {0.8611363115940526, 0.3478548451374538}};
    default:
      return {{-0.9061798459386640, 0.2369268850561891},
              {-0.5384693101056831, 0.4786286704993665},
              {0.0, 0.5688888888888889},
              {0.5384693101056831, 0.4786286704993665},
              {0.9061798459386640, 0.2369268850561891}};
  }
}

struct BaryPoint {
  std::array<double, 4> l;  // barycentric coordinates (first dim+1 used)
  double w;                 // normalized: sums to 1 over the rule
};

inline std::vector<BaryPoint> triangle_rule(int precision) {
  if (precision <= 1) return {{{1.0 / 3, 1.0 / 3, 1.0 / 3, 0.0}, 1.0}};
  if (precision <= 2) {
    const double a = 2.0 / 3.0, b = 1.0 / 6.0, w = 1.0 / 3.0;
    return {{{a, b, b, 0.0}, w}, {{b, a, b, 0.0}, w}, {{b, b, a, 0.0}, w}};
  }
  if (precision <= 4) {
    const double a1 = 0.445948490915965, w1 = 0.223381589678011;
    const double a2 = 0.091576213509771, w2 = 0.109951743655322;
    std::vector<BaryPoint> r;
    for (const auto& [a, w] : {std::pair{a1, w1}, std::pair{a2, w2}}) {
      const double b = 1.0 - 2.0 * a;
      r.push_back({{b, a, a, 0.0}, w});
      r.push_back({{a, b, a, 0.0}, w});
      r.push_back({{a, a, b, 0.0}, w});
    }
    return r;
  }
  throw ConfigError("triangle quadrature: precision > 4 unsupported");
}

inline std::vector<BaryPoint> tet_rule(int precision) {
  if (precision <= 1) return {{{0.25, 0.25, 0.25, 0.25}, 1.0}};
  if (precision <= 2) {
    const double a = 0.5854101966249685, b = 0.1381966011250105;
    std::vector<BaryPoint> r;
    for (int i = 0; i < 4; ++i) {
      BaryPoint p{{b, b, b, b}, 0.25};
      p.l[i] = a;
      r.push_back(p);
    }
    return r;
  }
  if (precision <= 3) {
    std::vector<BaryPoint> r{{{0.25, 0.25, 0.25, 0.25}, -0.8}};
    const double a = 0.5, b = 1.0 / 6.0;
    for (int i = 0; i < 4; ++i) {
      BaryPoint p{{b, b, b, b}, 0.45};
      p.l[i] = a;
      r.push_back(p);
    }
    return r;
  }
  throw ConfigError("tet quadrature: precision > 3 unsupported");
}

}  // namespace quadrules

// Composite rule over the cell's simplex fan (the same decomposition the
// geometry uses). Weights carry the physical measure: sum w = cell volume.
// Exact for polynomials up to `precision` on star-shaped cells.
inline std::vector<QuadPoint> subdivision_rule(const PolyMesh& m, int cell, int precision) {
  std::vector<QuadPoint> out;
  const MeshCell& c = m.cells[cell];
  if (m.dim == 2) {
    const Vec3 vm = detail::vertex_mean(m, m.cell_vertex_ids(cell));
    const auto rule = quadrules::triangle_rule(precision);
    for (int f : c.faces) {
      const Vec3& a = m.vertices[m.faces[f].vertices[0]];
      const Vec3& b = m.vertices[m.faces[f].vertices[1]];
      const double area = detail::tri_area(vm, a, b);
      if (area <= 0.0) continue;
      for (const auto& q : rule)
        out.push_back({q.l[0] * vm + q.l[1] * a + q.l[2] * b, q.w * area});
    }
  } else {
    const Vec3 cm = detail::vertex_mean(m, m.cell_vertex_ids(cell));
    const auto rule = quadrules::tet_rule(precision);
    for (int f : c.faces) {
      const MeshFace& fa = m.faces[f];
      const Vec3 fm = detail::vertex_mean(m, fa.vertices);
      const int n = static_cast<int>(fa.vertices.size());
      for (int k = 0; k < n; ++k) {
        const Vec3& a = m.vertices[fa.vertices[k]];
        const Vec3& b = m.vertices[fa.vertices[(k + 1) % n]];
        const double vol = detail::tet_volume(cm, fm, a, b);
        if (vol <= 0.0) continue;
        for (const auto& q : rule)
          out.push_back({q.l[0] * cm + q.l[1] * fm + q.l[2] * a + q.l[3] * b, q.w * vol});
      }
    }
  }
  return out;
}

// Normalized basis moments (1/|cell|) * integral of each basis function,
// computed with the subdivision rule. These are both the moment-fitting
// right-hand side and the coefficients that map dofs to the cell mean.
inline std::vector<double> cell_basis_moments(const PolyMesh& m, int cell, const BasisSet& basis) {
  const MeshCell& c = m.cells[cell];
  const auto sub = subdivision_rule(m, cell, basis.degree);
  std::vector<double> b(basis.size(), 0.0);
  std::vector<double> vals(basis.size());
  for (const QuadPoint& q : sub) {
    basis.eval(c.centroid, m.cell_box_widths(cell), q.x, vals.data());
    for (int j = 0; j < basis.size(); ++j) b[j] += q.w * vals[j];
  }
  const double inv = 1.0 / c.volume;
  for (double& v : b) v *= inv;
  return b;
}

namespace detail {

// Greedy conditioning selection: column-pivoted QR picks the n most linearly
// independent candidate columns of the basis evaluation matrix.
inline bool moment_fit(const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                       const std::vector<QuadPoint>& candidates, std::vector<QuadPoint>& out) {
  const int n = static_cast<int>(A.rows());
  if (A.cols() < n) return false;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
  if (qr.rank() < n) return false;
  Eigen::MatrixXd Psi(n, n);
  std::vector<int> picked(n);
  const auto& perm = qr.colsPermutation().indices();
  for (int j = 0; j < n; ++j) {
    picked[j] = perm[j];
    Psi.col(j) = A.col(perm[j]);
  }
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(Psi);
  const Eigen::VectorXd w = lu.solve(b);
  if ((Psi * w - b).lpNorm<Eigen::Infinity>() > 1.0e-12) return false;
  out.clear();
  for (int j = 0; j < n; ++j) out.push_back({candidates[picked[j]].x, w[j]});
  return true;
}

}  // namespace detail

// Moment-fitted interior cubature of the requested precision. Candidate
// points come from an axis-aligned lattice over the bounding box, filtered to
// the cell interior and pulled toward the centroid by a small inset so
// boundary-grazing points cannot be selected. Falls back to the raw
// subdivision rule (with a stderr warning) if fitting fails after lattice
// refinement.
inline CubatureRule build_cubature(const PolyMesh& m, int cell, int precision) {
  const BasisSet basis = BasisSet::make(m.dim, precision);
  const int n = basis.size();
  const MeshCell& c = m.cells[cell];
  CubatureRule rule;
  rule.precision = precision;

  if (precision == 0) {
    rule.points = {{c.centroid, 1.0}};
    return rule;
  }

  const std::vector<double> moments = cell_basis_moments(m, cell, basis);
  const Eigen::VectorXd b = Eigen::Map<const Eigen::VectorXd>(moments.data(), n);
  const double inset = 1.0e-6 * m.cell_diameter(cell);
  const Vec3 widths = m.cell_box_widths(cell);

  const auto try_candidates = [&](const std::vector<QuadPoint>& candidates) {
    if (static_cast<int>(candidates.size()) < n) return false;
    Eigen::MatrixXd A(n, candidates.size());
    std::vector<double> vals(n);
    for (std::size_t q = 0; q < candidates.size(); ++q) {
      basis.eval(c.centroid, widths, candidates[q].x, vals.data());
      for (int j = 0; j < n; ++j) A(j, q) = vals[j];
    }
    return detail::moment_fit(A, b, candidates, rule.points);
  };

  for (int m_lat = precision + 2, attempt = 0; attempt < 5; ++attempt, m_lat *= 2) {
    std::vector<QuadPoint> candidates;
    const int mz = (m.dim == 3) ? m_lat : 1;
    for (int k = 0; k < mz; ++k)
      for (int j = 0; j < m_lat; ++j)
        for (int i = 0; i < m_lat; ++i) {
          Vec3 x = c.bbox_min;
          x[0] += widths[0] * (i + 0.5) / m_lat;
          x[1] += widths[1] * (j + 0.5) / m_lat;
          if (m.dim == 3) x[2] += widths[2] * (k + 0.5) / m_lat;
          if (!m.point_in_cell(cell, x)) continue;
          const Vec3 to_center = c.centroid - x;
          const double d = norm(to_center);
          if (d > inset) x += (inset / d) * to_center;
          candidates.push_back({x, 0.0});
        }
    if (try_candidates(candidates)) return rule;
  }

  // Slivers defeat the axis-aligned lattice: the few interior lattice points
  // are nearly collinear and the fit loses rank. The subdivision points are
  // strictly interior and follow the cell's actual shape, so offer them as
  // candidates before giving up.
  if (try_candidates(subdivision_rule(m, cell, precision + 2))) return rule;

  std::fprintf(stderr, "cubature: moment fitting failed for cell %d, using subdivision rule\n",
               cell);
  rule.fallback = true;
  rule.points = subdivision_rule(m, cell, precision);
  const double inv = 1.0 / c.volume;
  for (QuadPoint& q : rule.points) q.w *= inv;
  return rule;
}

// Surface quadrature. 2D edges get Gauss-Legendre; planar 3D polygons get an
// in-plane moment-fitted rule; non-planar faces fall back to triangulated
// Gauss integration with a warning. Weights sum to the face area.
inline CubatureRule build_face_quadrature(const PolyMesh& m, int face, int precision) {
  const MeshFace& f = m.faces[face];
  CubatureRule rule;
  rule.precision = precision;

  if (m.dim == 2) {
    const Vec3& a = m.vertices[f.vertices[0]];
    const Vec3& b = m.vertices[f.vertices[1]];
    for (const auto& g : quadrules::gauss_segment(precision))
      rule.points.push_back({0.5 * ((1.0 - g.x) * a + (1.0 + g.x) * b), 0.5 * g.w * f.area});
    return rule;
  }

  // In-plane frame about the face centroid.
  const Vec3& nrm = f.normal;
  Vec3 u = std::abs(nrm[0]) < 0.9 ? Vec3{1.0, 0.0, 0.0} : Vec3{0.0, 1.0, 0.0};
  u = u - dot(u, nrm) * nrm;
  u = (1.0 / norm(u)) * u;
  const Vec3 v = cross(nrm, u);
  const int nv = static_cast<int>(f.vertices.size());
  std::vector<Vec3> pl(nv);  // (xi, eta, 0) in-plane coordinates
  double planarity = 0.0, diam = 0.0;
  for (int i = 0; i < nv; ++i) {
    const Vec3 r = m.vertices[f.vertices[i]] - f.centroid;
    pl[i] = {dot(r, u), dot(r, v), 0.0};
    planarity = std::max(planarity, std::abs(dot(r, nrm)));
    diam = std::max(diam, norm(r));
  }
  const auto to_3d = [&](const Vec3& q) { return f.centroid + q[0] * u + q[1] * v; };
  const auto triangulated = [&]() {
    std::vector<QuadPoint> pts;
    const auto tri = quadrules::triangle_rule(precision);
    Vec3 fm{0.0, 0.0, 0.0};
    for (const Vec3& p : pl) fm += (1.0 / nv) * p;
    for (int i = 0; i < nv; ++i) {
      const Vec3& a = pl[i];
      const Vec3& b = pl[(i + 1) % nv];
      const double area = detail::tri_area(fm, a, b);
      for (const auto& q : tri)
        pts.push_back({to_3d(q.l[0] * fm + q.l[1] * a + q.l[2] * b), q.w * area});
    }
    return pts;
  };

  if (planarity > 1.0e-9 * std::max(diam, 1.0e-30)) {
    std::fprintf(stderr, "face quadrature: face %d is non-planar, using triangulated rule\n",
                 face);
    rule.fallback = true;
    rule.points = triangulated();
    return rule;
  }

  if (precision == 0) {
    rule.points = {{f.centroid, f.area}};
    return rule;
  }

  const BasisSet basis = BasisSet::make(2, precision);
  const int n = basis.size();
  Vec3 lo = pl[0], hi = pl[0];
  for (const Vec3& p : pl)
    for (int a = 0; a < 2; ++a) {
      lo[a] = std::min(lo[a], p[a]);
      hi[a] = std::max(hi[a], p[a]);
    }
  const Vec3 center{0.0, 0.0, 0.0};  // face centroid in plane coordinates
  const Vec3 widths{2.0 * std::max(std::abs(lo[0]), std::abs(hi[0])),
                    2.0 * std::max(std::abs(lo[1]), std::abs(hi[1])), 0.0};

  // In-plane subdivision moments over the fan about the vertex mean.
  Vec3 fm{0.0, 0.0, 0.0};
  for (const Vec3& p : pl) fm += (1.0 / nv) * p;
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
  std::vector<double> vals(n);
  const auto tri = quadrules::triangle_rule(precision);
  for (int i = 0; i < nv; ++i) {
    const Vec3& pa = pl[i];
    const Vec3& pb = pl[(i + 1) % nv];
    const double area = detail::tri_area(fm, pa, pb);
    for (const auto& q : tri) {
      const Vec3 x = q.l[0] * fm + q.l[1] * pa + q.l[2] * pb;
      basis.eval(center, widths, x, vals.data());
      for (int j = 0; j < n; ++j) b[j] += q.w * area * vals[j];
    }
  }
  b /= f.area;

  const auto point_in_polygon = [&](const Vec3& x) {
    for (int i = 0; i < nv; ++i)
      if (detail::point_in_triangle(x, fm, pl[i], pl[(i + 1) % nv], 1.0e-12)) return true;
    return false;
  };
  const double inset = 1.0e-6 * diam;
  for (int m_lat = precision + 2, attempt = 0; attempt < 3; ++attempt, m_lat *= 2) {
    std::vector<QuadPoint> candidates;
    for (int j = 0; j < m_lat; ++j)
      for (int i = 0; i < m_lat; ++i) {
        Vec3 x{lo[0] + (hi[0] - lo[0]) * (i + 0.5) / m_lat,
               lo[1] + (hi[1] - lo[1]) * (j + 0.5) / m_lat, 0.0};
        if (!point_in_polygon(x)) continue;
        const double d = norm(x);
        if (d > inset) x = ((d - inset) / d) * x;
        candidates.push_back({x, 0.0});
      }
    if (static_cast<int>(candidates.size()) < n) continue;
    Eigen::MatrixXd A(n, candidates.size());
    for (std::size_t q = 0; q < candidates.size(); ++q) {
      basis.eval(center, widths, candidates[q].x, vals.data());
      for (int j = 0; j < n; ++j) A(j, q) = vals[j];
    }
    std::vector<QuadPoint> picked;
    if (detail::moment_fit(A, b, candidates, picked)) {
      for (QuadPoint& q : picked) rule.points.push_back({to_3d(q.x), q.w * f.area});
      return rule;
    }
  }

  std::fprintf(stderr, "face quadrature: moment fitting failed for face %d, using triangles\n",
               face);
  rule.fallback = true;
  rule.points = triangulated();
  return rule;
}

// Constant in-cell velocity reconstructed from signed face quantities:
//   v_i = (1/|cell|) * sum_faces q_out (x_face - x_cell).
// `face_values` holds one owner-to-neighbor signed value per mesh face
// (boundary entries are the outward boundary flux, zero for no-flow).
// Reproduces any uniform field whose face integrals generated the values.
inline Vec3 interpolate_velocity(const PolyMesh& m, int cell,
                                 const std::vector<double>& face_values) {
  const MeshCell& c = m.cells[cell];
  Vec3 v{0.0, 0.0, 0.0};
  for (int f : c.faces) {
    const double q_out = m.outward_sign(f, cell) * face_values[f];
    v += q_out * (m.faces[f].centroid - c.centroid);
  }
  return (1.0 / c.volume) * v;
}

}  // namespace topoflow
