#pragma once

// Randomized geometry generators for the test suite: single convex polygon
// and polyhedron cells for quadrature checks, and a bounded 2D Voronoi
// tessellation (bisector clipping) for exercising general polygonal meshes.
// Everything takes an explicit RNG so failures reproduce exactly.

#include <cmath>
#include <map>
#include <random>
#include <vector>

#include "topoflow/core.hpp"
#include "topoflow/mesh.hpp"

namespace meshgen {

using topoflow::MeshFace;
using topoflow::PolyMesh;
using topoflow::Vec3;
using topoflow::operator+;
using topoflow::operator-;
using topoflow::operator*;
using topoflow::operator+=;

// Points at sorted angles on a random ellipse are always in convex position.
inline std::vector<Vec3> random_convex_polygon(std::mt19937& rng, int n_verts) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const double a = 0.5 + 1.5 * u01(rng);
  const double b = 0.5 + 1.5 * u01(rng);
  const double rot = 2.0 * M_PI * u01(rng);
  const double cx = 4.0 * (u01(rng) - 0.5), cy = 4.0 * (u01(rng) - 0.5);
  std::vector<double> ang(n_verts);
  for (double& t : ang) t = 2.0 * M_PI * u01(rng);
  std::sort(ang.begin(), ang.end());
  for (int k = 0; k + 1 < n_verts; ++k)  // keep vertices apart
    ang[k + 1] = std::max(ang[k + 1], ang[k] + 0.15);
  if (ang.back() > ang.front() + 2.0 * M_PI - 0.15) ang.back() = ang.front() + 2.0 * M_PI - 0.15;
  std::vector<Vec3> pts(n_verts);
  for (int k = 0; k < n_verts; ++k) {
    const double x = a * std::cos(ang[k]), y = b * std::sin(ang[k]);
    pts[k] = {cx + x * std::cos(rot) - y * std::sin(rot),
              cy + x * std::sin(rot) + y * std::cos(rot), 0.0};
  }
  return pts;
}

// Single-cell 2D mesh from an ordered convex vertex loop.
inline PolyMesh polygon_cell(const std::vector<Vec3>& pts) {
  PolyMesh m;
  m.dim = 2;
  m.vertices = pts;
  m.cells.resize(1);
  const int n = static_cast<int>(pts.size());
  for (int k = 0; k < n; ++k) {
    MeshFace f;
    f.vertices = {k, (k + 1) % n};
    f.owner = 0;
    m.cells[0].faces.push_back(m.n_faces());
    m.faces.push_back(std::move(f));
  }
  topoflow::compute_geometry(m);
  topoflow::validate_mesh(m);
  return m;
}

// Single-cell 3D mesh: a prism over a random convex polygon, sheared and
// rotated by a random orientation-preserving affine map. All faces remain
// planar under affine maps, so these are genuine convex polyhedra with
// quadrilateral sides and two polygonal caps.
inline PolyMesh random_prism_cell(std::mt19937& rng, int base_verts) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const std::vector<Vec3> base = random_convex_polygon(rng, base_verts);
  const double h = 0.5 + 2.0 * u01(rng);
  const double sx = 0.8 * (u01(rng) - 0.5), sy = 0.8 * (u01(rng) - 0.5);
  const double alpha = 2.0 * M_PI * u01(rng), beta = M_PI * (u01(rng) - 0.5);
  const auto map = [&](Vec3 p) {
    p[0] += sx * p[2];  // shear
    p[1] += sy * p[2];
    const Vec3 q{p[0] * std::cos(alpha) - p[1] * std::sin(alpha),
                 p[0] * std::sin(alpha) + p[1] * std::cos(alpha), p[2]};
    return Vec3{q[0] * std::cos(beta) + q[2] * std::sin(beta), q[1],
                -q[0] * std::sin(beta) + q[2] * std::cos(beta)};
  };
  PolyMesh m;
  m.dim = 3;
  const int n = static_cast<int>(base.size());
  for (int k = 0; k < n; ++k) m.vertices.push_back(map(base[k]));
  for (int k = 0; k < n; ++k) m.vertices.push_back(map(base[k] + Vec3{0.0, 0.0, h}));
  m.cells.resize(1);
  const auto add = [&](std::vector<int> verts) {
    MeshFace f;
    f.vertices = std::move(verts);
    f.owner = 0;
    m.cells[0].faces.push_back(m.n_faces());
    m.faces.push_back(std::move(f));
  };
  std::vector<int> bottom(n), top(n);
  for (int k = 0; k < n; ++k) bottom[k] = n - 1 - k;  // reversed: outward -z before mapping
  for (int k = 0; k < n; ++k) top[k] = n + k;
  add(std::move(bottom));
  add(std::move(top));
  for (int k = 0; k < n; ++k) add({k, (k + 1) % n, n + (k + 1) % n, n + k});
  topoflow::compute_geometry(m);
  topoflow::validate_mesh(m);
  return m;
}

namespace detail {

// Convex polygon with per-edge provenance labels: lab[k] tags the edge from
// p[k] to p[k+1] (-1 for the bounding box, otherwise the clipping seed).
struct LabeledPoly {
  std::vector<Vec3> p;
  std::vector<int> lab;
};

inline void clip_halfplane(LabeledPoly& poly, const Vec3& mid, const Vec3& d, int label) {
  LabeledPoly out;
  const int n = static_cast<int>(poly.p.size());
  for (int k = 0; k < n; ++k) {
    const Vec3& A = poly.p[k];
    const Vec3& B = poly.p[(k + 1) % n];
    const int L = poly.lab[k];
    const double da = topoflow::dot(A - mid, d);
    const double db = topoflow::dot(B - mid, d);
    const bool ain = da <= 0.0, bin = db <= 0.0;
    const auto intersect = [&] { return A + (da / (da - db)) * (B - A); };
    if (ain) {
      out.p.push_back(A);
      out.lab.push_back(L);
      if (!bin) {
        out.p.push_back(intersect());
        out.lab.push_back(label);
      }
    } else if (bin) {
      out.p.push_back(intersect());
      out.lab.push_back(L);
    }
  }
  poly = std::move(out);
}

inline void drop_short_edges(LabeledPoly& poly, double tol) {
  for (bool again = true; again && poly.p.size() > 2;) {
    again = false;
    const int n = static_cast<int>(poly.p.size());
    for (int k = 0; k < n; ++k) {
      if (topoflow::norm(poly.p[(k + 1) % n] - poly.p[k]) < tol) {
        // The edge leaving k is degenerate; keep the point and the next edge.
        poly.p.erase(poly.p.begin() + k);
        poly.lab.erase(poly.lab.begin() + k);
        again = true;
        break;
      }
    }
  }
}

}  // namespace detail

// Bounded Voronoi tessellation of [0,lx]x[0,ly]: each seed's cell is the
// bounding rectangle clipped against the perpendicular bisector of every
// other seed. Edge labels identify the neighboring seed, which yields the
// face connectivity directly. Seeds are rejection-sampled for separation so
// the diagram has no sliver cells.
inline PolyMesh voronoi_mesh_2d(int n_seeds, double lx, double ly, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> ux(0.0, lx), uy(0.0, ly);
  const double min_sep = 0.45 * std::sqrt(lx * ly / n_seeds);
  std::vector<Vec3> seeds;
  int guard = 0;
  while (static_cast<int>(seeds.size()) < n_seeds) {
    if (++guard > 100000) throw std::runtime_error("voronoi: seed sampling stalled");
    const Vec3 s{ux(rng), uy(rng), 0.0};
    bool ok = true;
    for (const Vec3& t : seeds) ok &= topoflow::norm(s - t) >= min_sep;
    if (ok) seeds.push_back(s);
  }

  const double scale = std::max(lx, ly);
  const double eps = 1.0e-9 * scale;
  PolyMesh m;
  m.dim = 2;
  m.cells.resize(n_seeds);

  // Vertex registry with bucket snapping: coordinates within eps/2 of an
  // existing vertex reuse its id, so clip-order rounding cannot split points.
  std::map<std::pair<long long, long long>, std::vector<int>> buckets;
  const auto vertex_id = [&](const Vec3& p) {
    const long long bx = static_cast<long long>(std::floor(p[0] / eps));
    const long long by = static_cast<long long>(std::floor(p[1] / eps));
    for (long long ix = bx - 1; ix <= bx + 1; ++ix)
      for (long long iy = by - 1; iy <= by + 1; ++iy) {
        const auto it = buckets.find({ix, iy});
        if (it == buckets.end()) continue;
        for (int v : it->second)
          if (topoflow::norm(m.vertices[v] - p) < 0.5 * eps) return v;
      }
    const int id = m.n_vertices();
    m.vertices.push_back(p);
    buckets[{bx, by}].push_back(id);
    return id;
  };
  const auto add_face = [&](int va, int vb, int owner, int neighbor) {
    MeshFace f;
    f.vertices = {va, vb};
    f.owner = owner;
    f.neighbor = neighbor;
    const int id = m.n_faces();
    m.faces.push_back(std::move(f));
    m.cells[owner].faces.push_back(id);
    if (neighbor >= 0) m.cells[neighbor].faces.push_back(id);
  };

  for (int i = 0; i < n_seeds; ++i) {
    detail::LabeledPoly poly;
    poly.p = {{0.0, 0.0, 0.0}, {lx, 0.0, 0.0}, {lx, ly, 0.0}, {0.0, ly, 0.0}};
    poly.lab = {-1, -1, -1, -1};
    for (int j = 0; j < n_seeds; ++j) {
      if (j == i) continue;
      detail::clip_halfplane(poly, 0.5 * (seeds[i] + seeds[j]), seeds[j] - seeds[i], j);
      detail::drop_short_edges(poly, eps);
    }
    if (poly.p.size() < 3) throw std::runtime_error("voronoi: empty cell");
    const int nv = static_cast<int>(poly.p.size());
    for (int k = 0; k < nv; ++k) {
      const int va = vertex_id(poly.p[k]);
      const int vb = vertex_id(poly.p[(k + 1) % nv]);
      const int lab = poly.lab[k];
      if (lab == -1)
        add_face(va, vb, i, -1);
      else if (lab > i)
        add_face(va, vb, i, lab);
      // lab < i: the face was created during that seed's walk.
    }
  }
  topoflow::compute_geometry(m);
  topoflow::validate_mesh(m);
  return m;
}

}  // namespace meshgen
