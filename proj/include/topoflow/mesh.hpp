#pragma once

#include <algorithm>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "topoflow/core.hpp"

namespace topoflow {

// A face is an ordered vertex loop in 3D or an endpoint pair in 2D. The unit
// normal points from owner to neighbor (outward through boundary faces, where
// neighbor is -1). "area" is length in 2D.
struct MeshFace {
  std::vector<int> vertices;
  int owner = -1;
  int neighbor = -1;
  Vec3 centroid{0.0, 0.0, 0.0};
  Vec3 normal{0.0, 0.0, 0.0};
  double area = 0.0;
};

// Cells reference faces in arbitrary order; geometry is derived by fanning
// simplices about vertex means, which is exact for star-shaped cells.
// "volume" is area in 2D. The bounding box is axis-aligned over the cell's
// vertices; basis scaling uses the volume centroid with box half-widths.
struct MeshCell {
  std::vector<int> faces;
  Vec3 centroid{0.0, 0.0, 0.0};
  double volume = 0.0;
  Vec3 bbox_min{0.0, 0.0, 0.0};
  Vec3 bbox_max{0.0, 0.0, 0.0};
};

struct PolyMesh {
  int dim = 3;
  std::vector<Vec3> vertices;
  std::vector<MeshFace> faces;
  std::vector<MeshCell> cells;
  std::vector<int> interior_faces;

  int n_cells() const { return static_cast<int>(cells.size()); }
  int n_faces() const { return static_cast<int>(faces.size()); }
  int n_vertices() const { return static_cast<int>(vertices.size()); }

  // +1 when the face normal points out of `cell`, -1 when into it.
  double outward_sign(int face, int cell) const {
    return faces[face].owner == cell ? 1.0 : -1.0;
  }
  int other_cell(int face, int cell) const {
    const MeshFace& f = faces[face];
    return f.owner == cell ? f.neighbor : f.owner;
  }

  std::vector<int> cell_vertex_ids(int cell) const {
    std::vector<int> ids;
    for (int f : cells[cell].faces)
      ids.insert(ids.end(), faces[f].vertices.begin(), faces[f].vertices.end());
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    return ids;
  }

  Vec3 cell_box_widths(int cell) const { return cells[cell].bbox_max - cells[cell].bbox_min; }

  double cell_diameter(int cell) const { return norm(cell_box_widths(cell)); }

  // Star-shaped membership test on the same simplex fan the geometry uses.
  // `tol` is an absolute slack on the barycentric coordinates.
  bool point_in_cell(int cell, const Vec3& p, double tol = 1.0e-12) const;
};

namespace detail {

inline double tri_area(const Vec3& a, const Vec3& b, const Vec3& c) {
  return 0.5 * norm(cross(b - a, c - a));
}

inline double tet_volume(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d) {
  return std::abs(dot(b - a, cross(c - a, d - a))) / 6.0;
}

inline Vec3 vertex_mean(const PolyMesh& m, const std::vector<int>& ids) {
  Vec3 s{0.0, 0.0, 0.0};
  for (int v : ids) s += m.vertices[v];
  return (1.0 / static_cast<double>(ids.size())) * s;
}

inline bool point_in_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c,
                              double tol) {
  const double det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
  if (std::abs(det) < 1.0e-300) return false;
  const double l1 = ((p[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (p[1] - a[1])) / det;
  const double l2 = ((b[0] - a[0]) * (p[1] - a[1]) - (p[0] - a[0]) * (b[1] - a[1])) / det;
  return l1 >= -tol && l2 >= -tol && l1 + l2 <= 1.0 + tol;
}

inline bool point_in_tet(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c,
                         const Vec3& d, double tol) {
  const Vec3 e1 = b - a, e2 = c - a, e3 = d - a, r = p - a;
  const double det = dot(e1, cross(e2, e3));
  if (std::abs(det) < 1.0e-300) return false;
  const double l1 = dot(r, cross(e2, e3)) / det;
  const double l2 = dot(e1, cross(r, e3)) / det;
  const double l3 = dot(e1, cross(e2, r)) / det;
  return l1 >= -tol && l2 >= -tol && l3 >= -tol && l1 + l2 + l3 <= 1.0 + tol;
}

}  // namespace detail

inline bool PolyMesh::point_in_cell(int cell, const Vec3& p, double tol) const {
  const MeshCell& c = cells[cell];
  if (dim == 2) {
    const Vec3 vm = detail::vertex_mean(*this, cell_vertex_ids(cell));
    for (int f : c.faces) {
      const MeshFace& e = faces[f];
      if (detail::point_in_triangle(p, vm, vertices[e.vertices[0]], vertices[e.vertices[1]], tol))
        return true;
    }
    return false;
  }
  const Vec3 cm = detail::vertex_mean(*this, cell_vertex_ids(cell));
  for (int f : c.faces) {
    const MeshFace& fa = faces[f];
    const Vec3 fm = detail::vertex_mean(*this, fa.vertices);
    const int n = static_cast<int>(fa.vertices.size());
    for (int k = 0; k < n; ++k) {
      const Vec3& a = vertices[fa.vertices[k]];
      const Vec3& b = vertices[fa.vertices[(k + 1) % n]];
      if (detail::point_in_tet(p, cm, fm, a, b, tol)) return true;
    }
  }
  return false;
}

namespace detail {

inline void compute_face_geometry(PolyMesh& m) {
  for (MeshFace& f : m.faces) {
    if (m.dim == 2) {
      const Vec3& a = m.vertices[f.vertices[0]];
      const Vec3& b = m.vertices[f.vertices[1]];
      f.centroid = 0.5 * (a + b);
      const Vec3 t = b - a;
      f.area = norm(t);
      if (f.area > 0.0) f.normal = {t[1] / f.area, -t[0] / f.area, 0.0};
    } else {
      const Vec3 fm = vertex_mean(m, f.vertices);
      const int n = static_cast<int>(f.vertices.size());
      Vec3 area_vec{0.0, 0.0, 0.0};
      Vec3 centroid{0.0, 0.0, 0.0};
      double area = 0.0;
      for (int k = 0; k < n; ++k) {
        const Vec3& a = m.vertices[f.vertices[k]];
        const Vec3& b = m.vertices[f.vertices[(k + 1) % n]];
        const Vec3 av = 0.5 * cross(a - fm, b - fm);
        const double t = norm(av);
        area_vec += av;
        area += t;
        centroid += (t / 3.0) * (fm + a + b);
      }
      f.area = area;
      if (area > 0.0) {
        f.centroid = (1.0 / area) * centroid;
        const double avn = norm(area_vec);
        if (avn > 0.0) f.normal = (1.0 / avn) * area_vec;
      }
    }
  }
}

inline void compute_cell_geometry(PolyMesh& m) {
  for (int c = 0; c < m.n_cells(); ++c) {
    MeshCell& cell = m.cells[c];
    const std::vector<int> vids = m.cell_vertex_ids(c);
    const Vec3 cm = vertex_mean(m, vids);
    double vol = 0.0;
    Vec3 centroid{0.0, 0.0, 0.0};
    for (int f : cell.faces) {
      const MeshFace& fa = m.faces[f];
      if (m.dim == 2) {
        const Vec3& a = m.vertices[fa.vertices[0]];
        const Vec3& b = m.vertices[fa.vertices[1]];
        const double t = tri_area(cm, a, b);
        vol += t;
        centroid += (t / 3.0) * (cm + a + b);
      } else {
        const Vec3 fm = vertex_mean(m, fa.vertices);
        const int n = static_cast<int>(fa.vertices.size());
        for (int k = 0; k < n; ++k) {
          const Vec3& a = m.vertices[fa.vertices[k]];
          const Vec3& b = m.vertices[fa.vertices[(k + 1) % n]];
          const double t = tet_volume(cm, fm, a, b);
          vol += t;
          centroid += (t / 4.0) * (cm + fm + a + b);
        }
      }
    }
    cell.volume = vol;
    if (vol > 0.0) cell.centroid = (1.0 / vol) * centroid;
    Vec3 lo{std::numeric_limits<double>::max(), std::numeric_limits<double>::max(),
            std::numeric_limits<double>::max()};
    Vec3 hi{-lo[0], -lo[1], -lo[2]};
    for (int v : vids) {
      for (int a = 0; a < 3; ++a) {
        lo[a] = std::min(lo[a], m.vertices[v][a]);
        hi[a] = std::max(hi[a], m.vertices[v][a]);
      }
    }
    if (m.dim == 2) lo[2] = hi[2] = 0.0;
    cell.bbox_min = lo;
    cell.bbox_max = hi;
  }
}

inline void orient_normals(PolyMesh& m) {
  for (MeshFace& f : m.faces) {
    const Vec3 ref = (f.neighbor >= 0) ? m.cells[f.neighbor].centroid - m.cells[f.owner].centroid
                                       : f.centroid - m.cells[f.owner].centroid;
    if (dot(f.normal, ref) < 0.0) f.normal = -1.0 * f.normal;
  }
}

}  // namespace detail

// Derives all face and cell geometry, orients normals owner->neighbor, and
// collects the interior face list. Must be called after topology edits.
inline void compute_geometry(PolyMesh& m) {
  detail::compute_face_geometry(m);
  detail::compute_cell_geometry(m);
  detail::orient_normals(m);
  m.interior_faces.clear();
  for (int f = 0; f < m.n_faces(); ++f)
    if (m.faces[f].neighbor >= 0) m.interior_faces.push_back(f);
}

// Structural and geometric integrity checks. Throws ConfigError naming the
// first offending entity. Closedness tolerance is relative to each cell's
// total surface measure.
inline void validate_mesh(const PolyMesh& m) {
  if (m.dim != 2 && m.dim != 3) throw ConfigError("mesh: dimension must be 2 or 3");
  for (int f = 0; f < m.n_faces(); ++f) {
    const MeshFace& fa = m.faces[f];
    const std::size_t want = (m.dim == 2) ? 2 : 3;
    if (fa.vertices.size() < want)
      throw ConfigError("mesh: face " + std::to_string(f) + " has too few vertices");
    if (m.dim == 2 && fa.vertices.size() != 2)
      throw ConfigError("mesh: face " + std::to_string(f) + " must have 2 vertices in 2D");
    for (int v : fa.vertices)
      if (v < 0 || v >= m.n_vertices())
        throw ConfigError("mesh: face " + std::to_string(f) + " references invalid vertex");
    if (fa.owner < 0 || fa.owner >= m.n_cells())
      throw ConfigError("mesh: face " + std::to_string(f) + " has invalid owner");
    if (fa.neighbor >= m.n_cells() || fa.neighbor < -1)
      throw ConfigError("mesh: face " + std::to_string(f) + " has invalid neighbor");
    if (fa.neighbor == fa.owner)
      throw ConfigError("mesh: face " + std::to_string(f) + " connects a cell to itself");
    if (!(fa.area > 0.0))
      throw ConfigError("mesh: face " + std::to_string(f) + " is degenerate");
  }
  for (int c = 0; c < m.n_cells(); ++c) {
    const MeshCell& cell = m.cells[c];
    if (cell.faces.empty()) throw ConfigError("mesh: cell " + std::to_string(c) + " has no faces");
    if (!(cell.volume > 0.0))
      throw ConfigError("mesh: cell " + std::to_string(c) + " has non-positive volume");
    Vec3 closure{0.0, 0.0, 0.0};
    double surface = 0.0;
    for (int f : cell.faces) {
      if (f < 0 || f >= m.n_faces())
        throw ConfigError("mesh: cell " + std::to_string(c) + " references invalid face");
      const MeshFace& fa = m.faces[f];
      if (fa.owner != c && fa.neighbor != c)
        throw ConfigError("mesh: cell " + std::to_string(c) + " lists face " + std::to_string(f) +
                          " that does not bound it");
      closure += (m.outward_sign(f, c) * fa.area) * fa.normal;
      surface += fa.area;
    }
    if (norm(closure) > 1.0e-12 * surface)
      throw ConfigError("mesh: cell " + std::to_string(c) + " is not closed");
  }
  for (int f = 0; f < m.n_faces(); ++f) {
    const MeshFace& fa = m.faces[f];
    const auto listed = [&](int c) {
      const auto& fl = m.cells[c].faces;
      return std::find(fl.begin(), fl.end(), f) != fl.end();
    };
    if (!listed(fa.owner) || (fa.neighbor >= 0 && !listed(fa.neighbor)))
      throw ConfigError("mesh: face " + std::to_string(f) + " missing from its cell's face list");
  }
}

// Structured hexahedral mesh on [0,lx]x[0,ly]x[0,lz].
inline PolyMesh build_cartesian(int nx, int ny, int nz, double lx, double ly, double lz) {
  if (nx < 1 || ny < 1 || nz < 1) throw ConfigError("cartesian mesh: cell counts must be >= 1");
  if (!(lx > 0.0) || !(ly > 0.0) || !(lz > 0.0))
    throw ConfigError("cartesian mesh: domain lengths must be > 0");
  PolyMesh m;
  m.dim = 3;
  const double hx = lx / nx, hy = ly / ny, hz = lz / nz;
  const auto vid = [&](int i, int j, int k) { return i + (nx + 1) * (j + (ny + 1) * k); };
  const auto cid = [&](int i, int j, int k) { return i + nx * (j + ny * k); };
  m.vertices.resize(static_cast<std::size_t>(nx + 1) * (ny + 1) * (nz + 1));
  for (int k = 0; k <= nz; ++k)
    for (int j = 0; j <= ny; ++j)
      for (int i = 0; i <= nx; ++i) m.vertices[vid(i, j, k)] = {i * hx, j * hy, k * hz};
  m.cells.resize(static_cast<std::size_t>(nx) * ny * nz);
  const auto add_face = [&](std::vector<int> verts, int owner, int neighbor) {
    MeshFace f;
    f.vertices = std::move(verts);
    f.owner = owner;
    f.neighbor = neighbor;
    const int id = m.n_faces();
    m.faces.push_back(std::move(f));
    m.cells[owner].faces.push_back(id);
    if (neighbor >= 0) m.cells[neighbor].faces.push_back(id);
    return id;
  };
  for (int k = 0; k < nz; ++k)
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i <= nx; ++i) {
        const int left = (i > 0) ? cid(i - 1, j, k) : -1;
        const int right = (i < nx) ? cid(i, j, k) : -1;
        add_face({vid(i, j, k), vid(i, j + 1, k), vid(i, j + 1, k + 1), vid(i, j, k + 1)},
                 left >= 0 ? left : right, left >= 0 ? right : -1);
      }
  for (int k = 0; k < nz; ++k)
    for (int j = 0; j <= ny; ++j)
      for (int i = 0; i < nx; ++i) {
        const int down = (j > 0) ? cid(i, j - 1, k) : -1;
        const int up = (j < ny) ? cid(i, j, k) : -1;
        add_face({vid(i, j, k), vid(i + 1, j, k), vid(i + 1, j, k + 1), vid(i, j, k + 1)},
                 down >= 0 ? down : up, down >= 0 ? up : -1);
      }
  for (int k = 0; k <= nz; ++k)
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i) {
        const int below = (k > 0) ? cid(i, j, k - 1) : -1;
        const int above = (k < nz) ? cid(i, j, k) : -1;
        add_face({vid(i, j, k), vid(i + 1, j, k), vid(i + 1, j + 1, k), vid(i, j + 1, k)},
                 below >= 0 ? below : above, below >= 0 ? above : -1);
      }
  compute_geometry(m);
  validate_mesh(m);
  return m;
}

// Structured quadrilateral mesh on [0,lx]x[0,ly]; the paper's 2D runs use
// true 2D cells so the linear basis has three dofs.
inline PolyMesh build_cartesian_2d(int nx, int ny, double lx, double ly) {
  if (nx < 1 || ny < 1) throw ConfigError("cartesian mesh: cell counts must be >= 1");
  if (!(lx > 0.0) || !(ly > 0.0))
    throw ConfigError("cartesian mesh: domain lengths must be > 0");
  PolyMesh m;
  m.dim = 2;
  const double hx = lx / nx, hy = ly / ny;
  const auto vid = [&](int i, int j) { return i + (nx + 1) * j; };
  const auto cid = [&](int i, int j) { return i + nx * j; };
  m.vertices.resize(static_cast<std::size_t>(nx + 1) * (ny + 1));
  for (int j = 0; j <= ny; ++j)
    for (int i = 0; i <= nx; ++i) m.vertices[vid(i, j)] = {i * hx, j * hy, 0.0};
  m.cells.resize(static_cast<std::size_t>(nx) * ny);
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
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i <= nx; ++i) {
      const int left = (i > 0) ? cid(i - 1, j) : -1;
      const int right = (i < nx) ? cid(i, j) : -1;
      add_face(vid(i, j), vid(i, j + 1), left >= 0 ? left : right, left >= 0 ? right : -1);
    }
  for (int j = 0; j <= ny; ++j)
    for (int i = 0; i < nx; ++i) {
      const int down = (j > 0) ? cid(i, j - 1) : -1;
      const int up = (j < ny) ? cid(i, j) : -1;
      add_face(vid(i, j), vid(i + 1, j), down >= 0 ? down : up, down >= 0 ? up : -1);
    }
  compute_geometry(m);
  validate_mesh(m);
  return m;
}

// Plain-text polytopal mesh reader. Layout:
//   dim n_vertices n_faces n_cells
//   n_vertices lines of `dim` coordinates,
//   n_faces lines `k v1 .. vk owner neighbor` (neighbor -1 on the boundary),
//   n_cells lines `m f1 .. fm`.
// Indices are 0-based; `#` starts a comment. Whitespace is free-form.
inline PolyMesh load_mesh(std::istream& in, const std::string& origin = "<stream>") {
  std::string text, line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    text += line;
    text += '\n';
  }
  std::istringstream ts(text);
  const auto fail = [&](const std::string& what) -> ConfigError {
    return ConfigError("mesh file " + origin + ": " + what);
  };
  long long dim = 0, nv = 0, nf = 0, nc = 0;
  if (!(ts >> dim >> nv >> nf >> nc)) throw fail("bad header");
  if (dim != 2 && dim != 3) throw fail("dimension must be 2 or 3");
  if (nv <= 0 || nf <= 0 || nc <= 0) throw fail("entity counts must be positive");
  PolyMesh m;
  m.dim = static_cast<int>(dim);
  m.vertices.resize(nv);
  for (long long v = 0; v < nv; ++v) {
    Vec3 p{0.0, 0.0, 0.0};
    for (int a = 0; a < dim; ++a)
      if (!(ts >> p[a])) throw fail("vertex " + std::to_string(v) + " is truncated");
    m.vertices[v] = p;
  }
  m.faces.resize(nf);
  for (long long f = 0; f < nf; ++f) {
    long long k = 0;
    if (!(ts >> k) || k < 2) throw fail("face " + std::to_string(f) + " has a bad vertex count");
    MeshFace& fa = m.faces[f];
    fa.vertices.resize(k);
    for (long long i = 0; i < k; ++i) {
      if (!(ts >> fa.vertices[i])) throw fail("face " + std::to_string(f) + " is truncated");
      if (fa.vertices[i] < 0 || fa.vertices[i] >= nv)
        throw fail("face " + std::to_string(f) + " references invalid vertex");
    }
    if (!(ts >> fa.owner >> fa.neighbor))
      throw fail("face " + std::to_string(f) + " is missing owner/neighbor");
  }
  m.cells.resize(nc);
  for (long long c = 0; c < nc; ++c) {
    long long k = 0;
    if (!(ts >> k) || k < 1) throw fail("cell " + std::to_string(c) + " has a bad face count");
    MeshCell& cell = m.cells[c];
    cell.faces.resize(k);
    for (long long i = 0; i < k; ++i) {
      if (!(ts >> cell.faces[i])) throw fail("cell " + std::to_string(c) + " is truncated");
      if (cell.faces[i] < 0 || cell.faces[i] >= nf)
        throw fail("cell " + std::to_string(c) + " references invalid face");
    }
  }
  double extra;
  if (ts >> extra) throw fail("trailing data after last cell");
  compute_geometry(m);
  try {
    validate_mesh(m);
  } catch (const ConfigError& e) {
    throw fail(e.what());
  }
  return m;
}

inline PolyMesh load_mesh(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("mesh file " + path + ": cannot open");
  return load_mesh(in, path);
}

inline double total_volume(const PolyMesh& m) {
  double v = 0.0;
  for (const MeshCell& c : m.cells) v += c.volume;
  return v;
}

}  // namespace topoflow
