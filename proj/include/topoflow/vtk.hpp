#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "topoflow/core.hpp"
#include "topoflow/mesh.hpp"

namespace topoflow {

namespace detail {

// Counter-clockwise vertex loop of a convex 2D cell, by angle about the
// centroid.
inline std::vector<int> polygon_loop(const PolyMesh& m, int cell) {
  std::vector<int> verts = m.cell_vertex_ids(cell);
  const Vec3 c = m.cells[cell].centroid;
  std::sort(verts.begin(), verts.end(), [&](int a, int b) {
    const Vec3& va = m.vertices[a];
    const Vec3& vb = m.vertices[b];
    return std::atan2(va[1] - c[1], va[0] - c[0]) < std::atan2(vb[1] - c[1], vb[0] - c[0]);
  });
  return verts;
}

}  // namespace detail

// Legacy ASCII VTK unstructured grid: 2D cells as VTK_POLYGON (7), 3D cells
// as VTK_POLYHEDRON (42) with a face stream. Scalar cell fields print with
// %.17g so output is byte-deterministic.
inline void write_vtk(const PolyMesh& m,
                      const std::vector<std::pair<std::string, const std::vector<double>*>>& fields,
                      std::ostream& out, const std::string& title = "topoflow") {
  const auto g17 = [](double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return std::string(buf);
  };
  out << "# vtk DataFile Version 2.0\n" << title << "\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  out << "POINTS " << m.n_vertices() << " double\n";
  for (const Vec3& v : m.vertices)
    out << g17(v[0]) << " " << g17(v[1]) << " " << g17(v[2]) << "\n";

  // Cell entries: polygons list their vertex loop; polyhedra list the face
  // stream [n_faces, (n_verts, verts...) ...]. The leading number on each
  // CELLS line is the entry length in both conventions.
  std::vector<std::vector<int>> entries(m.n_cells());
  std::size_t total = 0;
  for (int c = 0; c < m.n_cells(); ++c) {
    std::vector<int>& e = entries[c];
    if (m.dim == 2) {
      e = detail::polygon_loop(m, c);
    } else {
      e.push_back(static_cast<int>(m.cells[c].faces.size()));
      for (int f : m.cells[c].faces) {
        const MeshFace& face = m.faces[f];
        e.push_back(static_cast<int>(face.vertices.size()));
        e.insert(e.end(), face.vertices.begin(), face.vertices.end());
      }
    }
    total += e.size() + 1;
  }
  out << "CELLS " << m.n_cells() << " " << total << "\n";
  for (const std::vector<int>& e : entries) {
    out << e.size();
    for (int x : e) out << " " << x;
    out << "\n";
  }
  out << "CELL_TYPES " << m.n_cells() << "\n";
  for (int c = 0; c < m.n_cells(); ++c) out << (m.dim == 2 ? 7 : 42) << "\n";

  if (!fields.empty()) {
    out << "CELL_DATA " << m.n_cells() << "\n";
    for (const auto& [name, vals] : fields) {
      out << "SCALARS " << name << " double 1\nLOOKUP_TABLE default\n";
      for (double v : *vals) out << g17(v) << "\n";
    }
  }
}

}  // namespace topoflow
