#pragma once

#include <future>
#include <vector>

#include "topoflow/basis.hpp"
#include "topoflow/core.hpp"
#include "topoflow/cubature.hpp"
#include "topoflow/mesh.hpp"

namespace topoflow {

struct CellQuadrature {
  std::vector<QuadPoint> pts;  // normalized weights, sum = 1
  std::vector<double> psi;     // [q * ndof + j]
  std::vector<Vec3> grad_psi;  // [q * ndof + j]
};

struct FaceQuadrature {
  std::vector<QuadPoint> pts;   // physical weights, sum = face area
  std::vector<double> psi_own;  // owner-side traces [q * ndof + j]
  std::vector<double> psi_nbr;  // neighbor-side traces; empty on boundary
};

// Per-mesh dG(k) data built once per run: interior cubature of precision 2k
// (exact for basis products, hence for the mass matrix), face rules, basis
// trace tables, mass matrices, and the normalized first moments that map dof
// vectors to cell means.
struct DGSpace {
  const PolyMesh* mesh = nullptr;
  BasisSet basis;
  int degree = 0;
  int ndof = 1;
  std::vector<CellQuadrature> cells;
  std::vector<FaceQuadrature> faces;
  std::vector<double> mass;     // per cell, ndof*ndof row-major, physical measure
  std::vector<double> moments;  // per cell, ndof entries; moments[c*ndof] == 1

  static DGSpace build(const PolyMesh& m, int degree, int threads = 1) {
    if (degree < 0 || degree > 1) throw ConfigError("transport basis degree must be 0 or 1");
    DGSpace s;
    s.mesh = &m;
    s.degree = degree;
    s.basis = BasisSet::make(m.dim, degree);
    s.ndof = s.basis.size();
    s.cells.resize(m.n_cells());
    s.faces.resize(m.n_faces());
    s.mass.assign(static_cast<std::size_t>(m.n_cells()) * s.ndof * s.ndof, 0.0);
    s.moments.assign(static_cast<std::size_t>(m.n_cells()) * s.ndof, 0.0);

    const int cell_precision = 2 * degree;
    const int face_precision = degree == 0 ? 0 : (m.dim == 2 ? 2 * degree + 1 : 2 * degree);

    const auto do_cells = [&](int lo, int hi) {
      std::vector<double> vals(s.ndof);
      std::vector<Vec3> grads(s.ndof);
      for (int c = lo; c < hi; ++c) {
        CellQuadrature& cq = s.cells[c];
        cq.pts = build_cubature(m, c, cell_precision).points;
        const int nq = static_cast<int>(cq.pts.size());
        cq.psi.resize(static_cast<std::size_t>(nq) * s.ndof);
        cq.grad_psi.resize(static_cast<std::size_t>(nq) * s.ndof);
        const Vec3 widths = m.cell_box_widths(c);
        for (int q = 0; q < nq; ++q) {
          s.basis.eval_grad(m.cells[c].centroid, widths, cq.pts[q].x, vals.data(), grads.data());
          for (int j = 0; j < s.ndof; ++j) {
            cq.psi[q * s.ndof + j] = vals[j];
            cq.grad_psi[q * s.ndof + j] = grads[j];
          }
        }
        double* M = &s.mass[static_cast<std::size_t>(c) * s.ndof * s.ndof];
        double* mom = &s.moments[static_cast<std::size_t>(c) * s.ndof];
        for (int q = 0; q < nq; ++q)
          for (int l = 0; l < s.ndof; ++l) {
            mom[l] += cq.pts[q].w * cq.psi[q * s.ndof + l];
            for (int k = 0; k < s.ndof; ++k)
              M[l * s.ndof + k] +=
                  m.cells[c].volume * cq.pts[q].w * cq.psi[q * s.ndof + l] * cq.psi[q * s.ndof + k];
          }
      }
    };
    const auto do_faces = [&](int lo, int hi) {
      std::vector<double> vals(s.ndof);
      for (int f = lo; f < hi; ++f) {
        FaceQuadrature& fq = s.faces[f];
        fq.pts = build_face_quadrature(m, f, face_precision).points;
        const int nq = static_cast<int>(fq.pts.size());
        const MeshFace& fa = m.faces[f];
        fq.psi_own.resize(static_cast<std::size_t>(nq) * s.ndof);
        for (int q = 0; q < nq; ++q) {
          s.basis.eval(m.cells[fa.owner].centroid, m.cell_box_widths(fa.owner), fq.pts[q].x,
                       vals.data());
          for (int j = 0; j < s.ndof; ++j) fq.psi_own[q * s.ndof + j] = vals[j];
        }
        if (fa.neighbor >= 0) {
          fq.psi_nbr.resize(static_cast<std::size_t>(nq) * s.ndof);
          for (int q = 0; q < nq; ++q) {
            s.basis.eval(m.cells[fa.neighbor].centroid, m.cell_box_widths(fa.neighbor),
                         fq.pts[q].x, vals.data());
            for (int j = 0; j < s.ndof; ++j) fq.psi_nbr[q * s.ndof + j] = vals[j];
          }
        }
      }
    };

    if (threads <= 1) {
      do_cells(0, m.n_cells());
      do_faces(0, m.n_faces());
    } else {
      const auto run = [&](auto&& fn, int count) {
        std::vector<std::future<void>> parts;
        const int chunk = (count + threads - 1) / threads;
        for (int t = 0; t < threads; ++t) {
          const int lo = t * chunk, hi = std::min(count, lo + chunk);
          if (lo >= hi) break;
          parts.push_back(std::async(std::launch::async, [&fn, lo, hi] { fn(lo, hi); }));
        }
        for (auto& p : parts) p.get();
      };
      run(do_cells, m.n_cells());
      run(do_faces, m.n_faces());
    }
    return s;
  }
};

// Water saturation in the broken polynomial space. Every cell stores the full
// dof vector of the run's maximum degree; `degree[c]` masks a cell down to
// its leading (mean) dof after order reduction.
struct SatField {
  int ndof = 1;
  std::vector<double> dof;  // [cell * ndof + j]
  std::vector<int> degree;  // active degree per cell, 0 or the run's maximum

  static SatField constant(const DGSpace& s, double sw) {
    SatField x;
    x.ndof = s.ndof;
    x.dof.assign(static_cast<std::size_t>(s.mesh->n_cells()) * s.ndof, 0.0);
    x.degree.assign(s.mesh->n_cells(), s.degree);
    for (int c = 0; c < s.mesh->n_cells(); ++c) x.dof[static_cast<std::size_t>(c) * s.ndof] = sw;
    return x;
  }

  int active_ndof(int cell) const { return degree[cell] == 0 ? 1 : ndof; }

  double mean(const DGSpace& s, int cell) const {
    const double* mom = &s.moments[static_cast<std::size_t>(cell) * ndof];
    const double* d = &dof[static_cast<std::size_t>(cell) * ndof];
    double v = 0.0;
    for (int j = 0; j < active_ndof(cell); ++j) v += d[j] * mom[j];
    return v;
  }

  // Trace at face quadrature point q evaluated from `cell`'s side.
  double face_value(const DGSpace& s, int face, int q, int cell) const {
    const FaceQuadrature& fq = s.faces[face];
    const bool own = s.mesh->faces[face].owner == cell;
    const double* psi = own ? &fq.psi_own[static_cast<std::size_t>(q) * ndof]
                            : &fq.psi_nbr[static_cast<std::size_t>(q) * ndof];
    const double* d = &dof[static_cast<std::size_t>(cell) * ndof];
    double v = 0.0;
    for (int j = 0; j < active_ndof(cell); ++j) v += d[j] * psi[j];
    return v;
  }

  double point_value(const DGSpace& s, int cell, int q) const {
    const CellQuadrature& cq = s.cells[cell];
    const double* psi = &cq.psi[static_cast<std::size_t>(q) * ndof];
    const double* d = &dof[static_cast<std::size_t>(cell) * ndof];
    double v = 0.0;
    for (int j = 0; j < active_ndof(cell); ++j) v += d[j] * psi[j];
    return v;
  }

  // Mean-preserving collapse to the constant basis function. The mean uses
  // the cell's normalized first moments, so mass is conserved exactly even
  // on cells whose higher basis functions have nonzero integrals.
  void reduce_to_constant(const DGSpace& s, int cell) {
    const double mu = mean(s, cell);
    double* d = &dof[static_cast<std::size_t>(cell) * ndof];
    d[0] = mu;
    for (int j = 1; j < ndof; ++j) d[j] = 0.0;
    degree[cell] = 0;
  }
};

}  // namespace topoflow
