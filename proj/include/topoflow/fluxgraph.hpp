#pragma once

#include <algorithm>
#include <fstream>
#include <map>
#include <queue>
#include <string>
#include <vector>

#include "topoflow/core.hpp"
#include "topoflow/dgspace.hpp"
#include "topoflow/faceflux.hpp"
#include "topoflow/mesh.hpp"
#include "topoflow/pressure.hpp"

namespace topoflow {

// Directed cell dependency graph: edge i -> j when cell j's transport
// residual depends on cell i's saturation, i.e. some phase is upstream-from-i
// at some face quadrature point (or capillary coupling ties the face both
// ways). Adjacency lists are sorted and deduplicated, so construction is
// deterministic.
struct FluxGraph {
  int n = 0;
  std::vector<std::vector<int>> out;

  void add_edge(int from, int to) { out[from].push_back(to); }
  void finalize() {
    for (auto& adj : out) {
      std::sort(adj.begin(), adj.end());
      adj.erase(std::unique(adj.begin(), adj.end()), adj.end());
    }
  }
};

// Edge detection evaluates the upwind assignment at every face quadrature
// point with the provided (time-n) saturation traces. A phase creates an
// edge when its drive exceeds a relative threshold, whether or not the phase
// is currently mobile: immobile-but-upstream cells still gate what arrives
// later in the step. A non-flat capillary table couples every face both ways.
inline FluxGraph build_flux_graph(const PolyMesh& m, const FluxField& flux,
                                  const FluidModel& fluid, const DGSpace& space,
                                  const SatField& sat, const std::vector<double>& p) {
  FluxGraph g;
  g.n = m.n_cells();
  g.out.resize(g.n);

  double drive_scale = 0.0;
  const double mu_min = std::min(fluid.water.mu_ref, fluid.oil.mu_ref);
  for (int f : m.interior_faces)
    drive_scale = std::max(drive_scale, std::abs(flux.v[f]) + std::abs(flux.g[f]) / mu_min);
  const double thresh = 1.0e-12 * drive_scale;

  const bool capillary = fluid.has_capillary();
  bool capillary_live = false;
  if (capillary)
    for (std::size_t i = 0; i + 1 < fluid.pc_table.size(); ++i)
      if (fluid.pc_table[i].pc != fluid.pc_table[i + 1].pc) capillary_live = true;

  for (int f : m.interior_faces) {
    const int i = m.faces[f].owner, j = m.faces[f].neighbor;
    if (capillary_live && flux.trans[f] > 0.0) {
      g.add_edge(i, j);
      g.add_edge(j, i);
      continue;
    }
    const int nq = static_cast<int>(space.faces[f].pts.size());
    for (int q = 0; q < nq; ++q) {
      const double si = sat.face_value(space, f, q, i);
      const double sj = sat.face_value(space, f, q, j);
      const Mobilities mi = fluid.mobility_clamped(si, p[i]);
      const Mobilities mj = fluid.mobility_clamped(sj, p[j]);
      const PhaseUpwind up = phase_upwind(flux.v[f], flux.g[f], mi.lw, mj.lw, mi.lo, mj.lo);
      const double lo_u = up.oil_from_i ? mi.lo : mj.lo;
      const double lw_u = up.water_from_i ? mi.lw : mj.lw;
      const double wdrive = flux.v[f] + lo_u * flux.g[f];
      const double odrive = flux.v[f] - lw_u * flux.g[f];
      if (std::abs(wdrive) > thresh) g.add_edge(up.water_from_i ? i : j, up.water_from_i ? j : i);
      if (std::abs(odrive) > thresh) g.add_edge(up.oil_from_i ? i : j, up.oil_from_i ? j : i);
    }
  }
  g.finalize();
  return g;
}

// Strongly connected components condensed and topologically sorted. The
// component list runs upstream to downstream; cells inside a component and
// simultaneously-ready components are ordered by ascending original index,
// so the result is a pure function of the graph.
struct Ordering {
  std::vector<std::vector<int>> components;
  std::vector<int> comp_of;   // cell -> component position in `components`
  std::vector<int> sequence;  // concatenated cells in solve order
  std::vector<int> position;  // cell -> slot in `sequence`

  int n_components() const { return static_cast<int>(components.size()); }
  int n_cycles() const {
    int c = 0;
    for (const auto& comp : components) c += comp.size() > 1;
    return c;
  }
  int max_component() const {
    std::size_t s = 0;
    for (const auto& comp : components) s = std::max(s, comp.size());
    return static_cast<int>(s);
  }
  double mean_cycle_size() const {
    std::size_t total = 0;
    int count = 0;
    for (const auto& comp : components)
      if (comp.size() > 1) {
        total += comp.size();
        ++count;
      }
    return count == 0 ? 0.0 : static_cast<double>(total) / count;
  }
};

namespace detail {

// Tarjan with an explicit frame stack; recursion depth on long flow chains
// would otherwise scale with the cell count.
inline std::vector<std::vector<int>> tarjan_scc(const FluxGraph& g) {
  const int n = g.n;
  std::vector<int> index(n, -1), low(n, 0);
  std::vector<char> on_stack(n, 0);
  std::vector<int> stack;
  std::vector<std::vector<int>> comps;
  int next_index = 0;

  struct Frame {
    int v;
    std::size_t child;
  };
  std::vector<Frame> frames;
  for (int root = 0; root < n; ++root) {
    if (index[root] != -1) continue;
    frames.push_back({root, 0});
    index[root] = low[root] = next_index++;
    stack.push_back(root);
    on_stack[root] = 1;
    while (!frames.empty()) {
      Frame& fr = frames.back();
      const int v = fr.v;
      if (fr.child < g.out[v].size()) {
        const int w = g.out[v][fr.child++];
        if (index[w] == -1) {
          index[w] = low[w] = next_index++;
          stack.push_back(w);
          on_stack[w] = 1;
          frames.push_back({w, 0});
        } else if (on_stack[w]) {
          low[v] = std::min(low[v], index[w]);
        }
      } else {
        if (low[v] == index[v]) {
          std::vector<int> comp;
          int w;
          do {
            w = stack.back();
            stack.pop_back();
            on_stack[w] = 0;
            comp.push_back(w);
          } while (w != v);
          std::sort(comp.begin(), comp.end());
          comps.push_back(std::move(comp));
        }
        frames.pop_back();
        if (!frames.empty()) low[frames.back().v] = std::min(low[frames.back().v], low[v]);
      }
    }
  }
  return comps;
}

}  // namespace detail

inline Ordering condense_and_sort(const FluxGraph& g) {
  Ordering ord;
  std::vector<std::vector<int>> comps = detail::tarjan_scc(g);
  const int nc = static_cast<int>(comps.size());
  std::vector<int> comp_id(g.n, -1);
  for (int c = 0; c < nc; ++c)
    for (int v : comps[c]) comp_id[v] = c;

  // Condensation in-degrees, then Kahn with a min-heap keyed by the smallest
  // original cell index so simultaneously-ready components tie-break
  // deterministically.
  std::vector<std::vector<int>> cond(nc);
  std::vector<int> indeg(nc, 0);
  for (int v = 0; v < g.n; ++v)
    for (int w : g.out[v])
      if (comp_id[v] != comp_id[w]) cond[comp_id[v]].push_back(comp_id[w]);
  for (auto& adj : cond) {
    std::sort(adj.begin(), adj.end());
    adj.erase(std::unique(adj.begin(), adj.end()), adj.end());
    for (int w : adj) ++indeg[w];
  }
  using Key = std::pair<int, int>;  // (min cell, component id)
  std::priority_queue<Key, std::vector<Key>, std::greater<Key>> ready;
  for (int c = 0; c < nc; ++c)
    if (indeg[c] == 0) ready.push({comps[c].front(), c});
  ord.comp_of.assign(g.n, -1);
  ord.position.assign(g.n, -1);
  while (!ready.empty()) {
    const int c = ready.top().second;
    ready.pop();
    const int slot = ord.n_components();
    for (int v : comps[c]) {
      ord.comp_of[v] = slot;
      ord.position[v] = static_cast<int>(ord.sequence.size());
      ord.sequence.push_back(v);
    }
    ord.components.push_back(std::move(comps[c]));
    for (int w : cond[c])
      if (--indeg[w] == 0) ready.push({comps[w].front(), w});
  }
  if (static_cast<int>(ord.sequence.size()) != g.n)
    throw RunAbort("flux graph condensation failed to order all cells");
  return ord;
}

// Solve units: consecutive whole components greedily packed up to n_b cells.
// A component larger than n_b becomes its own unit; cycles are never split.
struct SolveUnit {
  std::vector<int> cells;  // ascending original index within each component
  bool has_cycle = false;
  int n_components = 0;
};

inline std::vector<SolveUnit> block_partition(const Ordering& ord, int n_b) {
  if (n_b < 1) throw ConfigError("block size must be >= 1");
  std::vector<SolveUnit> units;
  SolveUnit current;
  for (const auto& comp : ord.components) {
    if (!current.cells.empty() &&
        current.cells.size() + comp.size() > static_cast<std::size_t>(n_b)) {
      units.push_back(std::move(current));
      current = {};
    }
    current.cells.insert(current.cells.end(), comp.begin(), comp.end());
    current.has_cycle |= comp.size() > 1;
    ++current.n_components;
    if (current.cells.size() >= static_cast<std::size_t>(n_b)) {
      units.push_back(std::move(current));
      current = {};
    }
  }
  if (!current.cells.empty()) units.push_back(std::move(current));
  return units;
}

// Cell-block sparsity of the permuted transport Jacobian: entry (r, c) when
// the cell in slot r depends on the cell in slot c. For acyclic graphs every
// off-diagonal entry lies strictly below the diagonal; entries above it can
// only sit inside a multi-cell component's diagonal block.
struct SparsityPattern {
  int n = 0;     // rows = cells * ndof
  int ndof = 1;  // dofs per cell (uniform expansion)
  std::vector<std::pair<int, int>> entries;

  // Entries above the diagonal are admissible only inside the diagonal block
  // of a multi-cell component (a cycle solved simultaneously).
  bool is_block_lower_triangular(const Ordering& ord) const {
    for (const auto& [r, c] : entries)
      if (c > r &&
          ord.comp_of[ord.sequence[r / ndof]] != ord.comp_of[ord.sequence[c / ndof]])
        return false;
    return true;
  }

  // Portable greyscale bitmap of the pattern (P2, black = nonzero), one
  // pixel per cell; meshes beyond `max_pixels` are downsampled.
  void write_pgm(const std::string& path, int max_pixels = 2000) const {
    const int size = std::min(n, max_pixels);
    std::vector<char> img(static_cast<std::size_t>(size) * size, 0);
    for (const auto& [r, c] : entries) {
      const int rr = static_cast<int>(static_cast<long long>(r) * size / n);
      const int cc = static_cast<int>(static_cast<long long>(c) * size / n);
      img[static_cast<std::size_t>(rr) * size + cc] = 1;
    }
    std::ofstream out(path);
    out << "P2\n" << size << " " << size << "\n1\n";
    for (int r = 0; r < size; ++r) {
      for (int c = 0; c < size; ++c) out << (img[static_cast<std::size_t>(r) * size + c] ? 0 : 1)
                                         << (c + 1 == size ? '\n' : ' ');
    }
  }
};

// With ndof > 1 every cell-level entry expands to a full ndof x ndof block
// (the dG(k) dof pattern).
inline SparsityPattern permuted_sparsity(const FluxGraph& g, const Ordering& ord, int ndof = 1) {
  SparsityPattern sp;
  sp.n = g.n * ndof;
  sp.ndof = ndof;
  const auto add_block = [&](int r, int c) {
    for (int a = 0; a < ndof; ++a)
      for (int b = 0; b < ndof; ++b) sp.entries.push_back({r * ndof + a, c * ndof + b});
  };
  for (int v = 0; v < g.n; ++v) {
    add_block(ord.position[v], ord.position[v]);
    for (int w : g.out[v]) add_block(ord.position[w], ord.position[v]);
  }
  std::sort(sp.entries.begin(), sp.entries.end());
  sp.entries.erase(std::unique(sp.entries.begin(), sp.entries.end()), sp.entries.end());
  return sp;
}

// Text histogram of component sizes: "size count" per line, ascending.
inline std::string component_histogram(const Ordering& ord) {
  std::map<std::size_t, int> hist;
  for (const auto& comp : ord.components) ++hist[comp.size()];
  std::string out;
  for (const auto& [size, count] : hist)
    out += std::to_string(size) + " " + std::to_string(count) + "\n";
  return out;
}

}  // namespace topoflow
