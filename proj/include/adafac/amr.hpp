#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <tuple>
#include <vector>

#include "adafac/solvers.hpp"
#include "adafac/spacetree.hpp"

namespace adafac {

struct RefinePolicy {
  int lmax = 8;
  bool boundary = true;      // refine along x2 = 0 on even cycles
  bool curvature = true;
  double fraction = 0.1;     // target share of marked vertices
  int bins = 64;
};

struct Marks {
  std::vector<CellId> cells;
  std::vector<VertexId> vertices;  // marked by the indicator
  std::size_t marked_vertices = 0;
  std::size_t candidate_vertices = 0;

  bool empty() const { return cells.empty(); }
};

inline void normalise(Marks& m) {
  auto key = [](const CellId& c) { return std::make_tuple(c.level, c.j, c.i); };
  std::sort(m.cells.begin(), m.cells.end(), [&](const CellId& a, const CellId& b) { return key(a) < key(b); });
  m.cells.erase(std::unique(m.cells.begin(), m.cells.end()), m.cells.end());
}

// Unrefined cells touching the bottom boundary, on even cycles only.
inline Marks mark_boundary(const Spacetree& t, int cycle, int lmax) {
  Marks m;
  if (cycle % 2 != 0) return m;
  for (int l = 0; l <= t.depth() && l < lmax; ++l)
    for (const Cell& c : t.level(l).cells)
      if (!c.refined() && c.j == 0) m.cells.push_back({l, c.i, c.j});
  return m;
}

// Axis-aligned second derivative estimate max(|u_xx|, |u_yy|) at a
// composite degree of freedom, from same-level neighbours. Hanging
// neighbours only carry interpolated values; an axis with one of them is
// skipped.
inline double curvature_indicator(const Spacetree& t, int l, const VertexRecord& v, double noise) {
  const Level& L = t.level(l);
  auto axis = [&](std::int64_t di, std::int64_t dj) {
    const VertexRecord& a = L.vertices[t.find_vertex(l, v.i + di, v.j + dj)];
    const VertexRecord& b = L.vertices[t.find_vertex(l, v.i - di, v.j - dj)];
    if (a.kind == VertexKind::Hanging || b.kind == VertexKind::Hanging) return 0.0;
    return std::abs(a.u + b.u - 2.0 * v.u);
  };
  const double d = std::max(axis(1, 0), axis(0, 1));
  if (d <= noise) return 0.0;
  const double inv_h = static_cast<double>(pow3(l));
  return d * inv_h * inv_h;
}

// Marks the cells around the vertices in the top share of the indicator.
// The indicator range is split into equal bins and whole bins are taken
// from the top until at least `fraction` of the vertices is covered. A
// bin that would overshoot twice the target is split again into equal
// bins: near the corner singularities the maximum is so large that one
// flat pass puts almost every vertex into the lowest bin.
inline Marks mark_curvature(const Spacetree& t, const RefinePolicy& pol) {
  Marks m;
  struct Entry {
    int l;
    std::int32_t v;
    double ind;
  };
  double umax = 0.0;
  for (int l = 0; l <= t.depth(); ++l)
    for (const VertexRecord& v : t.level(l).vertices) umax = std::max(umax, std::abs(v.u));
  const double noise = 1e-12 * std::max(umax, 1.0);
  std::vector<Entry> e;
  for (int l = 1; l <= t.depth(); ++l) {
    const Level& L = t.level(l);
    for (std::size_t x = 0; x < L.vertices.size(); ++x) {
      const VertexRecord& v = L.vertices[x];
      if (v.kind != VertexKind::InteriorDof) continue;
      e.push_back({l, static_cast<std::int32_t>(x), curvature_indicator(t, l, v, noise)});
    }
  }
  m.candidate_vertices = e.size();
  const double want = pol.fraction * static_cast<double>(e.size());
  const std::size_t nb = static_cast<std::size_t>(pol.bins);

  std::vector<std::size_t> cand, taken;
  for (std::size_t k = 0; k < e.size(); ++k)
    if (e[k].ind > 0.0) cand.push_back(k);
  double lo = 0.0;
  for (int pass = 0; !cand.empty(); ++pass) {
    double hi = lo;
    for (std::size_t k : cand) hi = std::max(hi, e[k].ind);
    if (!(hi > lo) || pass >= 16) {
      taken.insert(taken.end(), cand.begin(), cand.end());
      break;
    }
    auto bin_of = [&](double ind) { return std::min(nb - 1, static_cast<std::size_t>((ind - lo) / (hi - lo) * static_cast<double>(nb))); };
    std::vector<std::vector<std::size_t>> bins(nb);
    for (std::size_t k : cand) bins[bin_of(e[k].ind)].push_back(k);
    cand.clear();
    for (std::size_t b = nb; b-- > 0;) {
      const double with = static_cast<double>(taken.size() + bins[b].size());
      if (with < want) {
        taken.insert(taken.end(), bins[b].begin(), bins[b].end());
        continue;
      }
      if (with <= 2.0 * want) {
        taken.insert(taken.end(), bins[b].begin(), bins[b].end());
      } else {
        cand = std::move(bins[b]);
        lo = lo + (hi - lo) * static_cast<double>(b) / static_cast<double>(nb);
        double cmin = hi;
        for (std::size_t k : cand) cmin = std::min(cmin, e[k].ind);
        lo = std::min(lo, cmin);
      }
      break;
    }
  }

  for (std::size_t k : taken) {
    const Entry& x = e[k];
    ++m.marked_vertices;
    m.vertices.push_back(t.vertex_id(x.l, x.v));
    if (x.l >= pol.lmax) continue;
    const VertexRecord& v = t.level(x.l).vertices[x.v];
    for (int ca = -1; ca <= 0; ++ca)
      for (int cb = -1; cb <= 0; ++cb) {
        const std::int32_t c = t.find_cell(x.l, v.i + ca, v.j + cb);
        if (c != kNone && !t.level(x.l).cells[c].refined()) m.cells.push_back({x.l, v.i + ca, v.j + cb});
      }
  }
  normalise(m);
  return m;
}

inline Marks merge(Marks a, const Marks& b) {
  a.cells.insert(a.cells.end(), b.cells.begin(), b.cells.end());
  a.marked_vertices += b.marked_vertices;
  a.vertices.insert(a.vertices.end(), b.vertices.begin(), b.vertices.end());
  normalise(a);
  return a;
}

// Refines the marked cells, interpolates the new vertices from the parent
// level and rebuilds all operators. Returns the number of refined cells.
inline std::size_t apply_refinement(Problem& p, const Marks& m, int lmax) {
  std::vector<CellId> todo;
  for (const CellId& c : m.cells)
    if (c.level < lmax) todo.push_back(c);
  if (todo.empty()) return 0;
  const int saved = p.tree().max_level();
  p.tree().set_max_level(std::min(saved, lmax));
  std::size_t before = 0;
  for (int l = 0; l <= p.tree().depth(); ++l) before += p.tree().level(l).cells.size();
  p.tree().refine_cells(todo);
  p.tree().set_max_level(saved);
  std::size_t after = 0;
  for (int l = 0; l <= p.tree().depth(); ++l) after += p.tree().level(l).cells.size();
  if (after == before) return 0;
  p.rebuild();
  update_fas_state(p);
  return (after - before) / 9;
}

}  // namespace adafac
