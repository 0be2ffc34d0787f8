#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "adafac/discretization.hpp"
#include "adafac/spacetree.hpp"
#include "adafac/stencil.hpp"

namespace adafac {

enum class OperatorFlavor { Geometric, BoxMG };

inline OperatorFlavor parse_flavor(const std::string& s) {
  if (s == "geometric") return OperatorFlavor::Geometric;
  if (s == "boxmg") return OperatorFlavor::BoxMG;
  throw std::invalid_argument("unknown flavor: " + s);
}

inline std::string to_string(OperatorFlavor f) { return f == OperatorFlavor::Geometric ? "geometric" : "boxmg"; }

// Linear weights of fine offset a in [0,3] towards the coarse endpoints 0 and 3.
inline constexpr std::array<std::array<double, 2>, 4> kLinear{
    {{1.0, 0.0}, {2.0 / 3.0, 1.0 / 3.0}, {1.0 / 3.0, 2.0 / 3.0}, {0.0, 1.0}}};

inline std::array<double, 4> bilinear_weights(int a, int b) {
  return {kLinear[a][0] * kLinear[b][0], kLinear[a][1] * kLinear[b][0], kLinear[a][0] * kLinear[b][1],
          kLinear[a][1] * kLinear[b][1]};
}

// d-linear prolongation stencil of one coarse vertex on the fine grid.
inline Stencil7 geometric_prolongation() {
  Stencil7 p;
  for (int dy = -3; dy <= 3; ++dy)
    for (int dx = -3; dx <= 3; ++dx)
      p(dx, dy) = std::max(0.0, 1.0 - std::abs(dx) / 3.0) * std::max(0.0, 1.0 - std::abs(dy) / 3.0);
  return p;
}

// Prolongation weights of the 16 fine points of one refined cell with
// respect to its 4 corners: index (b * 4 + a) * 4 + corner.
using CellProlongation = std::array<double, 64>;

namespace boxmg {

// 1D three point stencil obtained by summing a 3x3 stencil across the normal
// of an edge running along `axis` (0 = x, 1 = y).
inline std::array<double, 3> collapse(const Stencil3& s, int axis) {
  std::array<double, 3> t{};
  for (int d = -1; d <= 1; ++d)
    for (int n = -1; n <= 1; ++n) t[d + 1] += axis == 0 ? s(d, n) : s(n, d);
  return t;
}

// Weights of the two interior edge points towards the start endpoint
// (first pair) and the end endpoint (second pair).
struct EdgeWeights {
  std::array<double, 2> start;
  std::array<double, 2> end;
};

inline EdgeWeights solve_edge(const std::array<double, 3>& t1, const std::array<double, 3>& t2) {
  // [t1_0 t1_+; t2_- t2_0] [p1 p2]^T = rhs
  const double a = t1[1], b = t1[2], c = t2[0], d = t2[1];
  const double det = a * d - b * c;
  if (!std::isfinite(det) || std::abs(det) <= 1e-300 * (std::abs(a * d) + std::abs(b * c) + 1e-300))
    throw std::runtime_error("boxmg: degenerate collapsed stencil");
  EdgeWeights w;
  // start endpoint: rhs (-t1_-, 0); end endpoint: rhs (0, -t2_+)
  const double r1 = -t1[0], r2 = -t2[2];
  w.start = {(r1 * d) / det, (-c * r1) / det};
  w.end = {(-b * r2) / det, (a * r2) / det};
  return w;
}

inline EdgeWeights linear_edge() { return {{2.0 / 3.0, 1.0 / 3.0}, {1.0 / 3.0, 2.0 / 3.0}}; }

// Fine data of one refined cell: stencils of the 16 fine points and, per
// edge (bottom, top, left, right), whether operator-dependent weights apply.
struct CellPatch {
  std::array<Stencil3, 16> stencil;
  std::array<bool, 4> collapse_edge{};
};

inline constexpr int corner_of(int a, int b) { return (a == 3 ? 1 : 0) + (b == 3 ? 2 : 0); }

// Dense solve with partial pivoting, n <= 4, several right hand sides.
template <int N, int M>
inline void small_solve(std::array<std::array<double, N>, N> a, std::array<std::array<double, M>, N>& rhs) {
  for (int k = 0; k < N; ++k) {
    int piv = k;
    for (int r = k + 1; r < N; ++r)
      if (std::abs(a[r][k]) > std::abs(a[piv][k])) piv = r;
    if (!(std::abs(a[piv][k]) > 0.0) || !std::isfinite(a[piv][k])) throw std::runtime_error("boxmg: singular f-point system");
    std::swap(a[k], a[piv]);
    std::swap(rhs[k], rhs[piv]);
    for (int r = k + 1; r < N; ++r) {
      const double f = a[r][k] / a[k][k];
      for (int c = k; c < N; ++c) a[r][c] -= f * a[k][c];
      for (int m = 0; m < M; ++m) rhs[r][m] -= f * rhs[k][m];
    }
  }
  for (int k = N - 1; k >= 0; --k) {
    for (int m = 0; m < M; ++m) {
      double s = rhs[k][m];
      for (int c = k + 1; c < N; ++c) s -= a[k][c] * rhs[c][m];
      rhs[k][m] = s / a[k][k];
    }
  }
}

inline CellProlongation cell_prolongation(const CellPatch& patch) {
  CellProlongation p{};
  auto at = [&p](int a, int b, int c) -> double& { return p[(b * 4 + a) * 4 + c]; };
  for (int c = 0; c < 4; ++c) at(3 * (c & 1), 3 * (c >> 1), c) = 1.0;

  // edges: bottom (b=0, corners 0->1), top (b=3, 2->3), left (a=0, 0->2), right (a=3, 1->3)
  struct EdgeDef {
    int a0, b0, da, db, c0, c1, axis;
  };
  constexpr std::array<EdgeDef, 4> edges{{{0, 0, 1, 0, 0, 1, 0}, {0, 3, 1, 0, 2, 3, 0}, {0, 0, 0, 1, 0, 2, 1}, {3, 0, 0, 1, 1, 3, 1}}};
  for (int e = 0; e < 4; ++e) {
    const EdgeDef& d = edges[e];
    EdgeWeights w = linear_edge();
    if (patch.collapse_edge[e]) {
      const int a1 = d.a0 + d.da, b1 = d.b0 + d.db, a2 = d.a0 + 2 * d.da, b2 = d.b0 + 2 * d.db;
      w = solve_edge(collapse(patch.stencil[b1 * 4 + a1], d.axis), collapse(patch.stencil[b2 * 4 + a2], d.axis));
    }
    for (int s = 1; s <= 2; ++s) {
      const int a = d.a0 + s * d.da, b = d.b0 + s * d.db;
      at(a, b, d.c0) = w.start[s - 1];
      at(a, b, d.c1) = w.end[s - 1];
    }
  }

  // f-points: A P = 0 restricted to the four interior points
  constexpr std::array<std::array<int, 2>, 4> f{{{1, 1}, {2, 1}, {1, 2}, {2, 2}}};
  std::array<std::array<double, 4>, 4> m{};
  std::array<std::array<double, 4>, 4> rhs{};
  for (int r = 0; r < 4; ++r) {
    const Stencil3& s = patch.stencil[f[r][1] * 4 + f[r][0]];
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        const int a = f[r][0] + dx, b = f[r][1] + dy;
        const bool interior = a >= 1 && a <= 2 && b >= 1 && b <= 2;
        if (interior) {
          m[r][(b - 1) * 2 + (a - 1)] += s(dx, dy);
        } else {
          for (int c = 0; c < 4; ++c) rhs[r][c] -= s(dx, dy) * at(a, b, c);
        }
      }
  }
  small_solve<4, 4>(m, rhs);
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) at(f[r][0], f[r][1], c) = rhs[r][c];
  return p;
}

}  // namespace boxmg

// Ritz-Galerkin element matrix of a refined cell: P^T (sum of child
// elements) P with the cell-local prolongation.
inline ElementMatrix galerkin_element(const std::array<ElementMatrix, 9>& children, const CellProlongation& p) {
  std::array<std::array<double, 16>, 16> k{};
  for (int cb = 0; cb < 3; ++cb)
    for (int ca = 0; ca < 3; ++ca) {
      const ElementMatrix& e = children[cb * 3 + ca];
      std::array<int, 4> loc{cb * 4 + ca, cb * 4 + ca + 1, (cb + 1) * 4 + ca, (cb + 1) * 4 + ca + 1};
      for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) k[loc[r]][loc[c]] += e[r][c];
    }
  std::array<std::array<double, 4>, 16> kp{};
  for (int r = 0; r < 16; ++r)
    for (int c = 0; c < 4; ++c) {
      double s = 0.0;
      for (int q = 0; q < 16; ++q) s += k[r][q] * p[q * 4 + c];
      kp[r][c] = s;
    }
  ElementMatrix g{};
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) {
      double s = 0.0;
      for (int q = 0; q < 16; ++q) s += p[q * 4 + r] * kp[q][c];
      g[r][c] = s;
    }
  return g;
}

// Operators of every level of one spacetree: element matrices, prolongation
// tables, vertex diagonals and the weights of the smoothed restriction.
class OperatorStore {
 public:
  OperatorFlavor flavor() const { return flavor_; }

  // Rebuilds everything bottom-up. Writes VertexRecord::diag.
  void rebuild(Spacetree& t, const EpsilonField& field, OperatorFlavor flavor) {
    flavor_ = flavor;
    const int nl = t.num_levels();
    levels_.assign(static_cast<std::size_t>(nl), {});
    for (int l = 0; l < nl; ++l) {
      const auto& cells = t.level(l).cells;
      LevelData& d = levels_[l];
      d.eps.resize(cells.size());
      d.slot.assign(cells.size(), kNone);
      for (std::size_t c = 0; c < cells.size(); ++c) d.eps[c] = field.at(t.cell_id(l, static_cast<std::int32_t>(c)).midpoint());
    }
    if (flavor_ == OperatorFlavor::BoxMG) {
      for (int l = nl - 2; l >= 0; --l) {
        const auto& cells = t.level(l).cells;
        LevelData& d = levels_[l];
        for (std::size_t c = 0; c < cells.size(); ++c) {
          if (!cells[c].refined()) continue;
          const auto ci = static_cast<std::int32_t>(c);
          d.slot[c] = static_cast<std::int32_t>(d.prolong.size());
          const CellProlongation p = boxmg::cell_prolongation(gather_patch(t, l, ci));
          std::array<ElementMatrix, 9> ch;
          for (int s = 0; s < 9; ++s) ch[s] = element(l + 1, cells[c].first_child + s);
          d.prolong.push_back(p);
          d.galerkin.push_back(galerkin_element(ch, p));
        }
      }
    }
    for (int l = 0; l < nl; ++l) {
      Level& L = t.level(l);
      for (VertexRecord& v : L.vertices) v.diag = 0.0;
      for (std::size_t c = 0; c < L.cells.size(); ++c) {
        const ElementMatrix e = element(l, static_cast<std::int32_t>(c));
        for (int k = 0; k < 4; ++k) L.vertices[L.cells[c].vertex[k]].diag += e[k][k];
      }
    }
  }

  double epsilon(int l, std::int32_t c) const { return levels_[l].eps[c]; }

  // Flavour element matrix: rediscretised, or Galerkin on refined BoxMG cells.
  ElementMatrix element(int l, std::int32_t c) const {
    const LevelData& d = levels_[l];
    if (d.slot[c] != kNone) return d.galerkin[d.slot[c]];
    return element_matrix(d.eps[c]);
  }

  ElementMatrix rediscretised_element(int l, std::int32_t c) const { return element_matrix(levels_[l].eps[c]); }

  const CellProlongation* prolongation_table(int l, std::int32_t c) const {
    const LevelData& d = levels_[l];
    return d.slot[c] == kNone ? nullptr : &d.prolong[d.slot[c]];
  }

  // Weights of fine vertex v (level lf) towards the corners of its canonical parent.
  std::array<double, 4> parent_weights(const Spacetree& t, int lf, std::int32_t v) const {
    const VertexRecord& x = t.level(lf).vertices[v];
    return cell_weights(t, lf - 1, x.parent_cell, x.i, x.j);
  }

  // Weights of fine point (fi, fj) inside refined cell c of level lc.
  std::array<double, 4> cell_weights(const Spacetree& t, int lc, std::int32_t c, std::int64_t fi, std::int64_t fj) const {
    const Cell& p = t.level(lc).cells[c];
    const int a = static_cast<int>(fi - 3 * static_cast<std::int64_t>(p.i));
    const int b = static_cast<int>(fj - 3 * static_cast<std::int64_t>(p.j));
    const CellProlongation* tab = prolongation_table(lc, c);
    if (!tab) return bilinear_weights(a, b);
    const int o = (b * 4 + a) * 4;
    return {(*tab)[o], (*tab)[o + 1], (*tab)[o + 2], (*tab)[o + 3]};
  }

  // P entry between fine vertex v (level lf) and coarse vertex cv (level lf-1).
  double weight(const Spacetree& t, int lf, std::int32_t v, std::int32_t cv) const {
    const VertexRecord& x = t.level(lf).vertices[v];
    const Cell& p = t.level(lf - 1).cells[x.parent_cell];
    const std::array<double, 4> w = cell_weights(t, lf - 1, x.parent_cell, x.i, x.j);
    for (int q = 0; q < 4; ++q)
      if (p.vertex[q] == cv) return w[q];
    return 0.0;
  }

  // Operator row of vertex v built from the flavour elements of level l.
  Stencil3 vertex_stencil(const Spacetree& t, int l, std::int32_t v, bool unit = false) const {
    const VertexRecord& rec = t.level(l).vertices[v];
    Stencil3 s;
    for (int ca = -1; ca <= 0; ++ca)
      for (int cb = -1; cb <= 0; ++cb) {
        const std::int32_t c = t.find_cell(l, rec.i + ca, rec.j + cb);
        if (c == kNone) continue;
        const ElementMatrix e = unit ? element_matrix(1.0) : element(l, c);
        const int me = (-ca) + 2 * (-cb);
        for (int o = 0; o < 4; ++o) s(ca + (o & 1), cb + (o >> 1)) += e[me][o];
      }
    return s;
  }

  // Smoothed restriction weights omega * sum_k P_kv A_kx / A_xx from every
  // active fine vertex x towards its parent corners, restricted to fine
  // offsets |dx|,|dy| <= 2 around the coarse vertex.
  void rebuild_rtilde(const Spacetree& t, double omega, bool true_operator) {
    rtilde_.assign(static_cast<std::size_t>(t.num_levels()), {});
    for (int lf = 1; lf < t.num_levels(); ++lf) {
      const Level& L = t.level(lf);
      auto& out = rtilde_[lf];
      out.assign(L.vertices.size(), {0.0, 0.0, 0.0, 0.0});
      for (std::size_t xv = 0; xv < L.vertices.size(); ++xv) {
        const VertexRecord& x = L.vertices[xv];
        if (!x.active()) continue;
        // column x of the fine operator: A_kx for the 3x3 neighbours k
        Stencil3 col;
        double axx = 0.0;
        for (int ca = -1; ca <= 0; ++ca)
          for (int cb = -1; cb <= 0; ++cb) {
            const std::int32_t c = t.find_cell(lf, x.i + ca, x.j + cb);
            const ElementMatrix e = true_operator ? element(lf, c) : element_matrix(1.0);
            const int me = (-ca) + 2 * (-cb);
            for (int o = 0; o < 4; ++o) col(ca + (o & 1), cb + (o >> 1)) += e[o][me];
            axx += e[me][me];
          }
        const Cell& p = t.level(lf - 1).cells[x.parent_cell];
        for (int q = 0; q < 4; ++q) {
          const VertexRecord& v = t.level(lf - 1).vertices[p.vertex[q]];
          const std::int64_t ox = x.i - 3 * static_cast<std::int64_t>(v.i);
          const std::int64_t oy = x.j - 3 * static_cast<std::int64_t>(v.j);
          if (std::abs(ox) > 2 || std::abs(oy) > 2 || v.kind == VertexKind::Dirichlet) continue;
          double s = 0.0;
          for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) {
              const std::int32_t k = t.find_vertex(lf, x.i + dx, x.j + dy);
              if (k == kNone || L.vertices[k].kind == VertexKind::Dirichlet) continue;
              s += weight(t, lf, k, p.vertex[q]) * col(dx, dy);
            }
          out[xv][q] = omega * s / axx;
        }
      }
    }
  }

  bool has_rtilde(int lf) const { return lf < static_cast<int>(rtilde_.size()) && !rtilde_[lf].empty(); }
  const std::array<double, 4>& rtilde(int lf, std::int32_t x) const { return rtilde_[lf][x]; }

 private:
  struct LevelData {
    std::vector<double> eps;
    std::vector<std::int32_t> slot;
    std::vector<ElementMatrix> galerkin;
    std::vector<CellProlongation> prolong;
  };

  boxmg::CellPatch gather_patch(const Spacetree& t, int l, std::int32_t c) const {
    const Cell& cell = t.level(l).cells[c];
    const Level& F = t.level(l + 1);
    boxmg::CellPatch patch;
    std::array<bool, 16> usable{};
    for (int b = 0; b < 4; ++b)
      for (int a = 0; a < 4; ++a) {
        const std::int32_t v = t.find_vertex(l + 1, 3 * static_cast<std::int64_t>(cell.i) + a, 3 * static_cast<std::int64_t>(cell.j) + b);
        const VertexRecord& rec = F.vertices[v];
        usable[b * 4 + a] = rec.kind != VertexKind::Dirichlet && rec.kind != VertexKind::Hanging;
        const bool corner = (a == 0 || a == 3) && (b == 0 || b == 3);
        if (usable[b * 4 + a] && !corner) patch.stencil[b * 4 + a] = vertex_stencil(t, l + 1, v);
      }
    patch.collapse_edge = {usable[1] && usable[2], usable[13] && usable[14], usable[4] && usable[8], usable[7] && usable[11]};
    return patch;
  }

  OperatorFlavor flavor_ = OperatorFlavor::Geometric;
  std::vector<LevelData> levels_;
  std::vector<std::vector<std::array<double, 4>>> rtilde_;
};

// ---------------------------------------------------------------------------
// Regular-grid stencil fields, used to inspect operators level by level.

struct GridStencils {
  int level = 0;
  std::int64_t n = 1;  // cells per axis
  std::vector<Stencil3> s;
  std::vector<char> dirichlet;

  std::size_t idx(std::int64_t i, std::int64_t j) const { return static_cast<std::size_t>(j * (n + 1) + i); }
  Stencil3& at(std::int64_t i, std::int64_t j) { return s[idx(i, j)]; }
  const Stencil3& at(std::int64_t i, std::int64_t j) const { return s[idx(i, j)]; }
  bool is_dirichlet(std::int64_t i, std::int64_t j) const { return dirichlet[idx(i, j)] != 0; }
};

// Prolongation columns: for every coarse vertex, its weights on the fine grid.
struct GridProlongation {
  int coarse_level = 0;
  std::int64_t n = 1;  // coarse cells per axis
  std::vector<Stencil7> col;

  Stencil7& at(std::int64_t i, std::int64_t j) { return col[static_cast<std::size_t>(j * (n + 1) + i)]; }
  const Stencil7& at(std::int64_t i, std::int64_t j) const { return col[static_cast<std::size_t>(j * (n + 1) + i)]; }
};

inline GridStencils make_grid(int level) {
  GridStencils g;
  g.level = level;
  g.n = pow3(level);
  g.s.assign(static_cast<std::size_t>((g.n + 1) * (g.n + 1)), Stencil3{});
  g.dirichlet.assign(g.s.size(), 0);
  for (std::int64_t j = 0; j <= g.n; ++j)
    for (std::int64_t i = 0; i <= g.n; ++i) g.dirichlet[g.idx(i, j)] = (i == 0 || j == 0 || i == g.n || j == g.n);
  return g;
}

// Rediscretised stencils of a uniform level for a material field.
inline GridStencils rediscretised_stencils(int level, const EpsilonField& field) {
  GridStencils g = make_grid(level);
  for (std::int64_t cj = 0; cj < g.n; ++cj)
    for (std::int64_t ci = 0; ci < g.n; ++ci) {
      const ElementMatrix e = element_matrix(field.at(CellId{level, ci, cj}.midpoint()));
      for (int r = 0; r < 4; ++r) {
        Stencil3& s = g.at(ci + (r & 1), cj + (r >> 1));
        for (int c = 0; c < 4; ++c) s((c & 1) - (r & 1), (c >> 1) - (r >> 1)) += e[r][c];
      }
    }
  return g;
}

// Flavour stencils of a uniformly refined tree level.
inline GridStencils store_stencils(const Spacetree& t, const OperatorStore& ops, int level) {
  GridStencils g = make_grid(level);
  const Level& L = t.level(level);
  for (std::size_t v = 0; v < L.vertices.size(); ++v) {
    const VertexRecord& r = L.vertices[v];
    g.at(r.i, r.j) = ops.vertex_stencil(t, level, static_cast<std::int32_t>(v));
  }
  return g;
}

inline GridProlongation geometric_grid_prolongation(int coarse_level) {
  GridProlongation p;
  p.coarse_level = coarse_level;
  p.n = pow3(coarse_level);
  p.col.assign(static_cast<std::size_t>((p.n + 1) * (p.n + 1)), geometric_prolongation());
  return p;
}

// Operator-dependent prolongation on a uniform grid: edges shared by two
// interior cells collapse, boundary edges interpolate linearly.
inline GridProlongation boxmg_prolongation(const GridStencils& fine) {
  GridProlongation p;
  p.coarse_level = fine.level - 1;
  p.n = fine.n / 3;
  p.col.assign(static_cast<std::size_t>((p.n + 1) * (p.n + 1)), Stencil7{});
  for (std::int64_t cj = 0; cj < p.n; ++cj)
    for (std::int64_t ci = 0; ci < p.n; ++ci) {
      boxmg::CellPatch patch;
      std::array<bool, 16> usable{};
      for (int b = 0; b < 4; ++b)
        for (int a = 0; a < 4; ++a) {
          const std::int64_t fi = 3 * ci + a, fj = 3 * cj + b;
          usable[b * 4 + a] = !fine.is_dirichlet(fi, fj);
          patch.stencil[b * 4 + a] = fine.at(fi, fj);
        }
      patch.collapse_edge = {usable[1] && usable[2], usable[13] && usable[14], usable[4] && usable[8], usable[7] && usable[11]};
      const CellProlongation tab = boxmg::cell_prolongation(patch);
      for (int b = 0; b < 4; ++b)
        for (int a = 0; a < 4; ++a)
          for (int c = 0; c < 4; ++c) {
            const std::int64_t vi = ci + (c & 1), vj = cj + (c >> 1);
            const int dx = static_cast<int>(3 * ci + a - 3 * vi), dy = static_cast<int>(3 * cj + b - 3 * vj);
            // shared points get the same value from every cell containing them
            p.at(vi, vj)(dx, dy) = tab[(b * 4 + a) * 4 + c];
          }
    }
  return p;
}

// Coarse stencils R A P with R = P^T, evaluated stencil-wise.
inline GridStencils ritz_galerkin_coarse(const GridStencils& fine, const GridProlongation& p) {
  GridStencils g = make_grid(p.coarse_level);
  const std::int64_t nf = fine.n;
  for (std::int64_t vj = 1; vj < g.n; ++vj)
    for (std::int64_t vi = 1; vi < g.n; ++vi) {
      Stencil3& out = g.at(vi, vj);
      // (A P_v) on the fine grid, then tested against P_w for neighbours w
      for (int wy = -1; wy <= 1; ++wy)
        for (int wx = -1; wx <= 1; ++wx) {
          const std::int64_t wi = vi + wx, wj = vj + wy;
          if (g.is_dirichlet(wi, wj)) continue;
          const Stencil7& pv = p.at(vi, vj);
          const Stencil7& pw = p.at(wi, wj);
          double s = 0.0;
          for (int ky = -3; ky <= 3; ++ky)
            for (int kx = -3; kx <= 3; ++kx) {
              const std::int64_t ki = 3 * vi + kx, kj = 3 * vj + ky;
              if (ki <= 0 || kj <= 0 || ki >= nf || kj >= nf) continue;
              const double pk = pv(kx, ky);
              if (pk == 0.0) continue;
              const Stencil3& a = fine.at(ki, kj);
              for (int my = -1; my <= 1; ++my)
                for (int mx = -1; mx <= 1; ++mx) {
                  const std::int64_t mi = ki + mx, mj = kj + my;
                  if (mi <= 0 || mj <= 0 || mi >= nf || mj >= nf) continue;
                  const int ox = static_cast<int>(mi - 3 * wi), oy = static_cast<int>(mj - 3 * wj);
                  if (!Stencil7::contains(ox, oy)) continue;
                  s += pk * a(mx, my) * pw(ox, oy);
                }
            }
          out(wx, wy) = s;
        }
    }
  return g;
}

// Smoothed restriction row of coarse vertex (vi, vj):
// omega * sum_k P_kv A_kx / A_xx over interior fine x. With truncate set,
// the outer ring |dx| = 3 or |dy| = 3 is dropped.
inline Stencil7 smoothed_restriction(const GridStencils& fine, const GridProlongation& p, std::int64_t vi, std::int64_t vj,
                                     double omega, bool truncate = false) {
  Stencil7 out;
  const std::int64_t nf = fine.n;
  const Stencil7& pv = p.at(vi, vj);
  for (int oy = -3; oy <= 3; ++oy)
    for (int ox = -3; ox <= 3; ++ox) {
      if (truncate && (std::abs(ox) == 3 || std::abs(oy) == 3)) continue;
      const std::int64_t xi = 3 * vi + ox, xj = 3 * vj + oy;
      if (xi <= 0 || xj <= 0 || xi >= nf || xj >= nf) continue;
      double s = 0.0;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          const std::int64_t ki = xi + dx, kj = xj + dy;
          if (ki <= 0 || kj <= 0 || ki >= nf || kj >= nf) continue;
          const int kx = ox + dx, ky = oy + dy;
          if (!Stencil7::contains(kx, ky)) continue;
          // A_kx is the entry of row k at offset (x - k)
          s += pv(kx, ky) * fine.at(ki, kj)(-dx, -dy);
        }
      out(ox, oy) = omega * s / fine.at(xi, xj)(0, 0);
    }
  return out;
}

}  // namespace adafac
