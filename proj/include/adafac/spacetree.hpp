#pragma once

#include <algorithm>
#include <cmath>
#include <array>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace adafac {

inline constexpr int kSubdivision = 3;
inline constexpr std::int32_t kNone = -1;

constexpr std::int64_t pow3(int level) {
  std::int64_t p = 1;
  for (int l = 0; l < level; ++l) p *= kSubdivision;
  return p;
}

struct Point {
  double x = 0.0;
  double y = 0.0;
};

struct CellId {
  int level = 0;
  std::int64_t i = 0;
  std::int64_t j = 0;

  CellId parent() const { return {level - 1, i / kSubdivision, j / kSubdivision}; }
  Point midpoint() const {
    const double n = static_cast<double>(pow3(level));
    return {(static_cast<double>(i) + 0.5) / n, (static_cast<double>(j) + 0.5) / n};
  }
  bool operator==(const CellId&) const = default;
};

struct VertexId {
  int level = 0;
  std::int64_t i = 0;
  std::int64_t j = 0;

  Point position() const {
    const double n = static_cast<double>(pow3(level));
    return {static_cast<double>(i) / n, static_cast<double>(j) / n};
  }
  bool on_boundary() const {
    const std::int64_t n = pow3(level);
    return i == 0 || j == 0 || i == n || j == n;
  }
  bool operator==(const VertexId&) const = default;
};

// A fine vertex coinciding with a vertex of the next coarser level.
inline bool is_c_point(const VertexId& v) {
  return v.level > 0 && v.i % kSubdivision == 0 && v.j % kSubdivision == 0;
}

enum class VertexKind : std::uint8_t {
  InteriorDof,       // all adjacent cells exist, not all of them refined
  Dirichlet,         // on the domain boundary
  Hanging,           // fewer adjacent same-level cells than 2^d
  CoarseOverlapped,  // all adjacent cells refined: carries only corrections
};

// Per-vertex persistent record. The fields sl, stl, sf, inj double as the
// reference engine's per-cycle scratch and the pipelined engine's bookmarks.
struct VertexRecord {
  double u = 0.0;
  double r = 0.0;
  double btilde = 0.0;
  double diag = 0.0;
  double E = 0.0;   // accumulated correction prolonged from coarser levels
  double sl = 0.0;  // level correction c
  double stl = 0.0; // damping correction c~
  double sf = 0.0;  // fine-level updates not yet seen by the FAS copy
  std::array<double, 2> inj{};  // injected corrections, double buffered by sweep parity
  std::int32_t i = 0;
  std::int32_t j = 0;
  std::int32_t parent_cell = kNone;
  std::int32_t fine_twin = kNone;
  std::int32_t coarse_twin = kNone;
  std::uint8_t adjacent_cells = 0;
  std::uint8_t refined_cells = 0;
  std::uint8_t finest_level = 0;
  VertexKind kind = VertexKind::Hanging;

  bool active() const { return kind == VertexKind::InteriorDof || kind == VertexKind::CoarseOverlapped; }
  bool persistent() const { return kind != VertexKind::Hanging; }
};

// Corner order: 0=(0,0) 1=(1,0) 2=(0,1) 3=(1,1).
struct Cell {
  std::int32_t i = 0;
  std::int32_t j = 0;
  std::array<std::int32_t, 4> vertex{kNone, kNone, kNone, kNone};
  std::int32_t first_child = kNone;  // children are contiguous, lexicographic (ca + 3 cb)
  std::int32_t parent = kNone;

  bool refined() const { return first_child != kNone; }
};

struct Level {
  std::vector<VertexRecord> vertices;
  std::vector<Cell> cells;
  std::unordered_map<std::uint64_t, std::int32_t> vertex_index;
  std::unordered_map<std::uint64_t, std::int32_t> cell_index;
};

enum class ChildOrder { Peano, Lexicographic };

enum class RefineStatus { Refined, AtMaxLevel };

struct RefineResult {
  RefineStatus status = RefineStatus::Refined;
  std::vector<VertexId> created;
};

// Load/store counters of one sweep, per level and vertex.
struct TouchCounts {
  std::vector<std::vector<std::uint16_t>> loads;
  std::vector<std::vector<std::uint16_t>> stores;
};

class Spacetree {
 public:
  using BoundaryFunction = std::function<double(Point)>;

  // Root cell only. max_level caps refinement.
  explicit Spacetree(int max_level, BoundaryFunction boundary = default_boundary)
      : max_level_(max_level), boundary_(std::move(boundary)) {
    if (max_level < 0) throw std::invalid_argument("max_level must be non-negative");
    levels_.emplace_back();
    Level& l0 = levels_[0];
    for (int c = 0; c < 4; ++c) add_vertex(0, c & 1, c >> 1);
    Cell root;
    for (int c = 0; c < 4; ++c) root.vertex[c] = l0.vertex_index.at(key(c & 1, c >> 1));
    l0.cells.push_back(root);
    l0.cell_index[key(0, 0)] = 0;
    update_topology();
  }

  // u = 1 on the bottom edge (corners included), 0 on the rest of the boundary.
  static double default_boundary(Point p) { return p.y == 0.0 ? 1.0 : 0.0; }

  // Regular tree refined uniformly down to `levels`.
  static Spacetree build_regular(int levels, int max_level = -1, BoundaryFunction boundary = default_boundary) {
    if (levels < 0) throw std::invalid_argument("levels must be non-negative");
    Spacetree t(max_level < 0 ? levels : max_level, std::move(boundary));
    if (levels > t.max_level_) throw std::invalid_argument("levels exceed max_level");
    for (int l = 0; l < levels; ++l) {
      const std::size_t n = t.levels_[l].cells.size();
      t.reserve_level(l + 1, n * 9);
      for (std::size_t c = 0; c < n; ++c) t.refine_index(l, static_cast<std::int32_t>(c), nullptr);
    }
    t.update_topology();
    return t;
  }

  int max_level() const { return max_level_; }
  void set_max_level(int l) { max_level_ = l; }
  int depth() const { return static_cast<int>(levels_.size()) - 1; }
  int num_levels() const { return static_cast<int>(levels_.size()); }

  Level& level(int l) { return levels_.at(static_cast<std::size_t>(l)); }
  const Level& level(int l) const { return levels_.at(static_cast<std::size_t>(l)); }

  const BoundaryFunction& boundary() const { return boundary_; }

  std::int32_t find_vertex(int l, std::int64_t i, std::int64_t j) const {
    if (l < 0 || l > depth()) return kNone;
    const auto& m = levels_[l].vertex_index;
    auto it = m.find(key(i, j));
    return it == m.end() ? kNone : it->second;
  }
  std::int32_t find_cell(int l, std::int64_t i, std::int64_t j) const {
    if (l < 0 || l > depth()) return kNone;
    const auto& m = levels_[l].cell_index;
    auto it = m.find(key(i, j));
    return it == m.end() ? kNone : it->second;
  }

  VertexId vertex_id(int l, std::int32_t v) const {
    const VertexRecord& r = levels_[l].vertices[v];
    return {l, r.i, r.j};
  }
  CellId cell_id(int l, std::int32_t c) const {
    const Cell& r = levels_[l].cells[c];
    return {l, r.i, r.j};
  }

  bool is_c_point(int l, std::int32_t v) const { return adafac::is_c_point(vertex_id(l, v)); }

  // Refines one cell and updates the topology. Throws if the cell does not
  // exist or is already refined. Returns AtMaxLevel without change at the cap.
  RefineResult refine_cell(const CellId& id) {
    RefineResult res = refine_without_update(id);
    if (res.status == RefineStatus::Refined) update_topology();
    return res;
  }

  // Batch form: topology is updated once at the end. Already refined cells
  // are skipped silently.
  std::vector<VertexId> refine_cells(const std::vector<CellId>& ids) {
    std::vector<VertexId> created;
    bool any = false;
    for (const CellId& id : ids) {
      const std::int32_t c = find_cell(id.level, id.i, id.j);
      if (c == kNone) throw std::out_of_range("refine: cell does not exist");
      if (levels_[id.level].cells[c].refined() || id.level >= max_level_) continue;
      refine_index(id.level, c, &created);
      any = true;
    }
    if (any) update_topology();
    return created;
  }

  RefineResult refine_without_update(const CellId& id) {
    const std::int32_t c = find_cell(id.level, id.i, id.j);
    if (c == kNone) throw std::out_of_range("refine: cell does not exist");
    if (levels_[id.level].cells[c].refined()) throw std::logic_error("refine: cell already refined");
    RefineResult res;
    if (id.level >= max_level_) {
      res.status = RefineStatus::AtMaxLevel;
      return res;
    }
    refine_index(id.level, c, &res.created);
    return res;
  }

  // Recomputes adjacency counts, vertex kinds, twins and finest levels.
  void update_topology() {
    for (int l = 0; l <= depth(); ++l) {
      Level& L = levels_[l];
      for (VertexRecord& v : L.vertices) {
        v.adjacent_cells = 0;
        v.refined_cells = 0;
        v.fine_twin = kNone;
        v.coarse_twin = kNone;
      }
      for (const Cell& c : L.cells)
        for (std::int32_t v : c.vertex) {
          ++L.vertices[v].adjacent_cells;
          if (c.refined()) ++L.vertices[v].refined_cells;
        }
      const std::int64_t n = pow3(l);
      for (VertexRecord& v : L.vertices) {
        if (v.i == 0 || v.j == 0 || v.i == n || v.j == n)
          v.kind = VertexKind::Dirichlet;
        else if (v.adjacent_cells < 4)
          v.kind = VertexKind::Hanging;
        else
          v.kind = v.refined_cells == 4 ? VertexKind::CoarseOverlapped : VertexKind::InteriorDof;
      }
    }
    for (int l = 1; l <= depth(); ++l) {
      Level& L = levels_[l];
      for (std::size_t k = 0; k < L.vertices.size(); ++k) {
        VertexRecord& v = L.vertices[k];
        if (v.i % kSubdivision != 0 || v.j % kSubdivision != 0) continue;
        const std::int32_t c = find_vertex(l - 1, v.i / kSubdivision, v.j / kSubdivision);
        if (c == kNone) throw std::logic_error("spacetree: c-point without coarse vertex");
        v.coarse_twin = c;
        levels_[l - 1].vertices[c].fine_twin = static_cast<std::int32_t>(k);
      }
    }
    for (int l = depth(); l >= 0; --l) {
      for (VertexRecord& v : levels_[l].vertices) {
        v.finest_level = static_cast<std::uint8_t>(l);
        if (v.fine_twin != kNone)
          v.finest_level = std::max(v.finest_level, levels_[l + 1].vertices[v.fine_twin].finest_level);
      }
    }
  }

  std::size_t count_vertices(int l, VertexKind kind) const {
    std::size_t n = 0;
    for (const VertexRecord& v : levels_[l].vertices) n += v.kind == kind;
    return n;
  }

  // Composite degrees of freedom: interior vertices not overlapped by finer cells.
  std::size_t count_dofs() const {
    std::size_t n = 0;
    for (int l = 0; l <= depth(); ++l) n += count_vertices(l, VertexKind::InteriorDof);
    return n;
  }

  // Depth-first traversal. The visitor receives
  //   first_touch(level, vertex, parent_cell)
  //   cell(level, cell, parent_cell)          after the children were visited
  //   last_touch(level, vertex, parent_cell)
  // where parent_cell indexes level-1 (kNone on level 0). Every vertex gets
  // exactly one first and one last touch per sweep.
  template <class Visitor>
  void traverse(Visitor& vis, ChildOrder order = ChildOrder::Peano, TouchCounts* counts = nullptr) {
    entered_.resize(levels_.size());
    left_.resize(levels_.size());
    for (std::size_t l = 0; l < levels_.size(); ++l) {
      entered_[l].assign(levels_[l].vertices.size(), 0);
      left_[l].assign(levels_[l].vertices.size(), 0);
    }
    if (counts) {
      counts->loads.resize(levels_.size());
      counts->stores.resize(levels_.size());
      for (std::size_t l = 0; l < levels_.size(); ++l) {
        counts->loads[l].assign(levels_[l].vertices.size(), 0);
        counts->stores[l].assign(levels_[l].vertices.size(), 0);
      }
    }
    descend(vis, 0, 0, kNone, false, false, order, counts);
  }

 private:
  static std::uint64_t key(std::int64_t i, std::int64_t j) {
    return (static_cast<std::uint64_t>(i) << 32) | static_cast<std::uint64_t>(static_cast<std::uint32_t>(j));
  }

  void reserve_level(int l, std::size_t cells) {
    if (static_cast<int>(levels_.size()) <= l) levels_.resize(static_cast<std::size_t>(l) + 1);
    Level& L = levels_[l];
    L.cells.reserve(cells);
    L.cell_index.reserve(cells);
    const std::size_t verts = cells + 2 * static_cast<std::size_t>(std::sqrt(static_cast<double>(cells))) + 1;
    L.vertices.reserve(verts);
    L.vertex_index.reserve(verts);
  }

  std::int32_t add_vertex(int l, std::int64_t i, std::int64_t j) {
    Level& L = levels_[l];
    const auto idx = static_cast<std::int32_t>(L.vertices.size());
    VertexRecord v;
    v.i = static_cast<std::int32_t>(i);
    v.j = static_cast<std::int32_t>(j);
    const VertexId id{l, i, j};
    if (id.on_boundary()) {
      v.kind = VertexKind::Dirichlet;
      v.u = boundary_(id.position());
    }
    L.vertices.push_back(v);
    L.vertex_index.emplace(key(i, j), idx);
    return idx;
  }

  void refine_index(int l, std::int32_t c, std::vector<VertexId>* created) {
    if (static_cast<int>(levels_.size()) <= l + 1) levels_.resize(static_cast<std::size_t>(l) + 2);
    Level& F = levels_[l + 1];
    const Cell parent = levels_[l].cells[c];
    std::array<double, 4> pu{};
    for (int k = 0; k < 4; ++k) pu[k] = levels_[l].vertices[parent.vertex[k]].u;

    std::array<std::int32_t, 16> fv{};
    for (int b = 0; b < 4; ++b)
      for (int a = 0; a < 4; ++a) {
        const std::int64_t gi = 3 * static_cast<std::int64_t>(parent.i) + a;
        const std::int64_t gj = 3 * static_cast<std::int64_t>(parent.j) + b;
        auto it = F.vertex_index.find(key(gi, gj));
        std::int32_t v;
        if (it != F.vertex_index.end()) {
          v = it->second;
        } else {
          v = add_vertex(l + 1, gi, gj);
          VertexRecord& rec = F.vertices[v];
          rec.parent_cell = c;
          if (rec.kind != VertexKind::Dirichlet) {
            const double wx1 = a / 3.0, wy1 = b / 3.0;
            const double wx0 = 1.0 - wx1, wy0 = 1.0 - wy1;
            rec.u = wx0 * wy0 * pu[0] + wx1 * wy0 * pu[1] + wx0 * wy1 * pu[2] + wx1 * wy1 * pu[3];
          }
          if (created) created->push_back({l + 1, gi, gj});
        }
        fv[b * 4 + a] = v;
      }

    const auto first = static_cast<std::int32_t>(F.cells.size());
    for (int cb = 0; cb < 3; ++cb)
      for (int ca = 0; ca < 3; ++ca) {
        Cell ch;
        ch.i = 3 * parent.i + ca;
        ch.j = 3 * parent.j + cb;
        ch.parent = c;
        ch.vertex = {fv[cb * 4 + ca], fv[cb * 4 + ca + 1], fv[(cb + 1) * 4 + ca], fv[(cb + 1) * 4 + ca + 1]};
        F.cell_index.emplace(key(ch.i, ch.j), static_cast<std::int32_t>(F.cells.size()));
        F.cells.push_back(ch);
      }
    levels_[l].cells[c].first_child = first;
  }

  template <class Visitor>
  void descend(Visitor& vis, int l, std::int32_t c, std::int32_t parent, bool flip_x, bool flip_y, ChildOrder order,
               TouchCounts* counts) {
    const Cell cell = levels_[l].cells[c];
    auto& ent = entered_[l];
    for (std::int32_t v : cell.vertex) {
      if (ent[v]++ == 0) {
        if (counts) ++counts->loads[l][v];
        vis.first_touch(l, v, parent);
      }
    }
    if (cell.refined()) {
      for (int s = 0; s < 9; ++s) {
        int ca, cb;
        bool fx = flip_x, fy = flip_y;
        if (order == ChildOrder::Lexicographic) {
          ca = s % 3;
          cb = s / 3;
        } else {
          // Serpentine in columns; column-odd children mirror y, row-odd mirror x.
          const int col = s / 3;
          const int row = (col % 2 == 0) ? s % 3 : 2 - s % 3;
          ca = flip_x ? 2 - col : col;
          cb = flip_y ? 2 - row : row;
          if (col % 2 == 1) fy = !fy;
          if (row % 2 == 1) fx = !fx;
        }
        descend(vis, l + 1, cell.first_child + cb * 3 + ca, c, fx, fy, order, counts);
      }
    }
    vis.cell(l, c, parent);
    auto& lft = left_[l];
    const Level& L = levels_[l];
    for (std::int32_t v : cell.vertex) {
      if (++lft[v] == L.vertices[v].adjacent_cells) {
        if (counts) ++counts->stores[l][v];
        vis.last_touch(l, v, parent);
      }
    }
  }

  int max_level_;
  BoundaryFunction boundary_;
  std::vector<Level> levels_;
  std::vector<std::vector<std::uint8_t>> entered_;
  std::vector<std::vector<std::uint8_t>> left_;
};

}  // namespace adafac
