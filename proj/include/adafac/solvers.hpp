#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "adafac/discretization.hpp"
#include "adafac/operators.hpp"
#include "adafac/oracle.hpp"
#include "adafac/spacetree.hpp"

namespace adafac {

enum class SolverVariant { Additive, AdditiveExpDamped, BPX, AFACc, AdaFacPI, AdaFacJac, MultiplicativeV10 };

inline SolverVariant parse_variant(const std::string& s) {
  if (s == "additive") return SolverVariant::Additive;
  if (s == "expdamped") return SolverVariant::AdditiveExpDamped;
  if (s == "bpx") return SolverVariant::BPX;
  if (s == "afacc") return SolverVariant::AFACc;
  if (s == "adafac-pi") return SolverVariant::AdaFacPI;
  if (s == "adafac-jac") return SolverVariant::AdaFacJac;
  if (s == "multiplicative") return SolverVariant::MultiplicativeV10;
  throw std::invalid_argument("unknown variant: " + s);
}

inline std::string to_string(SolverVariant v) {
  switch (v) {
    case SolverVariant::Additive: return "additive";
    case SolverVariant::AdditiveExpDamped: return "expdamped";
    case SolverVariant::BPX: return "bpx";
    case SolverVariant::AFACc: return "afacc";
    case SolverVariant::AdaFacPI: return "adafac-pi";
    case SolverVariant::AdaFacJac: return "adafac-jac";
    case SolverVariant::MultiplicativeV10: return "multiplicative";
  }
  return "?";
}

struct SolverConfig {
  SolverVariant variant = SolverVariant::AdaFacJac;
  OperatorFlavor flavor = OperatorFlavor::Geometric;
  double omega = 0.6;
  double omega_tilde = 0.6;
  double omega_hat = 0.7;
  int lmin = 1;
  bool rtilde_true_operator = false;
  bool zero_damping = false;  // testing hook: b~ forced to zero
};

struct ResidualNorms {
  double l2h = 0.0;
  double linf = 0.0;
};

struct CycleStats {
  ResidualNorms residual;  // of the iterate the cycle started from
  std::uint64_t updates = 0;
};

// Spacetree, material and operators of one boundary value problem.
class Problem {
 public:
  Problem(Spacetree tree, EpsilonField field, SolverConfig cfg)
      : tree_(std::move(tree)), field_(field), cfg_(cfg) {
    if (cfg_.lmin < 1) throw std::invalid_argument("lmin must be at least 1");
    if (!(cfg_.omega > 0.0)) throw std::invalid_argument("omega must be positive");
    rebuild();
  }

  // Recomputes all operators after a topology change.
  void rebuild() {
    ops_.rebuild(tree_, field_, cfg_.flavor);
    if (cfg_.variant == SolverVariant::AdaFacJac) ops_.rebuild_rtilde(tree_, cfg_.omega, cfg_.rtilde_true_operator);
  }

  Spacetree& tree() { return tree_; }
  const Spacetree& tree() const { return tree_; }
  const OperatorStore& ops() const { return ops_; }
  const EpsilonField& field() const { return field_; }
  const SolverConfig& config() const { return cfg_; }

  // Changing the variant may require R~.
  void set_variant(SolverVariant v) {
    const bool need = v == SolverVariant::AdaFacJac && cfg_.variant != SolverVariant::AdaFacJac;
    cfg_.variant = v;
    if (need) ops_.rebuild_rtilde(tree_, cfg_.omega, cfg_.rtilde_true_operator);
  }
  void set_zero_damping(bool z) { cfg_.zero_damping = z; }

 private:
  Spacetree tree_;
  EpsilonField field_;
  SolverConfig cfg_;
  OperatorStore ops_;
};

// Kernels shared by the level-wise and the pipelined engine. Both call the
// same functions in the same order per vertex, which keeps them bitwise
// comparable up to the summation order of restrictions.
namespace kernel {

inline double level_factor(const SolverConfig& c, int deepest, int l) {
  if (c.variant == SolverVariant::AdditiveExpDamped) return std::pow(c.omega_hat, deepest - l);
  return 1.0;
}

inline double correction(const SolverConfig& c, int deepest, int l, const VertexRecord& v) {
  if (l < c.lmin || !v.active()) return 0.0;
  if (c.variant == SolverVariant::BPX && v.kind == VertexKind::CoarseOverlapped) return c.omega * v.r;
  return level_factor(c, deepest, l) * c.omega * v.r / v.diag;
}

inline bool has_damping_equation(const SolverConfig& c, int l, const VertexRecord& v) {
  return c.variant == SolverVariant::AdaFacJac && l >= c.lmin && v.active() && v.refined_cells > 0;
}

inline double damping(const SolverConfig& c, int l, const VertexRecord& v) {
  if (!has_damping_equation(c, l, v) || c.zero_damping) return 0.0;
  return c.omega_tilde * v.btilde / v.diag;
}

// r -= A_e u on the corners of an unrefined cell.
inline void cell_residual(Problem& p, int l, std::int32_t c) {
  Level& L = p.tree().level(l);
  const Cell& cell = L.cells[c];
  std::array<double, 4> u{};
  for (int k = 0; k < 4; ++k) u[k] = L.vertices[cell.vertex[k]].u;
  const std::array<double, 4> y = apply_element(p.ops().rediscretised_element(l, c), u);
  for (int k = 0; k < 4; ++k) {
    VertexRecord& v = L.vertices[cell.vertex[k]];
    if (v.kind != VertexKind::Dirichlet) v.r -= y[k];
  }
}

// Scatters the complete residual of fine vertex x into the corners of the
// coarse cell `parent`, and the smoothed restriction into b~.
inline void restrict_vertex(Problem& p, int lf, std::int32_t x, std::int32_t parent) {
  Spacetree& t = p.tree();
  const VertexRecord& v = t.level(lf).vertices[x];
  Level& C = t.level(lf - 1);
  const SolverConfig& cfg = p.config();
  const bool masked = cfg.variant == SolverVariant::AFACc && v.kind != VertexKind::Hanging && t.is_c_point(lf, x);
  if (!masked) {
    const Cell& cell = C.cells[parent];
    const std::array<double, 4> w = p.ops().cell_weights(t, lf - 1, parent, v.i, v.j);
    for (int q = 0; q < 4; ++q) {
      if (w[q] == 0.0) continue;
      VertexRecord& cv = C.vertices[cell.vertex[q]];
      if (cv.kind != VertexKind::Dirichlet) cv.r += w[q] * v.r;
    }
  }
  if (cfg.variant == SolverVariant::AdaFacJac && v.active() && p.ops().has_rtilde(lf)) {
    const Cell& canon = C.cells[v.parent_cell];
    const std::array<double, 4>& rt = p.ops().rtilde(lf, x);
    for (int q = 0; q < 4; ++q)
      if (rt[q] != 0.0) C.vertices[canon.vertex[q]].btilde += rt[q] * v.r;
  }
}

// P applied to a coarse field, evaluated at fine point (i,j) of cell `parent`.
template <class Field>
inline double prolong(const Problem& p, int lc, std::int32_t parent, std::int64_t i, std::int64_t j, Field&& f) {
  const Spacetree& t = p.tree();
  const Cell& cell = t.level(lc).cells[parent];
  const std::array<double, 4> w = p.ops().cell_weights(t, lc, parent, i, j);
  double s = 0.0;
  for (int q = 0; q < 4; ++q) s += w[q] * f(t.level(lc).vertices[cell.vertex[q]]);
  return s;
}

// Hanging values always interpolate d-linearly.
inline double interpolate(const Spacetree& t, int lc, std::int32_t parent, std::int64_t i, std::int64_t j) {
  const Cell& cell = t.level(lc).cells[parent];
  const std::array<double, 4> w = bilinear_weights(static_cast<int>(i - 3 * static_cast<std::int64_t>(cell.i)),
                                                   static_cast<int>(j - 3 * static_cast<std::int64_t>(cell.j)));
  double s = 0.0;
  for (int q = 0; q < 4; ++q) s += w[q] * t.level(lc).vertices[cell.vertex[q]].u;
  return s;
}

inline void accumulate_norm(ResidualNorms& n, const VertexRecord& v) {
  const double h = 1.0 / static_cast<double>(pow3(v.finest_level));
  n.l2h += h * h * v.r * v.r;
  n.linf = std::max(n.linf, std::abs(v.r));
}

}  // namespace kernel

// Level-by-level evaluation of one additive cycle. This is the semantic
// reference for the pipelined engine.
class ReferenceEngine {
 public:
  explicit ReferenceEngine(Problem& p) : p_(p) {}

  CycleStats cycle() {
    if (p_.config().variant == SolverVariant::MultiplicativeV10) return two_grid(true);
    CycleStats st;
    Spacetree& t = p_.tree();
    const SolverConfig& cfg = p_.config();
    const int L = t.depth();
    st.residual = compute_residual();

    for (int l = 0; l <= L; ++l)
      for (VertexRecord& v : t.level(l).vertices) {
        v.sl = kernel::correction(cfg, L, l, v);
        v.stl = kernel::damping(cfg, l, v);
        if (l >= cfg.lmin && v.active()) ++st.updates;
        if (kernel::has_damping_equation(cfg, l, v)) ++st.updates;
      }
    if (cfg.variant == SolverVariant::AdaFacPI) {
      for (int l = cfg.lmin + 1; l <= L; ++l) {
        Level& F = t.level(l);
        for (VertexRecord& v : F.vertices) {
          if (!v.active()) continue;
          v.stl = kernel::prolong(p_, l - 1, v.parent_cell, v.i, v.j, [&](const VertexRecord& cv) {
            return cv.kind == VertexKind::Dirichlet ? 0.0 : F.vertices[cv.fine_twin].sl;
          });
        }
      }
    }

    for (int l = 1; l <= L; ++l) {
      for (VertexRecord& v : t.level(l).vertices) {
        if (v.kind == VertexKind::Dirichlet) continue;
        const double pe = kernel::prolong(p_, l - 1, v.parent_cell, v.i, v.j, [](const VertexRecord& cv) { return cv.E; });
        if (v.kind == VertexKind::Hanging) {
          v.E = pe;
        } else {
          v.E = (v.sl - v.stl) + pe;
          v.u += v.E;
        }
      }
    }
    update_fas_state();
    return st;
  }

  // Composite residual on all levels, gathered fine to coarse.
  ResidualNorms compute_residual() {
    Spacetree& t = p_.tree();
    const int L = t.depth();
    for (int l = 0; l <= L; ++l)
      for (VertexRecord& v : t.level(l).vertices) {
        v.r = 0.0;
        v.btilde = 0.0;
      }
    ResidualNorms n;
    for (int l = L; l >= 1; --l) {
      Level& F = t.level(l);
      for (std::size_t c = 0; c < F.cells.size(); ++c)
        if (!F.cells[c].refined()) kernel::cell_residual(p_, l, static_cast<std::int32_t>(c));
      for (std::size_t x = 0; x < F.vertices.size(); ++x) {
        const VertexRecord& v = F.vertices[x];
        if (v.kind == VertexKind::Dirichlet) continue;
        if (v.kind == VertexKind::InteriorDof) kernel::accumulate_norm(n, v);
        kernel::restrict_vertex(p_, l, static_cast<std::int32_t>(x), v.parent_cell);
      }
    }
    n.l2h = std::sqrt(n.l2h);
    return n;
  }

  // Hanging vertices interpolate top-down, overlapped vertices copy their fine twin.
  void update_fas_state() {
    Spacetree& t = p_.tree();
    const int L = t.depth();
    for (int l = 1; l <= L; ++l)
      for (VertexRecord& v : t.level(l).vertices)
        if (v.kind == VertexKind::Hanging) v.u = kernel::interpolate(t, l - 1, v.parent_cell, v.i, v.j);
    for (int l = L - 1; l >= 0; --l)
      for (VertexRecord& v : t.level(l).vertices)
        if (v.kind == VertexKind::CoarseOverlapped) v.u = t.level(l + 1).vertices[v.fine_twin].u;
  }

  // Two-grid cycle on a uniform two-level hierarchy (depth = lmin + 1) with
  // an exact coarse solve: multiplicative V(1,0), or the additive
  // counterpart that corrects from the same residual.
  CycleStats two_grid(bool multiplicative) {
    Spacetree& t = p_.tree();
    const SolverConfig& cfg = p_.config();
    const int L = t.depth();
    if (L != cfg.lmin + 1) throw std::logic_error("two-grid cycle needs exactly two levels above lmin");
    for (int l = 0; l < L; ++l)
      for (const Cell& c : t.level(l).cells)
        if (!c.refined()) throw std::logic_error("two-grid cycle needs a uniform grid");
    CycleStats st;
    st.residual = compute_residual();
    Level& F = t.level(L);
    const Level& C = t.level(L - 1);
    const oracle::DenseGrid g(L - 1);
    oracle::Mat ac = oracle::Mat::Zero(g.dofs(), g.dofs());
    oracle::Vec rc = oracle::Vec::Zero(g.dofs());
    // on a uniform grid the coarse residual is the restricted fine residual
    auto gather_rc = [&] {
      for (const VertexRecord& cv : C.vertices)
        if (cv.kind != VertexKind::Dirichlet) rc(g.dof(cv.i, cv.j)) = cv.r;
    };
    gather_rc();
    for (VertexRecord& v : F.vertices)
      if (v.kind == VertexKind::InteriorDof) {
        v.u += cfg.omega * v.r / v.diag;
        ++st.updates;
      }
    if (multiplicative) {
      compute_residual();
      gather_rc();
    }
    for (std::size_t cvi = 0; cvi < C.vertices.size(); ++cvi) {
      const VertexRecord& cv = C.vertices[cvi];
      if (cv.kind == VertexKind::Dirichlet) continue;
      const Stencil3 s = p_.ops().vertex_stencil(t, L - 1, static_cast<std::int32_t>(cvi));
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx)
          if (g.interior(cv.i + dx, cv.j + dy)) ac(g.dof(cv.i, cv.j), g.dof(cv.i + dx, cv.j + dy)) = s(dx, dy);
      ++st.updates;
    }
    const oracle::Vec xc = oracle::exact_solve(ac, rc);
    for (VertexRecord& v : F.vertices) {
      if (v.kind == VertexKind::Dirichlet) continue;
      const Cell& cell = C.cells[v.parent_cell];
      const std::array<double, 4> w = p_.ops().cell_weights(t, L - 1, v.parent_cell, v.i, v.j);
      double s = 0.0;
      for (int q = 0; q < 4; ++q) {
        const VertexRecord& cv = C.vertices[cell.vertex[q]];
        if (cv.kind != VertexKind::Dirichlet) s += w[q] * xc(g.dof(cv.i, cv.j));
      }
      v.u += s;
    }
    update_fas_state();
    return st;
  }

 private:
  Problem& p_;
};

inline CycleStats run_reference_cycle(Problem& p, SolverVariant v) {
  p.set_variant(v);
  return ReferenceEngine(p).cycle();
}
inline CycleStats cycle_additive(Problem& p) { return run_reference_cycle(p, SolverVariant::Additive); }
inline CycleStats cycle_additive_exp_damped(Problem& p) { return run_reference_cycle(p, SolverVariant::AdditiveExpDamped); }
inline CycleStats cycle_bpx(Problem& p) { return run_reference_cycle(p, SolverVariant::BPX); }
inline CycleStats cycle_afacc(Problem& p) { return run_reference_cycle(p, SolverVariant::AFACc); }
inline CycleStats cycle_adafac_pi(Problem& p) { return run_reference_cycle(p, SolverVariant::AdaFacPI); }
inline CycleStats cycle_adafac_jac(Problem& p) { return run_reference_cycle(p, SolverVariant::AdaFacJac); }
inline CycleStats cycle_multiplicative_v10(Problem& p) { return run_reference_cycle(p, SolverVariant::MultiplicativeV10); }
inline CycleStats cycle_additive_exact_coarse(Problem& p) { return ReferenceEngine(p).two_grid(false); }

inline void update_fas_state(Problem& p) { ReferenceEngine(p).update_fas_state(); }

// d = omega diag(A)^-1 (b - A u) on the active vertices of one level, with
// the level's flavour operator. b and the result are indexed by vertex.
inline std::vector<double> jacobi_step(const Problem& p, int l, const std::vector<double>& b, double omega) {
  const Spacetree& t = p.tree();
  const Level& L = t.level(l);
  if (b.size() != L.vertices.size()) throw std::invalid_argument("jacobi_step: rhs size mismatch");
  std::vector<double> au(L.vertices.size(), 0.0), d(L.vertices.size(), 0.0);
  for (std::size_t c = 0; c < L.cells.size(); ++c) {
    const Cell& cell = L.cells[c];
    std::array<double, 4> u{};
    for (int k = 0; k < 4; ++k) u[k] = L.vertices[cell.vertex[k]].u;
    const std::array<double, 4> y = apply_element(p.ops().element(l, static_cast<std::int32_t>(c)), u);
    for (int k = 0; k < 4; ++k) au[cell.vertex[k]] += y[k];
  }
  for (std::size_t v = 0; v < L.vertices.size(); ++v)
    if (L.vertices[v].active()) d[v] = omega * (b[v] - au[v]) / L.vertices[v].diag;
  return d;
}

// Hierarchical residual b - A (u - P I u) on level l >= 1 of a uniform
// level, indexed by vertex; Dirichlet values enter unchanged.
inline std::vector<double> hierarchical_residual(const Problem& p, int l) {
  const Spacetree& t = p.tree();
  const Level& L = t.level(l);
  std::vector<double> uh(L.vertices.size(), 0.0), r(L.vertices.size(), 0.0);
  for (std::size_t x = 0; x < L.vertices.size(); ++x) {
    const VertexRecord& v = L.vertices[x];
    if (v.kind == VertexKind::Dirichlet) {
      uh[x] = v.u;
      continue;
    }
    uh[x] = v.u - kernel::prolong(p, l - 1, v.parent_cell, v.i, v.j,
                                  [](const VertexRecord& cv) { return cv.kind == VertexKind::Dirichlet ? 0.0 : cv.u; });
  }
  for (std::size_t c = 0; c < L.cells.size(); ++c) {
    const Cell& cell = L.cells[c];
    std::array<double, 4> u{};
    for (int k = 0; k < 4; ++k) u[k] = uh[cell.vertex[k]];
    const std::array<double, 4> y = apply_element(p.ops().element(l, static_cast<std::int32_t>(c)), u);
    for (int k = 0; k < 4; ++k)
      if (L.vertices[cell.vertex[k]].kind != VertexKind::Dirichlet) r[cell.vertex[k]] -= y[k];
  }
  return r;
}

}  // namespace adafac
