#pragma once

#include <cstdint>
#include <stdexcept>

#include "adafac/solvers.hpp"
#include "adafac/spacetree.hpp"

namespace adafac {

// Single-touch realisation of the additive cycles. Each sweep reads every
// persistent vertex once (first touch) and writes it once (last touch):
//  - first touch applies the corrections bookmarked by the previous sweep,
//    prolonging the coarse part from the parent cell's corners which are
//    already updated, and resets the accumulators;
//  - unrefined cells add their element residuals;
//  - last touch sees a complete residual, restricts it to the parent
//    corners, computes the level correction and the damping, and bookmarks
//    them.
// A cycle's iterate is therefore in place after the next sweep's descent:
// n cycles take n + 1 sweeps.
class PipelinedEngine {
 public:
  explicit PipelinedEngine(Problem& p, ChildOrder order = ChildOrder::Peano) : p_(p), order_(order) {
    if (p.config().variant == SolverVariant::MultiplicativeV10)
      throw std::invalid_argument("pipelined engine realises the additive family only");
  }

  // Starts from zero bookmarks.
  CycleStats kickoff() {
    for (int l = 0; l <= p_.tree().depth(); ++l)
      for (VertexRecord& v : p_.tree().level(l).vertices) {
        v.sl = v.stl = v.sf = v.E = 0.0;
        v.inj = {0.0, 0.0};
      }
    started_ = true;
    return sweep();
  }

  CycleStats steady() {
    if (!started_) throw std::logic_error("steady sweep before kickoff");
    return sweep();
  }

  CycleStats step() { return started_ ? steady() : kickoff(); }

  // Applies the pending corrections level by level without starting a new
  // cycle, so that the mesh can change. The next step is a kickoff.
  void flush() {
    if (!started_) return;
    const int last = static_cast<int>((sweeps_ - 1) & 1u);
    Visitor vis{p_, p_.config(), p_.tree().depth(), last, 1 - last, {}};
    Spacetree& t = p_.tree();
    for (int l = 0; l <= t.depth(); ++l)
      for (std::size_t x = 0; x < t.level(l).vertices.size(); ++x)
        vis.first_touch(l, static_cast<std::int32_t>(x), t.level(l).vertices[x].parent_cell);
    update_fas_state(p_);
    started_ = false;
  }

  // Record load/store counts of subsequent sweeps.
  void instrument(bool on) { instrument_ = on; }
  const TouchCounts& counts() const { return counts_; }
  std::uint64_t sweeps() const { return sweeps_; }
  bool started() const { return started_; }

 private:
  struct Visitor {
    Problem& p;
    const SolverConfig& cfg;
    int deepest;
    int rd;  // inj slot read this sweep
    int wr;  // inj slot written this sweep
    CycleStats st;

    VertexRecord& vert(int l, std::int32_t v) { return p.tree().level(l).vertices[v]; }

    void first_touch(int l, std::int32_t x, std::int32_t parent) {
      VertexRecord& v = vert(l, x);
      v.r = 0.0;
      v.btilde = 0.0;
      if (v.kind == VertexKind::Dirichlet) return;
      const double pe = kernel::prolong(p, l - 1, parent, v.i, v.j, [](const VertexRecord& cv) { return cv.E; });
      if (v.kind == VertexKind::Hanging) {
        v.E = pe;
        v.u = kernel::interpolate(p.tree(), l - 1, parent, v.i, v.j);
        return;
      }
      double damp = v.stl;
      if (cfg.variant == SolverVariant::AdaFacPI)
        damp = l > cfg.lmin ? kernel::prolong(p, l - 1, parent, v.i, v.j, [this](const VertexRecord& cv) { return cv.inj[rd]; })
                            : 0.0;
      v.E = (v.sl - damp) + pe;
      v.u += v.E + v.sf;
      v.sf = 0.0;
    }

    void cell(int l, std::int32_t c, std::int32_t) {
      if (!p.tree().level(l).cells[c].refined()) kernel::cell_residual(p, l, c);
    }

    void last_touch(int l, std::int32_t x, std::int32_t parent) {
      VertexRecord& v = vert(l, x);
      if (v.kind == VertexKind::Dirichlet) return;
      if (l > 0) kernel::restrict_vertex(p, l, x, parent);
      if (v.kind == VertexKind::Hanging) return;
      if (v.kind == VertexKind::InteriorDof) kernel::accumulate_norm(st.residual, v);
      v.sl = kernel::correction(cfg, deepest, l, v);
      v.stl = kernel::damping(cfg, l, v);
      if (l >= cfg.lmin) ++st.updates;
      if (kernel::has_damping_equation(cfg, l, v)) ++st.updates;
      double pending = v.sl - v.stl;
      if (cfg.variant == SolverVariant::AdaFacPI) {
        v.stl = 0.0;
        pending = v.sl;
        if (l > cfg.lmin && v.coarse_twin != kNone) {
          vert(l - 1, v.coarse_twin).inj[wr] = v.sl;
          pending = 0.0;  // P I c reproduces c at a c-point
        }
      }
      if (v.coarse_twin != kNone) vert(l - 1, v.coarse_twin).sf = v.sf + pending;
    }
  };

  CycleStats sweep() {
    const int s = static_cast<int>(sweeps_ & 1u);
    Visitor vis{p_, p_.config(), p_.tree().depth(), 1 - s, s, {}};
    p_.tree().traverse(vis, order_, instrument_ ? &counts_ : nullptr);
    ++sweeps_;
    vis.st.residual.l2h = std::sqrt(vis.st.residual.l2h);
    return vis.st;
  }

  Problem& p_;
  ChildOrder order_;
  bool started_ = false;
  bool instrument_ = false;
  std::uint64_t sweeps_ = 0;
  TouchCounts counts_;
};

}  // namespace adafac
