#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "adafac/operators.hpp"
#include "adafac/oracle.hpp"
#include "adafac/solvers.hpp"

using namespace adafac;
namespace o = adafac::oracle;

namespace {

Problem regular(int L, EpsilonField f, OperatorFlavor fl) {
  SolverConfig c;
  c.flavor = fl;
  return Problem(Spacetree::build_regular(L), f, c);
}

// Dense matrix of the tree's level operator on the interior vertices.
o::Mat tree_matrix(const Problem& p, int l) {
  const GridStencils s = store_stencils(p.tree(), p.ops(), l);
  const o::DenseGrid g(l);
  o::Mat a = o::Mat::Zero(g.dofs(), g.dofs());
  for (std::int64_t j = 1; j < g.n; ++j)
    for (std::int64_t i = 1; i < g.n; ++i)
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx)
          if (g.interior(i + dx, j + dy)) a(g.dof(i, j), g.dof(i + dx, j + dy)) = s.at(i, j)(dx, dy);
  return a;
}

// Dense prolongation lc -> lc+1 read back from the tree's cell tables.
o::Mat tree_prolongation(const Problem& p, int lc) {
  const Spacetree& t = p.tree();
  const o::DenseGrid gc(lc), gf(lc + 1);
  o::Mat m = o::Mat::Zero(gf.dofs(), gc.dofs());
  for (const VertexRecord& v : t.level(lc + 1).vertices) {
    if (v.kind == VertexKind::Dirichlet) continue;
    const Cell& cell = t.level(lc).cells[v.parent_cell];
    const auto w = p.ops().cell_weights(t, lc, v.parent_cell, v.i, v.j);
    for (int q = 0; q < 4; ++q) {
      const VertexRecord& cv = t.level(lc).vertices[cell.vertex[q]];
      if (cv.kind != VertexKind::Dirichlet) m(gf.dof(v.i, v.j), gc.dof(cv.i, cv.j)) = w[q];
    }
  }
  return m;
}

double max_abs(const o::Mat& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace

TEST_CASE("dense assembly equals the spacetree stencils") {
  for (SetupKind s : {SetupKind::Poisson, SetupKind::HalfDomainJump, SetupKind::SkewCheckerboard}) {
    EpsilonField f{s, 3};
    Problem p = regular(3, f, OperatorFlavor::Geometric);
    for (int l = 1; l <= 3; ++l) CHECK(max_abs(o::assemble(l, f) - tree_matrix(p, l)) < 1e-13);
  }
}

TEST_CASE("dense Galerkin product of the geometric hierarchy is the rediscretised operator for eps = 1") {
  EpsilonField unit;
  for (int lc = 1; lc <= 2; ++lc) {
    const o::Mat P = o::geometric_P(lc);
    const o::Mat rap = P.transpose() * o::assemble(lc + 1, unit) * P;
    CHECK(max_abs(rap - o::assemble(lc, unit)) < 1e-12);
  }
}

TEST_CASE("dense BoxMG hierarchy equals the spacetree one") {
  for (SetupKind s : {SetupKind::HalfDomainJump, SetupKind::SkewCheckerboard, SetupKind::NeedleInclusion}) {
    EpsilonField f{s, 4};
    Problem p = regular(3, f, OperatorFlavor::BoxMG);
    const o::Hierarchy h = o::build_hierarchy(1, 3, f, OperatorFlavor::BoxMG, o::DenseParams{});
    for (int l = 2; l <= 3; ++l) CHECK(max_abs(h.P[l] - tree_prolongation(p, l - 1)) < 1e-12);
    for (int l = 1; l <= 3; ++l) {
      const o::Mat ta = tree_matrix(p, l);
      CHECK(max_abs(h.A[l] - ta) <= 1e-11 * max_abs(ta));
    }
  }
}

TEST_CASE("dense geometric prolongation equals the spacetree one") {
  Problem p = regular(3, EpsilonField{SetupKind::HalfDomainJump, 2}, OperatorFlavor::Geometric);
  for (int lc = 1; lc <= 2; ++lc) CHECK(max_abs(o::geometric_P(lc) - tree_prolongation(p, lc)) < 1e-14);
}

TEST_CASE("dense smoothed restriction equals the spacetree weights") {
  for (OperatorFlavor fl : {OperatorFlavor::Geometric, OperatorFlavor::BoxMG}) {
    EpsilonField f{SetupKind::SkewCheckerboard, 2};
    Problem p = regular(3, f, fl);
    const o::Hierarchy h = o::build_hierarchy(1, 3, f, fl, o::DenseParams{});
    const Spacetree& t = p.tree();
    for (int lc = 1; lc <= 2; ++lc) {
      const o::DenseGrid gc(lc), gf(lc + 1);
      o::Mat m = o::Mat::Zero(gc.dofs(), gf.dofs());
      for (std::size_t x = 0; x < t.level(lc + 1).vertices.size(); ++x) {
        const VertexRecord& v = t.level(lc + 1).vertices[x];
        if (v.kind == VertexKind::Dirichlet) continue;
        const Cell& cell = t.level(lc).cells[v.parent_cell];
        const auto& w = p.ops().rtilde(lc + 1, static_cast<std::int32_t>(x));
        for (int q = 0; q < 4; ++q) {
          const VertexRecord& cv = t.level(lc).vertices[cell.vertex[q]];
          if (cv.kind != VertexKind::Dirichlet) m(gc.dof(cv.i, cv.j), gf.dof(v.i, v.j)) += w[q];
        }
      }
      CHECK(max_abs(h.Rt[lc] - m) < 1e-12);
    }
  }
}

TEST_CASE("two-level multiplicative minus additive equals the stated difference") {
  EpsilonField f{SetupKind::HalfDomainJump, 2};
  const o::Hierarchy h = o::build_hierarchy(1, 2, f, OperatorFlavor::Geometric, o::DenseParams{});
  o::Vec u = o::Vec::Zero(h.b.size());
  for (int k = 0; k < 3; ++k) {
    const o::Vec d = o::multiplicative_v10(h, u, 0.6) - o::additive_exact_coarse(h, u, 0.6);
    CHECK((d - o::multiplicative_additive_difference(h, u, 0.6)).cwiseAbs().maxCoeff() < 1e-12);
    u = o::multiplicative_v10(h, u, 0.6);
  }
}
