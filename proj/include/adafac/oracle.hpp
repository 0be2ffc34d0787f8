#pragma once

// Dense reference implementations on uniform grids. Everything here is
// assembled as explicit matrices over the interior unknowns, independently
// of the spacetree data structures.

#include <Eigen/Dense>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "adafac/discretization.hpp"
#include "adafac/operators.hpp"

namespace adafac::oracle {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

enum class DenseVariant { Additive, AdditiveExpDamped, BPX, AFACc, AdaFacPI, AdaFacJac };

struct DenseGrid {
  int level = 0;
  std::int64_t n = 1;

  explicit DenseGrid(int l) : level(l), n(pow3(l)) {}
  std::int64_t dofs() const { return (n - 1) * (n - 1); }
  std::int64_t dof(std::int64_t i, std::int64_t j) const { return (j - 1) * (n - 1) + (i - 1); }
  bool interior(std::int64_t i, std::int64_t j) const { return i > 0 && j > 0 && i < n && j < n; }
};

// Full vertex matrix including boundary rows, vertex index j * (n+1) + i.
inline Mat assemble_full(int level, const EpsilonField& field) {
  const std::int64_t n = pow3(level), nv = (n + 1) * (n + 1);
  Mat a = Mat::Zero(nv, nv);
  for (std::int64_t cj = 0; cj < n; ++cj)
    for (std::int64_t ci = 0; ci < n; ++ci) {
      const ElementMatrix e = element_matrix(field.at(CellId{level, ci, cj}.midpoint()));
      std::int64_t g[4];
      for (int c = 0; c < 4; ++c) g[c] = (cj + (c >> 1)) * (n + 1) + ci + (c & 1);
      for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) a(g[r], g[c]) += e[r][c];
    }
  return a;
}

inline Mat interior_block(const Mat& full, int level) {
  const DenseGrid g(level);
  Mat a(g.dofs(), g.dofs());
  for (std::int64_t j = 1; j < g.n; ++j)
    for (std::int64_t i = 1; i < g.n; ++i)
      for (std::int64_t q = 1; q < g.n; ++q)
        for (std::int64_t p = 1; p < g.n; ++p) a(g.dof(i, j), g.dof(p, q)) = full(j * (g.n + 1) + i, q * (g.n + 1) + p);
  return a;
}

inline Mat assemble(int level, const EpsilonField& field) { return interior_block(assemble_full(level, field), level); }

// Right hand side after eliminating the Dirichlet values (f = 0).
inline Vec rhs(int level, const EpsilonField& field) {
  const Mat full = assemble_full(level, field);
  const DenseGrid g(level);
  Vec b = Vec::Zero(g.dofs());
  for (std::int64_t j = 1; j < g.n; ++j)
    for (std::int64_t i = 1; i < g.n; ++i)
      for (std::int64_t q = 0; q <= g.n; ++q)
        for (std::int64_t p = 0; p <= g.n; ++p) {
          if (g.interior(p, q)) continue;
          const double ud = boundary_value(VertexId{level, p, q}.position());
          b(g.dof(i, j)) -= full(j * (g.n + 1) + i, q * (g.n + 1) + p) * ud;
        }
  return b;
}

// Prolongation from level lc to lc+1, rows fine interior, columns coarse interior.
inline Mat geometric_P(int lc) {
  const DenseGrid c(lc), f(lc + 1);
  Mat p = Mat::Zero(f.dofs(), c.dofs());
  for (std::int64_t j = 1; j < f.n; ++j)
    for (std::int64_t i = 1; i < f.n; ++i)
      for (std::int64_t q = 1; q < c.n; ++q)
        for (std::int64_t pp = 1; pp < c.n; ++pp) {
          const double dx = std::abs(static_cast<double>(i - 3 * pp)), dy = std::abs(static_cast<double>(j - 3 * q));
          const double w = std::max(0.0, 1.0 - dx / 3.0) * std::max(0.0, 1.0 - dy / 3.0);
          if (w != 0.0) p(f.dof(i, j), c.dof(pp, q)) = w;
        }
  return p;
}

// Operator-dependent prolongation from the rows of the full fine matrix.
// Rows and columns cover all vertices, boundary included.
inline Mat boxmg_P_full(const Mat& fine_full, int lc) {
  const DenseGrid c(lc), f(lc + 1);
  const std::int64_t nf = f.n;
  auto vid = [nf](std::int64_t i, std::int64_t j) { return j * (nf + 1) + i; };
  auto entry = [&](std::int64_t i, std::int64_t j, std::int64_t dx, std::int64_t dy) {
    const std::int64_t p = i + dx, q = j + dy;
    if (p < 0 || q < 0 || p > nf || q > nf) return 0.0;
    return fine_full(vid(i, j), vid(p, q));
  };
  Mat w = Mat::Zero((nf + 1) * (nf + 1), (c.n + 1) * (c.n + 1));
  auto cv = [&c](std::int64_t i, std::int64_t j) { return j * (c.n + 1) + i; };
  for (std::int64_t cj = 0; cj < c.n; ++cj)
    for (std::int64_t ci = 0; ci < c.n; ++ci) {
      std::int64_t corner[4][2] = {{ci, cj}, {ci + 1, cj}, {ci, cj + 1}, {ci + 1, cj + 1}};
      double loc[4][4][4] = {};  // [b][a][corner]
      for (int k = 0; k < 4; ++k) loc[3 * (k >> 1)][3 * (k & 1)][k] = 1.0;
      struct E {
        int a0, b0, da, db, c0, c1;
      };
      const E edges[4] = {{0, 0, 1, 0, 0, 1}, {0, 3, 1, 0, 2, 3}, {0, 0, 0, 1, 0, 2}, {3, 0, 0, 1, 1, 3}};
      for (const E& e : edges) {
        const std::int64_t i1 = 3 * ci + e.a0 + e.da, j1 = 3 * cj + e.b0 + e.db;
        const std::int64_t i2 = 3 * ci + e.a0 + 2 * e.da, j2 = 3 * cj + e.b0 + 2 * e.db;
        const bool on_boundary = !f.interior(i1, j1) || !f.interior(i2, j2);
        double p1s = 2.0 / 3.0, p2s = 1.0 / 3.0, p1e = 1.0 / 3.0, p2e = 2.0 / 3.0;
        if (!on_boundary) {
          // collapse the rows across the edge normal
          double t1[3] = {}, t2[3] = {};
          for (int d = -1; d <= 1; ++d)
            for (int nn = -1; nn <= 1; ++nn) {
              const std::int64_t dx = e.da ? d : nn, dy = e.da ? nn : d;
              t1[d + 1] += entry(i1, j1, dx, dy);
              t2[d + 1] += entry(i2, j2, dx, dy);
            }
          Eigen::Matrix2d m;
          m << t1[1], t1[2], t2[0], t2[1];
          const Eigen::Vector2d s = m.fullPivLu().solve(Eigen::Vector2d(-t1[0], 0.0));
          const Eigen::Vector2d en = m.fullPivLu().solve(Eigen::Vector2d(0.0, -t2[2]));
          p1s = s(0), p2s = s(1), p1e = en(0), p2e = en(1);
        }
        loc[e.b0 + e.db][e.a0 + e.da][e.c0] = p1s;
        loc[e.b0 + 2 * e.db][e.a0 + 2 * e.da][e.c0] = p2s;
        loc[e.b0 + e.db][e.a0 + e.da][e.c1] = p1e;
        loc[e.b0 + 2 * e.db][e.a0 + 2 * e.da][e.c1] = p2e;
      }
      Eigen::Matrix4d m = Eigen::Matrix4d::Zero();
      Eigen::Matrix4d r = Eigen::Matrix4d::Zero();
      const int fp[4][2] = {{1, 1}, {2, 1}, {1, 2}, {2, 2}};
      for (int row = 0; row < 4; ++row) {
        const std::int64_t i = 3 * ci + fp[row][0], j = 3 * cj + fp[row][1];
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            const int a = fp[row][0] + dx, b = fp[row][1] + dy;
            const double aij = entry(i, j, dx, dy);
            if (a >= 1 && a <= 2 && b >= 1 && b <= 2)
              m(row, (b - 1) * 2 + (a - 1)) += aij;
            else
              for (int k = 0; k < 4; ++k) r(row, k) -= aij * loc[b][a][k];
          }
      }
      const Eigen::Matrix4d sol = m.fullPivLu().solve(r);
      for (int row = 0; row < 4; ++row)
        for (int k = 0; k < 4; ++k) loc[fp[row][1]][fp[row][0]][k] = sol(row, k);
      for (int b = 0; b < 4; ++b)
        for (int a = 0; a < 4; ++a)
          for (int k = 0; k < 4; ++k)
            w(vid(3 * ci + a, 3 * cj + b), cv(corner[k][0], corner[k][1])) = loc[b][a][k];
    }
  return w;
}

// Interior-to-interior block of a full prolongation from level lc.
inline Mat interior_prolongation(const Mat& full, int lc) {
  const DenseGrid c(lc), f(lc + 1);
  Mat p = Mat::Zero(f.dofs(), c.dofs());
  for (std::int64_t q = 1; q < c.n; ++q)
    for (std::int64_t pp = 1; pp < c.n; ++pp)
      for (std::int64_t j = 1; j < f.n; ++j)
        for (std::int64_t i = 1; i < f.n; ++i) p(f.dof(i, j), c.dof(pp, q)) = full(j * (f.n + 1) + i, q * (c.n + 1) + pp);
  return p;
}

inline Mat boxmg_P(const Mat& fine_full, int lc) { return interior_prolongation(boxmg_P_full(fine_full, lc), lc); }

// Injection from level lc+1 to lc: picks the coinciding fine value.
inline Mat injection(int lc) {
  const DenseGrid c(lc), f(lc + 1);
  Mat inj = Mat::Zero(c.dofs(), f.dofs());
  for (std::int64_t j = 1; j < c.n; ++j)
    for (std::int64_t i = 1; i < c.n; ++i) inj(c.dof(i, j), f.dof(3 * i, 3 * j)) = 1.0;
  return inj;
}

// omega R A M^-1 with R = P^T. With truncate set, entries between coarse v
// and fine x with |x - 3v| = 3 in some axis are dropped.
inline Mat smoothed_restriction(const Mat& p, const Mat& a_fine, int lc, double omega, bool truncate) {
  const Vec d = a_fine.diagonal();
  Mat rt = omega * p.transpose() * a_fine * d.cwiseInverse().asDiagonal();
  if (truncate) {
    const DenseGrid c(lc), f(lc + 1);
    for (std::int64_t q = 1; q < c.n; ++q)
      for (std::int64_t pp = 1; pp < c.n; ++pp)
        for (std::int64_t j = 1; j < f.n; ++j)
          for (std::int64_t i = 1; i < f.n; ++i)
            if (std::abs(i - 3 * pp) > 2 || std::abs(j - 3 * q) > 2) rt(c.dof(pp, q), f.dof(i, j)) = 0.0;
  }
  return rt;
}

// Levels lmin..lmax of a uniform hierarchy.
struct Hierarchy {
  int lmin = 1;
  int lmax = 1;
  std::vector<Mat> A;   // indexed by level
  std::vector<Mat> P;   // P[l]: level l-1 -> l
  std::vector<Mat> I;   // I[l]: level l -> l-1
  std::vector<Mat> Rt;  // Rt[l]: level l+1 -> l
  Vec b;

  const Mat& fine() const { return A[lmax]; }
};

struct DenseParams {
  double omega = 0.6;
  double omega_tilde = 0.6;
  double omega_hat = 0.7;
  bool rtilde_true_operator = false;
};

inline Hierarchy build_hierarchy(int lmin, int lmax, const EpsilonField& field, OperatorFlavor flavor, const DenseParams& prm) {
  if (lmin < 1 || lmax < lmin) throw std::invalid_argument("oracle: bad level range");
  Hierarchy h;
  h.lmin = lmin;
  h.lmax = lmax;
  h.A.resize(lmax + 1);
  h.P.resize(lmax + 1);
  h.I.resize(lmax + 1);
  h.Rt.resize(lmax + 1);
  std::vector<Mat> full(lmax + 1);
  full[lmax] = assemble_full(lmax, field);
  h.A[lmax] = interior_block(full[lmax], lmax);
  h.b = rhs(lmax, field);
  for (int l = lmax; l > lmin; --l) {
    if (flavor == OperatorFlavor::Geometric) {
      h.P[l] = geometric_P(l - 1);
      full[l - 1] = assemble_full(l - 1, field);
      h.A[l - 1] = interior_block(full[l - 1], l - 1);
    } else {
      const Mat pf = boxmg_P_full(full[l], l - 1);
      h.P[l] = interior_prolongation(pf, l - 1);
      // the boundary rows are kept so that the next construction sees them
      full[l - 1] = pf.transpose() * full[l] * pf;
      h.A[l - 1] = interior_block(full[l - 1], l - 1);
    }
    h.I[l] = injection(l - 1);
  }
  EpsilonField unit;
  for (int l = lmin; l < lmax; ++l) {
    const Mat a = prm.rtilde_true_operator ? h.A[l + 1] : assemble(l + 1, unit);
    h.Rt[l] = smoothed_restriction(h.P[l + 1], a, l, prm.omega, true);
  }
  return h;
}

inline Vec exact_solve(const Mat& a, const Vec& b) { return a.llt().solve(b); }

// One cycle of the additive family written as explicit matrix products.
inline Vec additive_cycle(const Hierarchy& h, DenseVariant var, const Vec& u, const DenseParams& prm) {
  const int L = h.lmax;
  std::vector<Vec> r(L + 1), e(L + 1);
  r[L] = h.b - h.A[L] * u;
  for (int l = L - 1; l >= h.lmin; --l) {
    Vec passed = r[l + 1];
    if (var == DenseVariant::AFACc) passed -= h.I[l + 1].transpose() * (h.I[l + 1] * r[l + 1]);
    r[l] = h.P[l + 1].transpose() * passed;
  }
  for (int l = h.lmin; l <= L; ++l) {
    const Vec dinv = h.A[l].diagonal().cwiseInverse();
    double alpha = 1.0;
    if (var == DenseVariant::AdditiveExpDamped) alpha = std::pow(prm.omega_hat, L - l);
    Vec c = alpha * prm.omega * dinv.cwiseProduct(r[l]);
    if (var == DenseVariant::BPX && l < L) c = prm.omega * r[l];
    e[l] = c;
    if (var == DenseVariant::AdaFacJac && l < L) e[l] -= prm.omega_tilde * dinv.cwiseProduct(h.Rt[l] * r[l + 1]);
    if (var == DenseVariant::AdaFacPI && l > h.lmin) e[l] -= h.P[l] * (h.I[l] * c);
  }
  Vec acc = e[h.lmin];
  for (int l = h.lmin + 1; l <= L; ++l) acc = e[l] + h.P[l] * acc;
  return u + acc;
}

// Two-level multiplicative V(1,0): one damped Jacobi step, then the exact
// coarse correction.
inline Vec multiplicative_v10(const Hierarchy& h, const Vec& u, double omega) {
  const int L = h.lmax;
  const Vec dinv = h.A[L].diagonal().cwiseInverse();
  const Vec u1 = u + omega * dinv.cwiseProduct(h.b - h.A[L] * u);
  const Vec rc = h.P[L].transpose() * (h.b - h.A[L] * u1);
  return u1 + h.P[L] * exact_solve(h.A[L - 1], rc);
}

// Two-level additive scheme with the exact coarse correction.
inline Vec additive_exact_coarse(const Hierarchy& h, const Vec& u, double omega) {
  const int L = h.lmax;
  const Vec dinv = h.A[L].diagonal().cwiseInverse();
  const Vec r = h.b - h.A[L] * u;
  return u + omega * dinv.cwiseProduct(r) + h.P[L] * exact_solve(h.A[L - 1], h.P[L].transpose() * r);
}

// Difference between the multiplicative and the additive two-level update:
// P Ac^-1 R (b - A u1) - P Ac^-1 R (b - A u) with u1 the smoothed iterate.
inline Vec multiplicative_additive_difference(const Hierarchy& h, const Vec& u, double omega) {
  const int L = h.lmax;
  const Vec dinv = h.A[L].diagonal().cwiseInverse();
  const Vec r = h.b - h.A[L] * u;
  const Vec u1 = u + omega * dinv.cwiseProduct(r);
  const Vec pa = h.P[L] * exact_solve(h.A[L - 1], h.P[L].transpose() * (h.b - h.A[L] * u1));
  const Vec pb = h.P[L] * exact_solve(h.A[L - 1], h.P[L].transpose() * r);
  return pa - pb;
}

// Interior values of level `level` as a dense vector, from a callback.
template <class F>
Vec gather(int level, F&& value) {
  const DenseGrid g(level);
  Vec x(g.dofs());
  for (std::int64_t j = 1; j < g.n; ++j)
    for (std::int64_t i = 1; i < g.n; ++i) x(g.dof(i, j)) = value(i, j);
  return x;
}

}  // namespace adafac::oracle
