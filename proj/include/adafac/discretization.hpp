#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

#include "adafac/spacetree.hpp"
#include "adafac/stencil.hpp"

namespace adafac {

// Bilinear element stiffness matrix, local corner order as in Cell.
using ElementMatrix = std::array<std::array<double, 4>, 4>;

// Reference Q1 stiffness for -div grad on a square. In 2D it does not
// depend on the mesh width.
inline ElementMatrix element_matrix(double eps) {
  if (!(eps > 0.0) || !std::isfinite(eps)) throw std::invalid_argument("element_matrix: epsilon must be positive");
  constexpr double d = 2.0 / 3.0, e = -1.0 / 6.0, o = -1.0 / 3.0;
  ElementMatrix k{{{d, e, e, o}, {e, d, o, e}, {e, o, d, e}, {o, e, e, d}}};
  for (auto& row : k)
    for (double& v : row) v *= eps;
  return k;
}

inline std::array<double, 4> apply_element(const ElementMatrix& k, const std::array<double, 4>& u) {
  std::array<double, 4> y{};
  for (int a = 0; a < 4; ++a) y[a] = k[a][0] * u[0] + k[a][1] * u[1] + k[a][2] * u[2] + k[a][3] * u[3];
  return y;
}

enum class SetupKind { Poisson, HalfDomainJump, NeedleInclusion, SkewCheckerboard };

inline SetupKind parse_setup(const std::string& s) {
  if (s == "poisson") return SetupKind::Poisson;
  if (s == "jump") return SetupKind::HalfDomainJump;
  if (s == "needle") return SetupKind::NeedleInclusion;
  if (s == "checkerboard") return SetupKind::SkewCheckerboard;
  throw std::invalid_argument("unknown setup: " + s);
}

inline std::string to_string(SetupKind s) {
  switch (s) {
    case SetupKind::Poisson: return "poisson";
    case SetupKind::HalfDomainJump: return "jump";
    case SetupKind::NeedleInclusion: return "needle";
    case SetupKind::SkewCheckerboard: return "checkerboard";
  }
  return "?";
}

enum class NeedleAxis { Bottom, Left };

// Piecewise constant material parameter. The "strong" region holds 1, the
// rest 10^-k. Points on a dividing line go to the lesser side.
struct EpsilonField {
  SetupKind kind = SetupKind::Poisson;
  int k = 0;
  double poisson_value = 1.0;
  NeedleAxis needle_axis = NeedleAxis::Bottom;
  double needle_width = 0.02;

  double weak() const { return std::pow(10.0, -static_cast<double>(k)); }

  double at(Point p) const {
    switch (kind) {
      case SetupKind::Poisson:
        return poisson_value;
      case SetupKind::HalfDomainJump:
        return p.x <= 0.5 ? 1.0 : weak();
      case SetupKind::NeedleInclusion: {
        // Rectangle attached to one boundary edge, centred on x = 0.5,
        // reaching half way into the domain.
        const double across = needle_axis == NeedleAxis::Bottom ? p.x : p.y;
        const double along = needle_axis == NeedleAxis::Bottom ? p.y : p.x;
        const bool inside = std::abs(across - 0.5) <= 0.5 * needle_width && along <= 0.5;
        return inside ? 1.0 : weak();
      }
      case SetupKind::SkewCheckerboard: {
        const bool above_steep = p.y - (5.0 * p.x - 2.5) > 0.0;
        const bool above_flat = p.y - (0.2 * p.x + 0.5) > 0.0;
        return above_steep == above_flat ? 1.0 : weak();
      }
    }
    return 1.0;
  }
};

inline double epsilon_at(const EpsilonField& f, Point p) { return f.at(p); }

// u = 1 on x2 = 0 including both bottom corners, 0 elsewhere on the boundary.
inline double boundary_value(Point p) { return p.y == 0.0 ? 1.0 : 0.0; }

// Result of assembling the rediscretised operator row of one vertex.
struct VertexStencil {
  bool dirichlet = false;
  Stencil3 coeffs;
};

// Sums the rediscretised element contributions of the level-l cells around v.
// Hanging vertices carry no equation.
inline VertexStencil assemble_vertex_stencil(const Spacetree& t, const EpsilonField& field, int l, std::int32_t v) {
  const VertexRecord& rec = t.level(l).vertices.at(static_cast<std::size_t>(v));
  VertexStencil s;
  if (rec.kind == VertexKind::Dirichlet) {
    s.dirichlet = true;
    s.coeffs(0, 0) = 1.0;
    return s;
  }
  if (rec.kind == VertexKind::Hanging) throw std::logic_error("assemble_vertex_stencil: hanging vertex has no equation");
  for (int ca = -1; ca <= 0; ++ca)
    for (int cb = -1; cb <= 0; ++cb) {
      const std::int32_t c = t.find_cell(l, rec.i + ca, rec.j + cb);
      if (c == kNone) throw std::logic_error("assemble_vertex_stencil: missing adjacent cell");
      const ElementMatrix k = element_matrix(field.at(t.cell_id(l, c).midpoint()));
      const int me = (-ca) + 2 * (-cb);
      for (int o = 0; o < 4; ++o) s.coeffs(ca + (o & 1), cb + (o >> 1)) += k[me][o];
    }
  return s;
}

}  // namespace adafac
