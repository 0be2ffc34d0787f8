#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "adafac/discretization.hpp"

using namespace adafac;

namespace {

// Gradient of the bilinear shape function of corner c on [0,1]^2.
std::array<double, 2> grad(int c, double x, double y) {
  const double sx = (c & 1) ? 1.0 : -1.0, sy = (c >> 1) ? 1.0 : -1.0;
  const double fx = (c & 1) ? x : 1.0 - x, fy = (c >> 1) ? y : 1.0 - y;
  return {sx * fy, sy * fx};
}

// 2x2 Gauss quadrature of eps * grad phi_a . grad phi_b; exact for Q1.
ElementMatrix quadrature_element(double eps, double h) {
  ElementMatrix k{};
  const double g = 0.5 / std::sqrt(3.0);
  const double pts[2] = {0.5 - g, 0.5 + g};
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b) {
      double s = 0.0;
      for (double x : pts)
        for (double y : pts) {
          // reference gradients scale by 1/h, the area by h^2
          const auto ga = grad(a, x, y), gb = grad(b, x, y);
          s += 0.25 * (ga[0] * gb[0] + ga[1] * gb[1]) / (h * h) * (h * h);
        }
      k[a][b] = eps * s;
    }
  return k;
}

}  // namespace

TEST_CASE("element matrix matches quadrature for several widths and materials") {
  for (double eps : {1.0, 1e-3, 7.5})
    for (double h : {1.0, 1.0 / 3.0, 1.0 / 243.0}) {
      const ElementMatrix q = quadrature_element(eps, h);
      const ElementMatrix e = element_matrix(eps);
      for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b) CHECK(e[a][b] == doctest::Approx(q[a][b]).epsilon(1e-13));
    }
  const ElementMatrix e = element_matrix(1.0);
  CHECK(e[0][0] == doctest::Approx(2.0 / 3.0));
  CHECK(e[0][1] == doctest::Approx(-1.0 / 6.0));
  CHECK(e[0][3] == doctest::Approx(-1.0 / 3.0));
}

TEST_CASE("non-positive epsilon is rejected") {
  CHECK_THROWS_AS(element_matrix(0.0), std::invalid_argument);
  CHECK_THROWS_AS(element_matrix(-1.0), std::invalid_argument);
}

TEST_CASE("interior vertex of a uniform grid gets the nine point stencil") {
  Spacetree t = Spacetree::build_regular(2);
  EpsilonField f;
  const VertexStencil s = assemble_vertex_stencil(t, f, 2, t.find_vertex(2, 4, 4));
  REQUIRE_FALSE(s.dirichlet);
  for (int dy = -1; dy <= 1; ++dy)
    for (int dx = -1; dx <= 1; ++dx)
      CHECK(s.coeffs(dx, dy) == doctest::Approx((dx == 0 && dy == 0) ? 8.0 / 3.0 : -1.0 / 3.0));
  CHECK(std::abs(s.coeffs.sum()) < 1e-14);
}

TEST_CASE("boundary vertices report Dirichlet, hanging vertices have no equation") {
  Spacetree t = Spacetree::build_regular(1, 2);
  EpsilonField f;
  CHECK(assemble_vertex_stencil(t, f, 1, t.find_vertex(1, 0, 2)).dirichlet);
  t.refine_cell({1, 1, 1});
  CHECK_THROWS_AS(assemble_vertex_stencil(t, f, 2, t.find_vertex(2, 4, 3)), std::logic_error);
}

TEST_CASE("stencil scales with a constant material") {
  Spacetree t = Spacetree::build_regular(2);
  EpsilonField f;
  f.poisson_value = 1e-3;
  const VertexStencil s = assemble_vertex_stencil(t, f, 2, t.find_vertex(2, 2, 5));
  CHECK(s.coeffs(0, 0) == doctest::Approx(8.0 / 3.0 * 1e-3));
}

TEST_CASE("material fields of the benchmark setups") {
  EpsilonField jump{SetupKind::HalfDomainJump, 3};
  CHECK(jump.at({0.25, 0.5}) == 1.0);
  CHECK(jump.at({0.75, 0.5}) == doctest::Approx(1e-3));
  CHECK(jump.at({0.5, 0.5}) == 1.0);  // dividing line goes to the lesser side

  EpsilonField needle{SetupKind::NeedleInclusion, 3};
  CHECK(needle.at({0.5, 0.499}) == 1.0);
  CHECK(needle.at({0.5, 0.501}) == doctest::Approx(1e-3));
  CHECK(needle.at({0.52, 0.1}) == doctest::Approx(1e-3));

  EpsilonField checker{SetupKind::SkewCheckerboard, 1};
  CHECK(checker.at({0.1, 0.9}) == 1.0);   // top left
  CHECK(checker.at({0.9, 0.1}) == 1.0);   // bottom right
  CHECK(checker.at({0.1, 0.1}) == doctest::Approx(0.1));
  CHECK(checker.at({0.9, 0.9}) == doctest::Approx(0.1));
  // on the steep line: assigned below it, which with y < 0.6 is bottom right
  CHECK(checker.at({0.5, 0.0}) == 1.0);
}

TEST_CASE("boundary condition is one on the bottom edge including corners") {
  CHECK(boundary_value({0.0, 0.0}) == 1.0);
  CHECK(boundary_value({1.0, 0.0}) == 1.0);
  CHECK(boundary_value({0.5, 0.0}) == 1.0);
  CHECK(boundary_value({0.0, 0.5}) == 0.0);
  CHECK(boundary_value({0.5, 1.0}) == 0.0);
}
