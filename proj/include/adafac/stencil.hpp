#pragma once

#include <array>
#include <cmath>
#include <cstddef>

namespace adafac {

// Square coefficient table addressed by integer offsets (dx, dy) in
// [-Radius, Radius]^2. dx runs along the first coordinate.
template <int Radius>
class Stencil {
 public:
  static constexpr int radius = Radius;
  static constexpr int width = 2 * Radius + 1;

  constexpr double& operator()(int dx, int dy) { return data_[index(dx, dy)]; }
  constexpr double operator()(int dx, int dy) const { return data_[index(dx, dy)]; }

  double sum() const {
    double s = 0.0;
    for (double v : data_) s += v;
    return s;
  }

  Stencil& operator*=(double s) {
    for (double& v : data_) v *= s;
    return *this;
  }

  Stencil& operator+=(const Stencil& o) {
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += o.data_[k];
    return *this;
  }

  double max_abs_diff(const Stencil& o) const {
    double m = 0.0;
    for (std::size_t k = 0; k < data_.size(); ++k) m = std::max(m, std::abs(data_[k] - o.data_[k]));
    return m;
  }

  static constexpr bool contains(int dx, int dy) {
    return dx >= -Radius && dx <= Radius && dy >= -Radius && dy <= Radius;
  }

 private:
  static constexpr std::size_t index(int dx, int dy) {
    return static_cast<std::size_t>((dy + Radius) * width + (dx + Radius));
  }
  std::array<double, width * width> data_{};
};

using Stencil3 = Stencil<1>;
using Stencil5 = Stencil<2>;
using Stencil7 = Stencil<3>;

}  // namespace adafac
