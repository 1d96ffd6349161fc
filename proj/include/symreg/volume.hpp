#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace symreg {

/// Grid extent in voxels. Storage order is x-fastest, then y, then z.
struct Dims {
  int nx = 1;
  int ny = 1;
  int nz = 1;

  std::size_t count() const {
    return static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny) *
           static_cast<std::size_t>(nz);
  }
  int operator[](int axis) const { return axis == 0 ? nx : (axis == 1 ? ny : nz); }
  std::size_t index(int x, int y, int z) const {
    return static_cast<std::size_t>(x) +
           static_cast<std::size_t>(nx) *
               (static_cast<std::size_t>(y) + static_cast<std::size_t>(ny) * z);
  }
  bool valid() const { return nx >= 1 && ny >= 1 && nz >= 1; }
  bool operator==(const Dims&) const = default;
};

std::string to_string(const Dims& d);

/// Millimetres per voxel along each axis. Carried as metadata only.
struct Spacing {
  double sx = 1.0;
  double sy = 1.0;
  double sz = 1.0;
  bool operator==(const Spacing&) const = default;
};

/// Dense scalar grid. `Volume` holds intensities, `LabelMap` holds labels.
template <typename T>
class Grid {
 public:
  using value_type = T;

  Grid() = default;
  explicit Grid(Dims dims, T fill = T{}, Spacing spacing = {})
      : dims_(check_dims(dims)), spacing_(spacing), data_(dims.count(), fill) {}
  Grid(Dims dims, std::vector<T> data, Spacing spacing = {})
      : dims_(check_dims(dims)), spacing_(spacing), data_(std::move(data)) {
    if (data_.size() != dims_.count()) {
      throw std::invalid_argument("grid data length " + std::to_string(data_.size()) +
                                  " does not match dims " + to_string(dims_));
    }
  }

  const Dims& dims() const { return dims_; }
  const Spacing& spacing() const { return spacing_; }
  void set_spacing(Spacing s) { spacing_ = s; }
  std::size_t size() const { return data_.size(); }

  std::span<const T> data() const { return data_; }
  std::span<T> data() { return data_; }
  const std::vector<T>& vector() const { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }
  T& at(int x, int y, int z) { return data_[dims_.index(x, y, z)]; }
  const T& at(int x, int y, int z) const { return data_[dims_.index(x, y, z)]; }

  bool operator==(const Grid&) const = default;

 private:
  static Dims check_dims(Dims d) {
    if (!d.valid()) throw std::invalid_argument("invalid dims " + to_string(d));
    return d;
  }

  Dims dims_{};
  Spacing spacing_{};
  std::vector<T> data_;
};

using Volume = Grid<double>;
using LabelMap = Grid<std::uint16_t>;

/// Throws std::invalid_argument unless every voxel is finite.
void require_finite(const Volume& vol);

/// Throws std::invalid_argument naming `what` if the two dims differ.
void require_same_dims(const Dims& a, const Dims& b, const char* what);

using Point3 = std::array<double, 3>;

/// Interpolation weights for one continuous point. Coordinates are clamped to
/// [0, n-1] per axis; an axis whose coordinate was clamped (or has extent 1)
/// contributes zero derivative.
struct TrilinearStencil {
  std::array<std::size_t, 8> index{};
  std::array<double, 8> weight{};
  std::array<std::array<double, 8>, 3> dweight{};
};

namespace detail {

struct AxisWeights {
  int i0;
  int step;  // 1, or 0 on a single-voxel axis
  double f;
  bool active;
};

inline AxisWeights axis_weights(double p, int n) {
  if (n == 1) return {0, 0, 0.0, false};
  const double hi = static_cast<double>(n - 1);
  const bool active = p >= 0.0 && p <= hi;
  const double q = p < 0.0 ? 0.0 : (p > hi ? hi : p);
  int i0 = static_cast<int>(q);  // q >= 0, truncation is floor
  if (i0 > n - 2) i0 = n - 2;
  return {i0, 1, q - i0, active};
}

}  // namespace detail

inline TrilinearStencil trilinear_stencil(const Dims& dims, const Point3& p) {
  const detail::AxisWeights ax = detail::axis_weights(p[0], dims.nx);
  const detail::AxisWeights ay = detail::axis_weights(p[1], dims.ny);
  const detail::AxisWeights az = detail::axis_weights(p[2], dims.nz);
  const std::size_t sy = static_cast<std::size_t>(dims.nx);
  const std::size_t sz = sy * static_cast<std::size_t>(dims.ny);
  const std::size_t base = dims.index(ax.i0, ay.i0, az.i0);
  const std::size_t off[3] = {static_cast<std::size_t>(ax.step), ay.step * sy, az.step * sz};

  const double wx[2] = {1.0 - ax.f, ax.f};
  const double wy[2] = {1.0 - ay.f, ay.f};
  const double wz[2] = {1.0 - az.f, az.f};
  const double dx = ax.active ? 1.0 : 0.0;
  const double dy = ay.active ? 1.0 : 0.0;
  const double dz = az.active ? 1.0 : 0.0;

  TrilinearStencil s;
  for (int c = 0; c < 8; ++c) {
    const int bx = c & 1;
    const int by = (c >> 1) & 1;
    const int bz = (c >> 2) & 1;
    s.index[c] = base + bx * off[0] + by * off[1] + bz * off[2];
    const double wyz = wy[by] * wz[bz];
    s.weight[c] = wx[bx] * wyz;
    s.dweight[0][c] = (bx ? dx : -dx) * wyz;
    s.dweight[1][c] = (by ? dy : -dy) * wx[bx] * wz[bz];
    s.dweight[2][c] = (bz ? dz : -dz) * wx[bx] * wy[by];
  }
  return s;
}


double sample_trilinear(std::span<const double> data, const Dims& dims, const Point3& p);
double sample_trilinear(const Volume& vol, const Point3& p);

/// Value and spatial gradient (d/dp) at `p`.
double sample_trilinear_grad(std::span<const double> data, const Dims& dims, const Point3& p,
                             Point3& grad);

/// Nearest voxel after border clamp; exact .5 rounds up.
std::uint16_t sample_nearest(const LabelMap& lm, const Point3& p);

/// Sum over the (2r+1)^3 window centred at each voxel, truncated at borders.
std::vector<double> box_sum(std::span<const double> in, const Dims& dims, int radius);

/// Number of in-bounds voxels in the truncated window at each voxel.
std::vector<double> box_count(const Dims& dims, int radius);

/// Mean over the w^3 window centred at each voxel (w odd), truncated at borders.
Volume local_mean(const Volume& vol, int w);

}  // namespace symreg
