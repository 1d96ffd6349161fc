#include "symreg/volume.hpp"

#include <algorithm>
#include <cmath>

namespace symreg {

std::string to_string(const Dims& d) {
  return std::to_string(d.nx) + "x" + std::to_string(d.ny) + "x" + std::to_string(d.nz);
}

void require_finite(const Volume& vol) {
  for (double v : vol.data()) {
    if (!std::isfinite(v)) throw std::invalid_argument("volume contains non-finite values");
  }
}

void require_same_dims(const Dims& a, const Dims& b, const char* what) {
  if (!(a == b)) {
    throw std::invalid_argument(std::string(what) + ": dims mismatch " + to_string(a) +
                                " vs " + to_string(b));
  }
}

double sample_trilinear(std::span<const double> data, const Dims& dims, const Point3& p) {
  const TrilinearStencil s = trilinear_stencil(dims, p);
  double v = 0.0;
  for (int c = 0; c < 8; ++c) v += s.weight[c] * data[s.index[c]];
  return v;
}

double sample_trilinear(const Volume& vol, const Point3& p) {
  return sample_trilinear(vol.data(), vol.dims(), p);
}

double sample_trilinear_grad(std::span<const double> data, const Dims& dims, const Point3& p,
                             Point3& grad) {
  const TrilinearStencil s = trilinear_stencil(dims, p);
  double v = 0.0;
  grad = {0.0, 0.0, 0.0};
  for (int c = 0; c < 8; ++c) {
    const double d = data[s.index[c]];
    v += s.weight[c] * d;
    grad[0] += s.dweight[0][c] * d;
    grad[1] += s.dweight[1][c] * d;
    grad[2] += s.dweight[2][c] * d;
  }
  return v;
}

std::uint16_t sample_nearest(const LabelMap& lm, const Point3& p) {
  const Dims& d = lm.dims();
  auto nearest = [](double q, int n) {
    const double c = std::clamp(q, 0.0, static_cast<double>(n - 1));
    return std::min(static_cast<int>(std::floor(c + 0.5)), n - 1);
  };
  return lm.at(nearest(p[0], d.nx), nearest(p[1], d.ny), nearest(p[2], d.nz));
}

namespace {

// Windowed sum along one axis, truncated at both ends.
void box_sum_axis(std::vector<double>& buf, const Dims& d, int axis, int radius) {
  const int n = d[axis];
  if (n == 1 || radius == 0) return;
  const std::size_t stride = axis == 0 ? 1
                             : axis == 1 ? static_cast<std::size_t>(d.nx)
                                         : static_cast<std::size_t>(d.nx) * d.ny;
  // Lines along `axis` are indexed by the two remaining coordinates.
  const int other_a = axis == 0 ? d.ny : d.nx;
  const int other_b = axis == 2 ? d.ny : d.nz;
  std::vector<double> line(n);
  for (int b = 0; b < other_b; ++b) {
    for (int a = 0; a < other_a; ++a) {
      const std::size_t base = axis == 0   ? d.index(0, a, b)
                               : axis == 1 ? d.index(a, 0, b)
                                           : d.index(a, b, 0);
      for (int i = 0; i < n; ++i) line[i] = buf[base + i * stride];
      for (int i = 0; i < n; ++i) {
        const int lo = std::max(0, i - radius);
        const int hi = std::min(n - 1, i + radius);
        double s = 0.0;
        for (int j = lo; j <= hi; ++j) s += line[j];
        buf[base + i * stride] = s;
      }
    }
  }
}

}  // namespace

std::vector<double> box_sum(std::span<const double> in, const Dims& dims, int radius) {
  std::vector<double> out(in.begin(), in.end());
  for (int axis = 0; axis < 3; ++axis) box_sum_axis(out, dims, axis, radius);
  return out;
}

std::vector<double> box_count(const Dims& dims, int radius) {
  auto count1 = [radius](int i, int n) {
    return std::min(n - 1, i + radius) - std::max(0, i - radius) + 1;
  };
  std::vector<double> out(dims.count());
  for (int z = 0; z < dims.nz; ++z)
    for (int y = 0; y < dims.ny; ++y)
      for (int x = 0; x < dims.nx; ++x)
        out[dims.index(x, y, z)] = static_cast<double>(count1(x, dims.nx)) *
                                   count1(y, dims.ny) * count1(z, dims.nz);
  return out;
}

Volume local_mean(const Volume& vol, int w) {
  if (w < 1 || w % 2 == 0) {
    throw std::invalid_argument("window size must be odd and positive, got " + std::to_string(w));
  }
  const int r = w / 2;
  std::vector<double> sums = box_sum(vol.data(), vol.dims(), r);
  const std::vector<double> counts = box_count(vol.dims(), r);
  for (std::size_t i = 0; i < sums.size(); ++i) sums[i] /= counts[i];
  return Volume(vol.dims(), std::move(sums), vol.spacing());
}

}  // namespace symreg
