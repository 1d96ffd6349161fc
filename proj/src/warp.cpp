#include "symreg/warp.hpp"

#include "detail.hpp"

namespace symreg {

Volume warp_image(const Volume& vol, const DeformationField& d) {
  require_same_dims(vol.dims(), d.dims(), "warp_image");
  const Dims& dims = vol.dims();
  Volume out(dims, 0.0, vol.spacing());
  for (int z = 0; z < dims.nz; ++z)
    for (int y = 0; y < dims.ny; ++y)
      for (int x = 0; x < dims.nx; ++x) {
        const std::size_t i = dims.index(x, y, z);
        out[i] = sample_trilinear(vol, {x + d(0, i), y + d(1, i), z + d(2, i)});
      }
  return out;
}

LabelMap warp_labels(const LabelMap& lm, const DeformationField& d) {
  require_same_dims(lm.dims(), d.dims(), "warp_labels");
  const Dims& dims = lm.dims();
  LabelMap out(dims, 0, lm.spacing());
  for (int z = 0; z < dims.nz; ++z)
    for (int y = 0; y < dims.ny; ++y)
      for (int x = 0; x < dims.nx; ++x) {
        const std::size_t i = dims.index(x, y, z);
        out[i] = sample_nearest(lm, {x + d(0, i), y + d(1, i), z + d(2, i)});
      }
  return out;
}

namespace detail {

void warp_image_adjoint(const Volume& vol, const DeformationField& d, std::span<const double> g_out,
                        DeformationField& g_d) {
  const Dims& dims = vol.dims();
  for (int z = 0; z < dims.nz; ++z)
    for (int y = 0; y < dims.ny; ++y)
      for (int x = 0; x < dims.nx; ++x) {
        const std::size_t i = dims.index(x, y, z);
        const double g = g_out[i];
        if (g == 0.0) continue;
        Point3 grad;
        sample_trilinear_grad(vol.data(), dims, {x + d(0, i), y + d(1, i), z + d(2, i)}, grad);
        g_d(0, i) += g * grad[0];
        g_d(1, i) += g * grad[1];
        g_d(2, i) += g * grad[2];
      }
}

}  // namespace detail
}  // namespace symreg
