#include "symreg/field.hpp"

#include <cmath>
#include <stdexcept>

#include "detail.hpp"

namespace symreg {

VectorField::VectorField(Dims dims) : dims_(dims), data_(3 * dims.count(), 0.0) {
  if (!dims.valid()) throw std::invalid_argument("invalid dims " + to_string(dims));
}

VectorField::VectorField(Dims dims, std::vector<double> data)
    : dims_(dims), data_(std::move(data)) {
  if (!dims.valid()) throw std::invalid_argument("invalid dims " + to_string(dims));
  if (data_.size() != 3 * dims.count()) {
    throw std::invalid_argument("vector field data length " + std::to_string(data_.size()) +
                                " does not match 3 x " + to_string(dims));
  }
}

bool VectorField::all_finite() const {
  for (double v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

DeformationField identity_field(const Dims& dims) { return DeformationField(dims); }

VelocityField softsign_normalize(const VelocityField& raw, double c) {
  if (!(c > 0.0)) throw std::invalid_argument("velocity bound c must be positive");
  VelocityField out(raw.dims());
  auto src = raw.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = c * src[i] / (1.0 + std::abs(src[i]));
  return out;
}

DeformationField compose(const DeformationField& a, const DeformationField& b) {
  require_same_dims(a.dims(), b.dims(), "compose");
  const Dims& d = a.dims();
  DeformationField out(d);
  for (int z = 0; z < d.nz; ++z) {
    for (int y = 0; y < d.ny; ++y) {
      for (int x = 0; x < d.nx; ++x) {
        const std::size_t i = d.index(x, y, z);
        const Point3 p{x + b(0, i), y + b(1, i), z + b(2, i)};
        const TrilinearStencil s = trilinear_stencil(d, p);
        for (int c = 0; c < 3; ++c) {
          auto ac = a.component(c);
          double v = 0.0;
          for (int k = 0; k < 8; ++k) v += s.weight[k] * ac[s.index[k]];
          out(c, i) = b(c, i) + v;
        }
      }
    }
  }
  return out;
}

std::vector<DeformationField> exp_svf_trajectory(const VelocityField& v, FlowTime t,
                                                 Direction sign, int steps) {
  if (steps < 1) throw std::invalid_argument("squaring steps must be >= 1");
  const double scale = static_cast<int>(sign) / std::ldexp(1.0, steps);
  DeformationField init(v.dims());
  auto src = v.data();
  auto dst = init.data();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = scale * src[i];

  const int squarings = t == FlowTime::half ? steps - 1 : steps;
  std::vector<DeformationField> traj;
  traj.reserve(squarings + 1);
  traj.push_back(std::move(init));
  for (int k = 0; k < squarings; ++k) traj.push_back(compose(traj.back(), traj.back()));
  return traj;
}

DeformationField exp_svf(const VelocityField& v, FlowTime t, Direction sign, int steps) {
  auto traj = exp_svf_trajectory(v, t, sign, steps);
  return std::move(traj.back());
}

FullTransforms full_transforms(const VelocityField& v_xy, const VelocityField& v_yx, int steps) {
  require_same_dims(v_xy.dims(), v_yx.dims(), "full_transforms");
  FullTransforms out;
  out.xy_half = exp_svf(v_xy, FlowTime::half, Direction::forward, steps);
  out.yx_half = exp_svf(v_yx, FlowTime::half, Direction::forward, steps);
  out.xy_full = compose(exp_svf(v_yx, FlowTime::half, Direction::inverse, steps), out.xy_half);
  out.yx_full = compose(exp_svf(v_xy, FlowTime::half, Direction::inverse, steps), out.yx_half);
  return out;
}

double mean_displacement(const DeformationField& d) {
  const std::size_t n = d.voxels();
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += std::hypot(d(0, i), d(1, i), d(2, i));
  return s / static_cast<double>(n);
}

namespace detail {

void compose_adjoint(const DeformationField& a, const DeformationField& b,
                     const DeformationField& g_out, DeformationField& g_a, DeformationField& g_b) {
  const Dims& d = a.dims();
  for (int z = 0; z < d.nz; ++z) {
    for (int y = 0; y < d.ny; ++y) {
      for (int x = 0; x < d.nx; ++x) {
        const std::size_t i = d.index(x, y, z);
        const Point3 p{x + b(0, i), y + b(1, i), z + b(2, i)};
        const TrilinearStencil s = trilinear_stencil(d, p);
        double gp[3] = {0.0, 0.0, 0.0};
        for (int c = 0; c < 3; ++c) {
          const double g = g_out(c, i);
          g_b(c, i) += g;
          if (g == 0.0) continue;
          auto ac = a.component(c);
          auto gac = g_a.component(c);
          for (int k = 0; k < 8; ++k) {
            gac[s.index[k]] += s.weight[k] * g;
            const double ak = ac[s.index[k]];
            gp[0] += s.dweight[0][k] * ak * g;
            gp[1] += s.dweight[1][k] * ak * g;
            gp[2] += s.dweight[2][k] * ak * g;
          }
        }
        g_b(0, i) += gp[0];
        g_b(1, i) += gp[1];
        g_b(2, i) += gp[2];
      }
    }
  }
}

void exp_svf_adjoint(const std::vector<DeformationField>& traj, Direction sign, int steps,
                     DeformationField g_result, VelocityField& g_v) {
  for (std::size_t k = traj.size() - 1; k > 0; --k) {
    DeformationField g_prev(g_result.dims());
    compose_adjoint(traj[k - 1], traj[k - 1], g_result, g_prev, g_prev);
    g_result = std::move(g_prev);
  }
  const double scale = static_cast<int>(sign) / std::ldexp(1.0, steps);
  auto src = g_result.data();
  auto dst = g_v.data();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] += scale * src[i];
}

void softsign_adjoint(const VelocityField& raw, double c, const VelocityField& g_v,
                      VelocityField& g_raw) {
  auto r = raw.data();
  auto g = g_v.data();
  auto out = g_raw.data();
  for (std::size_t i = 0; i < r.size(); ++i) {
    const double den = 1.0 + std::abs(r[i]);
    out[i] += g[i] * c / (den * den);
  }
}

}  // namespace detail
}  // namespace symreg
