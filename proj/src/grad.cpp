#include "symreg/grad.hpp"

#include <array>
#include <cmath>

#include "detail.hpp"

namespace symreg {

double& ParameterPair::operator[](std::size_t k) {
  const std::size_t n = xy.data().size();
  return k < n ? xy.data()[k] : yx.data()[k - n];
}

double ParameterPair::operator[](std::size_t k) const {
  const std::size_t n = xy.data().size();
  return k < n ? xy.data()[k] : yx.data()[k - n];
}

double GradientPair::operator[](std::size_t k) const {
  const std::size_t n = g_xy.data().size();
  return k < n ? g_xy.data()[k] : g_yx.data()[k - n];
}

LossBreakdown total_loss_raw(const Volume& x, const Volume& y, const ParameterPair& raw,
                             const LossWeights& weights, int steps, double c,
                             const LossTerms& terms) {
  return total_loss(x, y, softsign_normalize(raw.xy, c), softsign_normalize(raw.yx, c), weights,
                    steps, terms);
}

namespace {

void check_finite(const VectorField& f, const char* term) {
  if (!f.all_finite()) throw NonFiniteGradient(term);
}

}  // namespace

LossAndGradient grad_total_loss(const Volume& x, const Volume& y, const ParameterPair& raw,
                                const LossWeights& weights, int steps, double c,
                                const LossTerms& terms) {
  const VelocityField v_xy = softsign_normalize(raw.xy, c);
  const VelocityField v_yx = softsign_normalize(raw.yx, c);
  const detail::Pipeline p = detail::run_pipeline(x, y, v_xy, v_yx, weights, steps, terms);
  const Dims& dims = x.dims();
  const std::size_t n = dims.count();
  const int w = weights.window;
  const double eps = weights.eps;

  // Similarity: images are constant, only the warped volumes carry gradient.
  std::vector<double> g_x_half(n, 0.0), g_y_half(n, 0.0), g_x_full(n, 0.0), g_y_full(n, 0.0);
  if (terms.mean) {
    detail::ncc_kernel(p.x_half.data(), p.y_half.data(), dims, w, eps, g_x_half, g_y_half, -1.0);
  }
  if (terms.pair) {
    detail::ncc_kernel(p.x_full.data(), y.data(), dims, w, eps, g_x_full, {}, -1.0);
    detail::ncc_kernel(p.y_full.data(), x.data(), dims, w, eps, g_y_full, {}, -1.0);
  }

  DeformationField g_xy_half(dims), g_yx_half(dims), g_xy_inv(dims), g_yx_inv(dims);
  DeformationField g_xy_full(dims), g_yx_full(dims);
  detail::warp_image_adjoint(x, p.xy_half.back(), g_x_half, g_xy_half);
  detail::warp_image_adjoint(y, p.yx_half.back(), g_y_half, g_yx_half);
  detail::warp_image_adjoint(x, p.xy_full, g_x_full, g_xy_full);
  detail::warp_image_adjoint(y, p.yx_full, g_y_full, g_yx_full);
  detail::compose_adjoint(p.yx_inv.back(), p.xy_half.back(), g_xy_full, g_yx_inv, g_xy_half);
  detail::compose_adjoint(p.xy_inv.back(), p.yx_half.back(), g_yx_full, g_xy_inv, g_yx_half);
  check_finite(g_xy_half, "similarity");
  check_finite(g_yx_half, "similarity");
  check_finite(g_xy_inv, "similarity");
  check_finite(g_yx_inv, "similarity");

  if (terms.jdet && weights.lambda_jdet != 0.0) {
    const double scale = weights.lambda_jdet / static_cast<double>(2 * n);
    detail::jdet_penalty_kernel(p.xy_half.back(), &g_xy_half, scale);
    detail::jdet_penalty_kernel(p.yx_half.back(), &g_yx_half, scale);
    check_finite(g_xy_half, "jacobian determinant");
    check_finite(g_yx_half, "jacobian determinant");
  }

  VelocityField g_v_xy(dims), g_v_yx(dims);
  detail::exp_svf_adjoint(p.xy_half, Direction::forward, steps, std::move(g_xy_half), g_v_xy);
  detail::exp_svf_adjoint(p.xy_inv, Direction::inverse, steps, std::move(g_xy_inv), g_v_xy);
  detail::exp_svf_adjoint(p.yx_half, Direction::forward, steps, std::move(g_yx_half), g_v_yx);
  detail::exp_svf_adjoint(p.yx_inv, Direction::inverse, steps, std::move(g_yx_inv), g_v_yx);
  check_finite(g_v_xy, "scaling and squaring");
  check_finite(g_v_yx, "scaling and squaring");

  if (terms.reg && weights.lambda_reg != 0.0) {
    const double scale = weights.lambda_reg / static_cast<double>(n);
    detail::smooth_kernel(v_xy, &g_v_xy, scale);
    detail::smooth_kernel(v_yx, &g_v_yx, scale);
    check_finite(g_v_xy, "smoothness");
    check_finite(g_v_yx, "smoothness");
  }
  if (terms.mag && weights.lambda_mag != 0.0) {
    detail::mag_kernel(v_xy, v_yx, &g_v_xy, &g_v_yx, weights.lambda_mag);
    check_finite(g_v_xy, "magnitude");
    check_finite(g_v_yx, "magnitude");
  }

  LossAndGradient out{p.loss, {VelocityField(dims), VelocityField(dims)}};
  detail::softsign_adjoint(raw.xy, c, g_v_xy, out.grad.g_xy);
  detail::softsign_adjoint(raw.yx, c, g_v_yx, out.grad.g_yx);
  check_finite(out.grad.g_xy, "softsign");
  check_finite(out.grad.g_yx, "softsign");
  return out;
}

double fd_gradient(const Objective& f, const ParameterPair& raw, std::size_t k, double step) {
  if (!(step > 0.0)) throw std::invalid_argument("finite-difference step must be positive");
  if (k >= raw.size()) throw std::out_of_range("parameter index out of range");
  ParameterPair plus = raw;
  ParameterPair minus = raw;
  plus[k] += step;
  minus[k] -= step;
  return (f(plus) - f(minus)) / (2.0 * step);
}

double fd_gradient(const Volume& x, const Volume& y, const ParameterPair& raw,
                   const LossWeights& weights, int steps, double c, std::size_t k, double step,
                   const LossTerms& terms) {
  return fd_gradient(
      [&](const ParameterPair& p) { return total_loss_raw(x, y, p, weights, steps, c, terms).total; },
      raw, k, step);
}

}  // namespace symreg
