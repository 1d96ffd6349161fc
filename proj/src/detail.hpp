#pragma once

// Internal kernels shared between the forward modules and the adjoint sweep.

#include <span>
#include <vector>

#include "symreg/field.hpp"
#include "symreg/loss.hpp"
#include "symreg/volume.hpp"

namespace symreg::detail {

// Adjoint of compose(a, b): accumulates into g_a (sampled values) and g_b
// (pass-through plus sampling coordinates). g_a and g_b may alias.
void compose_adjoint(const DeformationField& a, const DeformationField& b,
                     const DeformationField& g_out, DeformationField& g_a, DeformationField& g_b);

// Back-propagates through every squaring of `traj` and the initial scaling,
// accumulating into g_v.
void exp_svf_adjoint(const std::vector<DeformationField>& traj, Direction sign, int steps,
                     DeformationField g_result, VelocityField& g_v);

void softsign_adjoint(const VelocityField& raw, double c, const VelocityField& g_v,
                      VelocityField& g_raw);

// Adjoint of warp_image with respect to the displacement.
void warp_image_adjoint(const Volume& vol, const DeformationField& d, std::span<const double> g_out,
                        DeformationField& g_d);

// ncc(a, b); when g_a / g_b are non-empty, accumulates scale * d ncc / d a (b).
double ncc_kernel(std::span<const double> a, std::span<const double> b, const Dims& dims, int w,
                  double eps, std::span<double> g_a, std::span<double> g_b, double scale);

// Sum of max(0, -det) over the field; accumulates scale * d/du into g (if non-null).
double jdet_penalty_kernel(const DeformationField& d, DeformationField* g, double scale);

double smooth_kernel(const VelocityField& v, VelocityField* g, double scale);

double mag_kernel(const VelocityField& v_xy, const VelocityField& v_yx, VelocityField* g_xy,
                  VelocityField* g_yx, double scale);

// Every intermediate of the objective, kept for the reverse sweep.
struct Pipeline {
  std::vector<DeformationField> xy_half;  // trajectory of exp(v_xy, 0.5, +1)
  std::vector<DeformationField> yx_half;
  std::vector<DeformationField> xy_inv;  // trajectory of exp(v_xy, 0.5, -1)
  std::vector<DeformationField> yx_inv;
  DeformationField xy_full;
  DeformationField yx_full;
  Volume x_half;
  Volume y_half;
  Volume x_full;
  Volume y_full;
  LossBreakdown loss;
};

Pipeline run_pipeline(const Volume& x, const Volume& y, const VelocityField& v_xy,
                      const VelocityField& v_yx, const LossWeights& weights, int steps,
                      const LossTerms& terms);

}  // namespace symreg::detail
