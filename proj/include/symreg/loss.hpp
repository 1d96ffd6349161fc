#pragma once

#include <span>
#include <string>
#include <vector>

#include "symreg/field.hpp"
#include "symreg/volume.hpp"

namespace symreg {

struct LossWeights {
  double lambda_jdet = 1000.0;  // orientation consistency
  double lambda_reg = 3.0;      // velocity smoothness
  double lambda_mag = 0.1;      // magnitude balance
  int window = 7;
  double eps = 1e-5;

  /// Throws std::invalid_argument on negative weights, even window or eps <= 0.
  void validate() const;
};

/// Selects which terms enter the total. Terms that are switched off are still
/// reported in LossBreakdown but contribute nothing to total or gradient.
struct LossTerms {
  bool mean = true;
  bool pair = true;
  bool jdet = true;
  bool reg = true;
  bool mag = true;

  static LossTerms all() { return {}; }
  static LossTerms none() { return {false, false, false, false, false}; }
};

struct LossBreakdown {
  double l_mean = 0.0;
  double l_pair = 0.0;
  double l_jdet = 0.0;
  double l_reg = 0.0;
  double l_mag = 0.0;
  double total = 0.0;
};

/// total = (l_mean + l_pair) + l1 * l_jdet + l2 * l_reg + l3 * l_mag over enabled terms.
double assemble_total(const LossBreakdown& b, const LossWeights& w,
                      const LossTerms& terms = LossTerms::all());

/// One-line JSON record; `iteration` < 0 omits the field.
std::string to_json_line(const LossBreakdown& b, int iteration = -1);

/// Mean over voxels of the windowed correlation coefficient
///   cross / sqrt(var_I * var_J + eps)
/// where cross and var are window sums of centred products.
double ncc(const Volume& a, const Volume& b, int w = 7, double eps = 1e-5);

double loss_mean_shape(const Volume& x_warped, const Volume& y_warped, int w = 7,
                       double eps = 1e-5);

/// -ncc(x_full, y) - ncc(y_full, x).
double loss_pair(const Volume& x_full, const Volume& y, const Volume& y_full, const Volume& x,
                 int w = 7, double eps = 1e-5);

/// Determinant of d(x + u)/dx; central differences inside, one-sided on faces.
Volume jacobian_det_field(const DeformationField& d);

/// Mean of max(0, -det) over all voxels of all supplied fields.
double loss_jdet(std::span<const DeformationField* const> fields);
double loss_jdet(const DeformationField& a, const DeformationField& b);

/// Sum of squared forward differences of every component of both fields,
/// divided by the voxel count.
double loss_smooth(const VelocityField& v_xy, const VelocityField& v_yx);

/// | ||v_xy||^2 - ||v_yx||^2 | / (3 * voxels).
double loss_mag(const VelocityField& v_xy, const VelocityField& v_yx);

/// Full objective for normalized velocity fields.
LossBreakdown total_loss(const Volume& x, const Volume& y, const VelocityField& v_xy,
                         const VelocityField& v_yx, const LossWeights& weights = {},
                         int steps = kDefaultSquaringSteps,
                         const LossTerms& terms = LossTerms::all());

}  // namespace symreg
