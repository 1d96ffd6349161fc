#pragma once

#include <span>
#include <vector>

#include "symreg/volume.hpp"

namespace symreg {

/// Per-voxel 3-vector in voxel units, stored planar: all x-components, then
/// all y-components, then all z-components.
class VectorField {
 public:
  VectorField() = default;
  explicit VectorField(Dims dims);
  VectorField(Dims dims, std::vector<double> data);

  const Dims& dims() const { return dims_; }
  std::size_t voxels() const { return dims_.count(); }

  std::span<double> component(int c) { return {data_.data() + c * voxels(), voxels()}; }
  std::span<const double> component(int c) const {
    return {data_.data() + c * voxels(), voxels()};
  }
  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  double& operator()(int c, std::size_t i) { return data_[c * voxels() + i]; }
  double operator()(int c, std::size_t i) const { return data_[c * voxels() + i]; }

  bool all_finite() const;
  bool operator==(const VectorField&) const = default;

 private:
  Dims dims_{};
  std::vector<double> data_;
};

/// Stationary velocity field v.
struct VelocityField : VectorField {
  using VectorField::VectorField;
};

/// Displacement u of a deformation phi(x) = x + u(x).
struct DeformationField : VectorField {
  using VectorField::VectorField;
};

enum class Direction { forward = 1, inverse = -1 };
enum class FlowTime { half, full };

inline constexpr int kDefaultSquaringSteps = 7;
inline constexpr double kDefaultVelocityBound = 100.0;

DeformationField identity_field(const Dims& dims);

/// c * raw / (1 + |raw|), componentwise.
VelocityField softsign_normalize(const VelocityField& raw, double c = kDefaultVelocityBound);

/// result(x) = a(b(x)); u_out(x) = u_b(x) + u_a(x + u_b(x)).
DeformationField compose(const DeformationField& a, const DeformationField& b);

/// Scaling and squaring: start from sign * v / 2^T, then square T-1 times for
/// the half flow or T times for the full flow.
DeformationField exp_svf(const VelocityField& v, FlowTime t, Direction sign,
                         int steps = kDefaultSquaringSteps);

/// Every intermediate field of exp_svf, from the initial scaled field to the
/// result. Used by the adjoint sweep.
std::vector<DeformationField> exp_svf_trajectory(const VelocityField& v, FlowTime t,
                                                 Direction sign, int steps);

struct FullTransforms {
  DeformationField xy_half;
  DeformationField yx_half;
  DeformationField xy_full;
  DeformationField yx_full;
};

/// xy_full = inverse-half(v_yx) o xy_half, yx_full = inverse-half(v_xy) o yx_half.
FullTransforms full_transforms(const VelocityField& v_xy, const VelocityField& v_yx,
                               int steps = kDefaultSquaringSteps);

/// Mean Euclidean norm of the displacement.
double mean_displacement(const DeformationField& d);

}  // namespace symreg
