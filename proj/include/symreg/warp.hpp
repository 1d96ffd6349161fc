#pragma once

#include "symreg/field.hpp"
#include "symreg/volume.hpp"

namespace symreg {

/// Backward warp: out(x) = vol(x + u(x)), trilinear with border clamp.
Volume warp_image(const Volume& vol, const DeformationField& d);

/// Backward warp of labels with nearest-neighbour lookup.
LabelMap warp_labels(const LabelMap& lm, const DeformationField& d);

}  // namespace symreg
