#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "symreg/field.hpp"
#include "symreg/volume.hpp"

namespace symreg {

struct LabelDice {
  std::uint16_t label = 0;
  bool present = false;  // false when the label is absent from both maps
  double score = 0.0;
};

struct DiceReport {
  std::vector<LabelDice> labels;
  double mean = 0.0;  // over present labels only
  std::size_t scored = 0;
};

/// Per-label 2|A∩B| / (|A|+|B|). An empty `labels` list means every nonzero
/// label occurring in either map.
DiceReport dice(const LabelMap& a, const LabelMap& b, std::vector<std::uint16_t> labels = {});

struct FoldReport {
  std::size_t total = 0;
  std::size_t non_positive = 0;  // voxels with det <= 0
  double min_det = 0.0;
  double fraction = 0.0;
};

FoldReport fold_report(const DeformationField& d);

struct SynthPair {
  Volume x;
  Volume y;
  VelocityField v_true;
  DeformationField phi_true;  // exp(v_true); y = warp_image(x, phi_true)
  LabelMap labels_x;
  LabelMap labels_y;
};

/// Smooth random blob image x, Gaussian-smoothed random velocity with
/// max |v| = amplitude, and y = x warped by exp(v).
SynthPair synth_pair(std::uint64_t seed, const Dims& dims, double smoothness, double amplitude,
                     int steps = kDefaultSquaringSteps);

/// Same blob image; y(p) = x(p + shift), so the ground-truth x->y field is the
/// constant displacement `shift`.
SynthPair synth_translation_pair(std::uint64_t seed, const Dims& dims, const Point3& shift);

/// Separable Gaussian smoothing with border clamp.
std::vector<double> gaussian_smooth(std::span<const double> in, const Dims& dims, double sigma);

enum class SliceAxis { x, y, z };

struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // row-major
};

/// Slice of `vol` at `index` along `axis`, min-max rescaled to 0..255.
/// For axis z, pixel (i, j) is vol(i, j, index) at column i, row j.
GrayImage extract_slice(const Volume& vol, SliceAxis axis, int index);

void write_pgm(const GrayImage& img, const std::filesystem::path& path);
GrayImage read_pgm(const std::filesystem::path& path);

}  // namespace symreg
