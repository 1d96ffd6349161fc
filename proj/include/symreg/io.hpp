#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include "symreg/field.hpp"
#include "symreg/volume.hpp"

namespace symreg {

/// Malformed header, payload/header mismatch, or invalid values on load.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// On-disk layout: `<name>.json` header plus `<name>.raw` payload of packed
// little-endian values, x fastest. Volumes and fields use f32, labels u16.
// Fields add `channels: 3` and `layout: "planar"` to the header.
//
// Paths may name either the .json header or the common stem.

void save_volume(const Volume& vol, const std::filesystem::path& path);
Volume load_volume(const std::filesystem::path& path);

void save_labels(const LabelMap& lm, const std::filesystem::path& path);
LabelMap load_labels(const std::filesystem::path& path);

void save_field(const VectorField& f, const std::filesystem::path& path);
VectorField load_field(const std::filesystem::path& path);

/// Reads just the "dtype" entry of a header.
std::string peek_dtype(const std::filesystem::path& path);

}  // namespace symreg
