#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "plateflow/image.hpp"
#include "plateflow/plate.hpp"
#include "plateflow/voc.hpp"

namespace plateflow {

/// Parameters for one synthetic plate scene.
struct SyntheticPlateSpec {
  PlateLayout layout = PlateLayout::kNew;
  int vehicle_number = 0;        // 0..99999
  int province = 0;              // 0..99
  std::string series_char = "a"; // one of the nine letter classes
  double noise_level = 0.0;      // gaussian pixel noise sigma
  double rotation_deg = 0.0;     // whole-plate rotation
};

/// Rendered scene plus exact ground truth.
struct SyntheticPlate {
  Image scene;
  AnnotatedImage annotation;  // "plate" box plus per-character boxes
  PlateString truth;
  BoundingBox plate_box;
};

/// 5x7 ink mask for one character class, row-major, '1' = ink.
const std::vector<std::string>& glyph_mask(const std::string& label);

/// Renders the plate described by the spec onto a textured scene. Character
/// ground-truth boxes are the tight ink bounds of each glyph; deterministic
/// per (spec, seed). Throws ConfigError for out-of-range fields.
SyntheticPlate synth_plate(const SyntheticPlateSpec& spec, std::uint64_t seed);

}  // namespace plateflow
