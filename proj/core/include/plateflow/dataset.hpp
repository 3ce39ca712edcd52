#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "plateflow/plate.hpp"
#include "plateflow/synth.hpp"
#include "plateflow/voc.hpp"

namespace plateflow {

struct SplitFractions {
  double train = 0.4;
  double test = 0.4;
  double validation = 0.2;
};

/// Deterministic stratified split over item strata keys. Per stratum the
/// test and validation shares round down and training takes the remainder.
/// Returns three disjoint index lists covering the input.
struct SplitIndices {
  std::vector<int> train;
  std::vector<int> test;
  std::vector<int> validation;
};
SplitIndices split_indices(std::span<const std::string> strata, std::uint64_t seed,
                           const SplitFractions& fractions = {});

struct SplitResult {
  std::vector<AnnotatedImage> train;
  std::vector<AnnotatedImage> test;
  std::vector<AnnotatedImage> validation;
};

/// Stratified 40/40/20 split (by the items' stratum field when present).
/// Requires at least 5 items; sets each item's split tag.
SplitResult split_dataset(std::vector<AnnotatedImage> items, std::uint64_t seed,
                          const SplitFractions& fractions = {});

/// One line of a generated dataset manifest.
struct ManifestEntry {
  std::string image_id;
  std::string image_path;        // relative to the dataset dir
  std::string annotation_xml;
  std::string annotation_json;
  std::string detections_path;
  std::string text;
  PlateLayout layout = PlateLayout::kNew;
  std::string vehicle_number;
  std::string province_number;
  std::string series_char;
  std::string stratum;
};

void save_manifest(std::span<const ManifestEntry> entries, const std::string& path);
std::vector<ManifestEntry> load_manifest(const std::string& path);

struct SynthDatasetConfig {
  int count = 200;
  std::uint64_t seed = 0;
  double noise_level = 0.0;
  double rotation_max_deg = 0.0;
  double mix_new = 0.85;
  double mix_numeric = 0.10;
  double mix_old = 0.05;
  bool uniform_layouts = false;     // equal layout shares instead of the mix
  double false_plate_rate = 0.0;    // extra background "plate" detections
  double confidence_lo = 0.85;      // detector confidence jitter range
  double confidence_hi = 1.0;
};

/// Renders `count` plates under <out_dir>/{images,annotations,detections}
/// plus manifest.jsonl. Deterministic per (config, seed); byte-identical
/// across runs.
std::vector<ManifestEntry> generate_dataset(const SynthDatasetConfig& config,
                                            const std::string& out_dir);

}  // namespace plateflow
