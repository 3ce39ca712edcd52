#pragma once

#include <string>

#include "plateflow/flow.hpp"
#include "plateflow/image.hpp"

namespace plateflow {

enum class ExtractorMethod {
  kRawPatch,  // grayscale resize to a grid, then standardize
  kGradHist,  // orientation histogram over a cell grid, then standardize
};

std::string to_string(ExtractorMethod m);
ExtractorMethod extractor_method_from_string(const std::string& s);

struct FeatureExtractorConfig {
  ExtractorMethod method = ExtractorMethod::kRawPatch;
  int grid_w = 8;
  int grid_h = 8;
  int bins = 8;  // grad_hist only
};

/// Deterministic patch-to-vector map with a fixed even output dimension.
/// Output vectors are z-scored per patch; a zero-variance patch maps to the
/// all-zero vector.
class FeatureExtractor {
 public:
  explicit FeatureExtractor(const FeatureExtractorConfig& config);

  int dim() const { return dim_; }
  const FeatureExtractorConfig& config() const { return config_; }

  /// Requires the patch to be at least 8x8 pixels.
  FeatureVector extract(const Image& patch) const;

 private:
  FeatureExtractorConfig config_;
  int dim_ = 0;
};

}  // namespace plateflow
