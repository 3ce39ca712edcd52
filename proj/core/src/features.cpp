#include "plateflow/features.hpp"

#include <cmath>

#include "plateflow/errors.hpp"

namespace plateflow {

std::string to_string(ExtractorMethod m) {
  switch (m) {
    case ExtractorMethod::kRawPatch: return "raw_patch";
    case ExtractorMethod::kGradHist: return "grad_hist";
  }
  return "raw_patch";
}

ExtractorMethod extractor_method_from_string(const std::string& s) {
  if (s == "raw_patch") return ExtractorMethod::kRawPatch;
  if (s == "grad_hist") return ExtractorMethod::kGradHist;
  throw ConfigError("unknown extractor method: " + s);
}

namespace {

FeatureVector standardize(FeatureVector v) {
  const double mean = v.mean();
  const double var = (v.array() - mean).square().mean();
  if (var < 1e-24) return FeatureVector::Zero(v.size());
  return ((v.array() - mean) / std::sqrt(var)).matrix();
}

}  // namespace

FeatureExtractor::FeatureExtractor(const FeatureExtractorConfig& config) : config_(config) {
  if (config.grid_w < 1 || config.grid_h < 1) throw ConfigError("extractor grid must be positive");
  if (config.method == ExtractorMethod::kGradHist && config.bins < 2)
    throw ConfigError("grad_hist needs at least 2 orientation bins");
  dim_ = config.method == ExtractorMethod::kRawPatch
             ? config.grid_w * config.grid_h
             : config.grid_w * config.grid_h * config.bins;
  if (dim_ < 2 || dim_ % 2 != 0)
    throw ConfigError("feature dimension must be even and >= 2, got " + std::to_string(dim_));
}

FeatureVector FeatureExtractor::extract(const Image& patch) const {
  if (patch.width() < 8 || patch.height() < 8)
    throw DataError("extract_features: patch smaller than 8x8");

  if (config_.method == ExtractorMethod::kRawPatch) {
    const Image small = resize_bilinear(patch, config_.grid_w, config_.grid_h);
    FeatureVector v(dim_);
    for (int r = 0; r < small.height(); ++r)
      for (int c = 0; c < small.width(); ++c)
        v[static_cast<Eigen::Index>(r) * small.width() + c] = small.at(r, c);
    return standardize(std::move(v));
  }

  // grad_hist: central-difference gradients on an 8x-per-cell working raster,
  // orientation folded to [0, pi), magnitude-weighted cell histograms.
  constexpr int kCellPx = 8;
  const Image work = resize_bilinear(patch, config_.grid_w * kCellPx, config_.grid_h * kCellPx);
  FeatureVector v = FeatureVector::Zero(dim_);
  for (int r = 1; r < work.height() - 1; ++r) {
    for (int c = 1; c < work.width() - 1; ++c) {
      const double gx = work.at(r, c + 1) - work.at(r, c - 1);
      const double gy = work.at(r + 1, c) - work.at(r - 1, c);
      const double mag = std::sqrt(gx * gx + gy * gy);
      if (mag <= 0.0) continue;
      double angle = std::atan2(gy, gx);
      if (angle < 0.0) angle += M_PI;
      if (angle >= M_PI) angle -= M_PI;
      int bin = static_cast<int>(angle / M_PI * config_.bins);
      bin = std::min(bin, config_.bins - 1);
      const int cell_r = r / kCellPx;
      const int cell_c = c / kCellPx;
      const Eigen::Index slot =
          (static_cast<Eigen::Index>(cell_r) * config_.grid_w + cell_c) * config_.bins + bin;
      v[slot] += mag;
    }
  }
  return standardize(std::move(v));
}

}  // namespace plateflow
