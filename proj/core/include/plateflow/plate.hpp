#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "plateflow/classifier.hpp"
#include "plateflow/detect.hpp"
#include "plateflow/features.hpp"
#include "plateflow/flow.hpp"
#include "plateflow/labels.hpp"
#include "plateflow/scoring.hpp"

namespace plateflow {

/// Character detection after classification and flow cross-check.
struct CharDetection {
  int class_index = 0;       // argmax of softmax
  std::string label;
  BoundingBox box;
  double confidence = 0.0;   // detector confidence times softmax peak
  double tau = 0.0;          // ensemble score, standardized when configured
  Eigen::VectorXd softmax;   // 19 probabilities
};

enum class PlateLayout { kNew, kOld, kNumericOnly };

std::string to_string(PlateLayout layout);
PlateLayout plate_layout_from_string(const std::string& s);

/// Assembled plate string. Components are stored as label sequences so that
/// multi-character class labels (waw, ww) survive slot-wise processing.
struct PlateString {
  PlateLayout layout = PlateLayout::kNumericOnly;
  std::vector<std::string> vehicle_labels;
  std::vector<std::string> province_labels;
  std::string series_char;  // empty when no series slot

  std::string vehicle_number() const;
  std::string province_number() const;
  /// Canonical text: vehicle + series + province; numeric-only plates are
  /// their digits in reading order.
  std::string text() const;
};

struct AssembleOptions {
  double row_gap_factor = 0.5;    // of median char height
  double group_gap_factor = 0.5;  // of median char width
  // When no letter class is present but a single row splits into three
  // gap-separated groups with a lone middle character, treat that character
  // as the series slot (it can then be corrected by confusion_swap).
  bool infer_series_from_gaps = true;
};

struct AssembleResult {
  PlateString plate;
  std::vector<CharDetection> ordered;   // surviving detections in reading order
  std::vector<CharDetection> rejected;  // extra letter classes demoted here
};

/// Orders accepted character detections into a plate string: rows split by
/// vertical-center gaps, left-to-right within a row, layout decided by the
/// position of the (single) letter class.
AssembleResult assemble_plate(std::span<const CharDetection> chars,
                              const AssembleOptions& options = {});

/// Slot-consistency swap table; configuration, not code.
struct SwapTable {
  std::map<std::string, std::string> digit_slot;   // letter lookalike -> digit
  std::map<std::string, std::string> series_slot;  // digit lookalike -> letter

  static SwapTable defaults();  // a->1, b->6, d->0; series 1->a
  static SwapTable parse(const std::string& digit_spec, const std::string& series_spec);
};

/// Remaps slot-inconsistent characters: letter lookalikes inside digit slots
/// become digits, a digit occupying the series slot becomes its letter.
/// numeric-only plates are never modified. Idempotent.
PlateString confusion_swap(const PlateString& plate, const SwapTable& table = SwapTable::defaults());

struct CharClassifyContext {
  const SoftmaxClassifier* classifier = nullptr;
  const FlowModel* flow = nullptr;
  const FeatureExtractor* extractor = nullptr;
  std::span<const TransformSpec> transforms;
  const TauStandardizer* standardizer = nullptr;  // null = raw scores
  double theta = 0.0;
};

struct ClassifiedChar {
  CharDetection detection;
  bool accepted = false;  // tau <= theta (boundary accepted)
};

/// Softmax over the 19 classes plus the transformation-ensemble score; the
/// detection is rejected when its (standardized) tau exceeds theta.
ClassifiedChar classify_char(const Image& patch, const CharClassifyContext& context,
                             const BoundingBox& box, double detector_confidence = 1.0);

}  // namespace plateflow
