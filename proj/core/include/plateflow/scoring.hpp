#pragma once

#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "plateflow/features.hpp"
#include "plateflow/flow.hpp"
#include "plateflow/image.hpp"

namespace plateflow {

enum class TransformKind { kIdentity, kRotate, kCrop, kBrightness, kContrast };

/// One member of the scoring transformation ensemble. Parameters are bounded
/// at construction: rotation within +-30 degrees, crop margin in [0, 0.3],
/// brightness delta in [-0.25, 0.25], contrast gamma in [0.75, 1.33].
struct TransformSpec {
  TransformKind kind = TransformKind::kIdentity;
  double value = 0.0;

  static TransformSpec identity();
  static TransformSpec rotate(double angle_deg);
  static TransformSpec crop(double margin_frac);
  static TransformSpec brightness(double delta);
  static TransformSpec contrast(double gamma);

  std::string to_string() const;
  static TransformSpec parse(const std::string& text);
};

/// identity, rotate +-10/+-20 deg, crop 5%/10%, brightness +-0.1,
/// contrast 0.8/1.25.
std::vector<TransformSpec> default_transforms();

/// Parses a semicolon-separated list, e.g. "identity;rotate:10;crop:0.05".
std::vector<TransformSpec> parse_transforms(const std::string& text);
std::string transforms_to_string(std::span<const TransformSpec> transforms);

/// Applies one transform. Rotation is about the patch center (bilinear, edge
/// clamped); crop removes margin*dimension pixels per side and rescales back;
/// brightness/contrast clamp pixels to [0, 1].
Image apply_transform(const Image& patch, const TransformSpec& t);

struct ScoreReport {
  std::vector<double> per_transform_nll;
  double tau = 0.0;          // arithmetic mean of per_transform_nll
  int failed_transforms = 0; // transforms skipped after an extractor/flow error
};

/// Ensemble anomaly score: NLL under the flow for each transformed patch,
/// averaged. Transforms that fail are skipped; throws if all fail.
ScoreReport tau_score(const FlowModel& model, const FeatureExtractor& extractor,
                      const Image& patch, std::span<const TransformSpec> transforms);

/// In-distribution iff tau <= theta (boundary accepted).
bool classify(const ScoreReport& report, double theta);

/// Affine score normalization fitted on the training-set tau distribution,
/// so thresholds are comparable across extractors and flows.
struct TauStandardizer {
  double mean = 0.0;
  double stddev = 1.0;

  double apply(double raw_tau) const { return (raw_tau - mean) / stddev; }
  ScoreReport apply(const ScoreReport& report) const;
  static TauStandardizer fit(std::span<const double> training_taus);
};

struct CalibrationPoint {
  double theta = 0.0;
  double objective = 0.0;
  long n_accepted = 0;
  long n_rejected = 0;
};

struct ThresholdCalibration {
  std::vector<CalibrationPoint> curve;
  double chosen_theta = 0.0;
  std::size_t chosen_index = 0;
};

/// Objective evaluation failed mid-sweep; carries the curve so far.
class CalibrationError : public std::runtime_error {
 public:
  CalibrationError(const std::string& msg, std::vector<CalibrationPoint> partial)
      : std::runtime_error(msg), partial_curve(std::move(partial)) {}
  std::vector<CalibrationPoint> partial_curve;
};

/// Evaluates the objective over an ascending theta grid and returns the
/// argmin (ties resolved toward the smaller theta). scores_pos feeds the
/// accepted/rejected counts recorded per grid point.
ThresholdCalibration calibrate_threshold(std::span<const double> scores_pos,
                                         const std::function<double(double)>& objective,
                                         std::span<const double> grid);

/// CSV with header "theta,objective,n_accepted,n_rejected".
void write_calibration_csv(const ThresholdCalibration& calibration, const std::string& path);

/// Area under the ROC curve obtained by sweeping the acceptance threshold.
/// `pos` are scores that should be accepted (low), `neg` rejected (high).
double roc_auc(std::span<const double> pos, std::span<const double> neg);

}  // namespace plateflow
