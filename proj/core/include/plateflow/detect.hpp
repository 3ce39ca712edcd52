#pragma once

#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "plateflow/image.hpp"

namespace plateflow {

/// Axis-aligned box in pixel coordinates, x_min < x_max and y_min < y_max.
struct BoundingBox {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;

  double width() const { return x_max - x_min; }
  double height() const { return y_max - y_min; }
  double area() const { return width() * height(); }
  bool valid() const { return x_min < x_max && y_min < y_max; }
};

/// One detector output. tau is attached after flow verification; NaN until then.
struct Detection {
  BoundingBox box;
  std::string label;
  int class_id = 0;
  double confidence = 0.0;
  double tau = std::numeric_limits<double>::quiet_NaN();
};

struct AnchorConfig {
  int num_classes = 1;  // C
  int num_anchors = 5;  // A
};

/// Intersection area over union area; 0 for disjoint boxes, symmetric.
double iou(const BoundingBox& a, const BoundingBox& b);

/// Moves each side outward by margin times the box dimension on that axis,
/// then clamps to [0, image_w] x [0, image_h].
BoundingBox expand_margin(const BoundingBox& box, double margin, double image_w, double image_h);

/// Drops detections whose tau exceeds theta_bound, then returns the highest
/// confidence survivor (ties: lower tau, then smaller class_id, then leftmost).
std::optional<Detection> select_best_plate(std::span<const Detection> detections,
                                           double theta_bound);

/// Detection-head filter count (C + 5) * A.
int filter_count(const AnchorConfig& config);

/// Pixel-exact sub-image of the box after clamping and rounding each
/// coordinate half away from zero; [x0, x1) x [y0, y1) in integer pixels.
Image crop(const Image& image, const BoundingBox& box);

/// Per-image detection record, mirrors the JSON file schema.
struct DetectionRecord {
  std::string image_id;
  int width = 0;
  int height = 0;
  std::vector<Detection> detections;
};

// JSON schema: {image_id, width, height,
//   detections: [{class, x_min, y_min, x_max, y_max, confidence}]}
DetectionRecord load_detection_record(const std::string& path);
void save_detection_record(const DetectionRecord& record, const std::string& path);

/// Source of detections per image; lets a neural detector plug in later.
class DetectorSource {
 public:
  virtual ~DetectorSource() = default;
  virtual DetectionRecord detections_for(const std::string& image_id) = 0;
};

/// Reads <dir>/<image_id>.json detection records.
class FileDetectorSource : public DetectorSource {
 public:
  explicit FileDetectorSource(std::string dir) : dir_(std::move(dir)) {}
  DetectionRecord detections_for(const std::string& image_id) override;

 private:
  std::string dir_;
};

}  // namespace plateflow
