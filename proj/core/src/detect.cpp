#include "plateflow/detect.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cassert>
#include <cmath>
#include <fstream>

#include "plateflow/errors.hpp"

namespace plateflow {

double iou(const BoundingBox& a, const BoundingBox& b) {
  if (!a.valid() || !b.valid()) throw DataError("iou: degenerate box");
  const double ix = std::max(0.0, std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min));
  const double iy = std::max(0.0, std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min));
  const double inter = ix * iy;
  if (inter <= 0.0) return 0.0;
  return inter / (a.area() + b.area() - inter);
}

BoundingBox expand_margin(const BoundingBox& box, double margin, double image_w, double image_h) {
  if (margin < 0.0) throw ConfigError("expand_margin: negative margin");
  if (!box.valid()) throw DataError("expand_margin: degenerate box");
  const double dx = margin * box.width();
  const double dy = margin * box.height();
  BoundingBox out{std::clamp(box.x_min - dx, 0.0, image_w),
                  std::clamp(box.y_min - dy, 0.0, image_h),
                  std::clamp(box.x_max + dx, 0.0, image_w),
                  std::clamp(box.y_max + dy, 0.0, image_h)};
  assert(out.valid());
  return out;
}

std::optional<Detection> select_best_plate(std::span<const Detection> detections,
                                           double theta_bound) {
  const Detection* best = nullptr;
  for (const auto& d : detections) {
    if (std::isnan(d.tau)) throw DataError("select_best_plate: detection without tau");
    if (d.tau > theta_bound) continue;  // flow veto
    if (best == nullptr) {
      best = &d;
      continue;
    }
    const auto key = [](const Detection& x) {
      return std::make_tuple(-x.confidence, x.tau, x.class_id, x.box.x_min);
    };
    if (key(d) < key(*best)) best = &d;
  }
  if (best == nullptr) return std::nullopt;
  return *best;
}

int filter_count(const AnchorConfig& config) {
  if (config.num_classes < 1 || config.num_anchors < 1)
    throw ConfigError("filter_count: C and A must be >= 1");
  return (config.num_classes + 5) * config.num_anchors;
}

namespace {

int round_half_away(double v) {
  return static_cast<int>(v < 0.0 ? std::ceil(v - 0.5) : std::floor(v + 0.5));
}

}  // namespace

Image crop(const Image& image, const BoundingBox& box) {
  if (!box.valid()) throw DataError("crop: degenerate box");
  int x0 = std::max(0, round_half_away(box.x_min));
  int y0 = std::max(0, round_half_away(box.y_min));
  int x1 = std::min(image.width(), round_half_away(box.x_max));
  int y1 = std::min(image.height(), round_half_away(box.y_max));
  if (x0 >= x1 || y0 >= y1) throw DataError("crop: box does not intersect the image");
  Image out(x1 - x0, y1 - y0);
  for (int r = y0; r < y1; ++r)
    for (int c = x0; c < x1; ++c) out.at(r - y0, c - x0) = image.at(r, c);
  return out;
}

DetectionRecord load_detection_record(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open detection record: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed detection JSON " + path + ": " + e.what());
  }
  DetectionRecord rec;
  try {
    rec.image_id = j.at("image_id").get<std::string>();
    rec.width = j.at("width").get<int>();
    rec.height = j.at("height").get<int>();
    for (const auto& d : j.at("detections")) {
      Detection det;
      det.label = d.at("class").get<std::string>();
      det.box = {d.at("x_min").get<double>(), d.at("y_min").get<double>(),
                 d.at("x_max").get<double>(), d.at("y_max").get<double>()};
      det.confidence = d.at("confidence").get<double>();
      if (det.confidence < 0.0 || det.confidence > 1.0)
        throw DataError("confidence outside [0,1] in " + path);
      if (!det.box.valid()) throw DataError("degenerate box in " + path);
      rec.detections.push_back(std::move(det));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError("bad detection record " + path + ": " + e.what());
  }
  return rec;
}

void save_detection_record(const DetectionRecord& record, const std::string& path) {
  nlohmann::ordered_json j;
  j["image_id"] = record.image_id;
  j["width"] = record.width;
  j["height"] = record.height;
  j["detections"] = nlohmann::ordered_json::array();
  for (const auto& d : record.detections) {
    nlohmann::ordered_json e;
    e["class"] = d.label;
    e["x_min"] = d.box.x_min;
    e["y_min"] = d.box.y_min;
    e["x_max"] = d.box.x_max;
    e["y_max"] = d.box.y_max;
    e["confidence"] = d.confidence;
    j["detections"].push_back(std::move(e));
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write detection record: " + path);
  out << j.dump(2) << '\n';
}

DetectionRecord FileDetectorSource::detections_for(const std::string& image_id) {
  return load_detection_record(dir_ + "/" + image_id + ".json");
}

}  // namespace plateflow
