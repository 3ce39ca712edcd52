#include "plateflow/plate.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <tuple>

#include "plateflow/errors.hpp"
#include "plateflow/text.hpp"

namespace plateflow {

std::string to_string(PlateLayout layout) {
  switch (layout) {
    case PlateLayout::kNew: return "new";
    case PlateLayout::kOld: return "old";
    case PlateLayout::kNumericOnly: return "numeric_only";
  }
  return "numeric_only";
}

PlateLayout plate_layout_from_string(const std::string& s) {
  if (s == "new") return PlateLayout::kNew;
  if (s == "old") return PlateLayout::kOld;
  if (s == "numeric_only") return PlateLayout::kNumericOnly;
  throw ConfigError("unknown plate layout: '" + s + "'");
}

namespace {

std::string join(const std::vector<std::string>& labels) {
  std::string out;
  for (const auto& l : labels) out += l;
  return out;
}

double x_center(const CharDetection& c) { return 0.5 * (c.box.x_min + c.box.x_max); }
double y_center(const CharDetection& c) { return 0.5 * (c.box.y_min + c.box.y_max); }

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Total order inside a row: x-center, then y-center, then confidence, with
// the class index as a last resort so sorting never depends on input order.
bool reading_less(const CharDetection& a, const CharDetection& b) {
  return std::make_tuple(x_center(a), y_center(a), a.confidence, a.class_index) <
         std::make_tuple(x_center(b), y_center(b), b.confidence, b.class_index);
}

// Splits one row into runs separated by horizontal gaps wider than the
// threshold. Input must already be in reading order.
std::vector<std::vector<const CharDetection*>> gap_groups(
    const std::vector<const CharDetection*>& row, double gap_threshold) {
  std::vector<std::vector<const CharDetection*>> groups;
  for (const auto* c : row) {
    if (!groups.empty() && c->box.x_min - groups.back().back()->box.x_max <= gap_threshold) {
      groups.back().push_back(c);
    } else {
      groups.push_back({c});
    }
  }
  return groups;
}

}  // namespace

std::string PlateString::vehicle_number() const { return join(vehicle_labels); }
std::string PlateString::province_number() const { return join(province_labels); }

std::string PlateString::text() const {
  if (layout == PlateLayout::kNumericOnly) return vehicle_number();
  return vehicle_number() + series_char + province_number();
}

AssembleResult assemble_plate(std::span<const CharDetection> chars,
                              const AssembleOptions& options) {
  if (chars.empty()) throw DataError("assemble_plate: no characters");

  std::vector<double> heights, widths;
  for (const auto& c : chars) {
    heights.push_back(c.box.height());
    widths.push_back(c.box.width());
  }
  const double row_gap = options.row_gap_factor * median_of(heights);
  const double group_gap = options.group_gap_factor * median_of(widths);

  // Cluster rows on sorted vertical centers.
  std::vector<const CharDetection*> by_y;
  for (const auto& c : chars) by_y.push_back(&c);
  std::sort(by_y.begin(), by_y.end(), [](const CharDetection* a, const CharDetection* b) {
    return std::make_tuple(y_center(*a), x_center(*a), a->confidence, a->class_index) <
           std::make_tuple(y_center(*b), x_center(*b), b->confidence, b->class_index);
  });
  std::vector<std::vector<const CharDetection*>> rows;
  for (const auto* c : by_y) {
    if (rows.empty() || y_center(*c) - y_center(*rows.back().back()) > row_gap) {
      rows.push_back({c});
    } else {
      rows.back().push_back(c);
    }
  }
  for (auto& row : rows)
    std::sort(row.begin(), row.end(),
              [](const CharDetection* a, const CharDetection* b) { return reading_less(*a, *b); });

  std::vector<const CharDetection*> reading;
  for (const auto& row : rows) reading.insert(reading.end(), row.begin(), row.end());

  // At most one letter class may survive; extras go to the reject list.
  AssembleResult result;
  std::vector<std::size_t> letter_pos;
  for (std::size_t i = 0; i < reading.size(); ++i)
    if (is_letter_class(reading[i]->label)) letter_pos.push_back(i);
  if (letter_pos.size() > 1) {
    std::size_t keep = letter_pos[0];
    for (std::size_t p : letter_pos)
      if (reading[p]->confidence > reading[keep]->confidence) keep = p;
    std::vector<const CharDetection*> filtered;
    for (std::size_t i = 0; i < reading.size(); ++i) {
      if (is_letter_class(reading[i]->label) && i != keep) {
        result.rejected.push_back(*reading[i]);
      } else {
        filtered.push_back(reading[i]);
      }
    }
    reading = std::move(filtered);
  }

  for (const auto* c : reading) result.ordered.push_back(*c);

  PlateString& plate = result.plate;
  std::size_t series_at = reading.size();
  for (std::size_t i = 0; i < reading.size(); ++i) {
    if (is_letter_class(reading[i]->label)) {
      series_at = i;
      break;
    }
  }

  if (series_at < reading.size()) {
    plate.series_char = reading[series_at]->label;
    if (series_at == 0) {
      // Legacy order: letter first, then the province group, then the vehicle.
      plate.layout = PlateLayout::kOld;
      std::vector<const CharDetection*> digits(reading.begin() + 1, reading.end());
      const auto groups = gap_groups(digits, group_gap);
      if (groups.size() >= 2) {
        for (const auto* c : groups[0]) plate.province_labels.push_back(c->label);
        for (std::size_t g = 1; g < groups.size(); ++g)
          for (const auto* c : groups[g]) plate.vehicle_labels.push_back(c->label);
      } else if (!digits.empty()) {
        // No separating gap to go by: take a single leading province digit.
        plate.province_labels.push_back(digits[0]->label);
        for (std::size_t i = 1; i < digits.size(); ++i)
          plate.vehicle_labels.push_back(digits[i]->label);
      }
    } else {
      plate.layout = PlateLayout::kNew;
      for (std::size_t i = 0; i < series_at; ++i)
        plate.vehicle_labels.push_back(reading[i]->label);
      for (std::size_t i = series_at + 1; i < reading.size(); ++i)
        plate.province_labels.push_back(reading[i]->label);
    }
    return result;
  }

  // No letter class. A single row with three gap-separated groups and a lone
  // middle character still has a recognizable series slot.
  if (options.infer_series_from_gaps && rows.size() == 1) {
    const auto groups = gap_groups(reading, group_gap);
    if (groups.size() == 3 && groups[1].size() == 1) {
      plate.layout = PlateLayout::kNew;
      plate.series_char = groups[1][0]->label;
      for (const auto* c : groups[0]) plate.vehicle_labels.push_back(c->label);
      for (const auto* c : groups[2]) plate.province_labels.push_back(c->label);
      return result;
    }
  }

  plate.layout = PlateLayout::kNumericOnly;
  for (const auto* c : reading) plate.vehicle_labels.push_back(c->label);
  return result;
}

SwapTable SwapTable::defaults() {
  SwapTable t;
  t.digit_slot = {{"a", "1"}, {"b", "6"}, {"d", "0"}};
  t.series_slot = {{"1", "a"}};
  return t;
}

SwapTable SwapTable::parse(const std::string& digit_spec, const std::string& series_spec) {
  auto parse_map = [](const std::string& spec, const std::string& what) {
    std::map<std::string, std::string> out;
    for (const auto& entry : split(spec, ',')) {
      const auto e = trim(entry);
      if (e.empty()) continue;
      const auto colon = e.find(':');
      if (colon == std::string::npos || colon == 0 || colon + 1 == e.size())
        throw ConfigError("bad " + what + " swap entry: '" + entry + "'");
      out[e.substr(0, colon)] = e.substr(colon + 1);
    }
    return out;
  };
  SwapTable t;
  t.digit_slot = parse_map(digit_spec, "digit-slot");
  t.series_slot = parse_map(series_spec, "series-slot");
  return t;
}

PlateString confusion_swap(const PlateString& plate, const SwapTable& table) {
  if (plate.layout == PlateLayout::kNumericOnly) return plate;  // no letter slots
  PlateString out = plate;
  for (auto* slot : {&out.vehicle_labels, &out.province_labels}) {
    for (auto& label : *slot) {
      const auto it = table.digit_slot.find(label);
      if (it != table.digit_slot.end()) label = it->second;
    }
  }
  if (!is_letter_class(out.series_char)) {
    const auto it = table.series_slot.find(out.series_char);
    if (it != table.series_slot.end()) out.series_char = it->second;
  }
  return out;
}

ClassifiedChar classify_char(const Image& patch, const CharClassifyContext& context,
                             const BoundingBox& box, double detector_confidence) {
  if (!context.classifier || !context.flow || !context.extractor)
    throw ConfigError("classify_char: incomplete context");

  const FeatureVector features = context.extractor->extract(patch);
  const Eigen::VectorXd probs = context.classifier->probabilities(features);
  Eigen::Index best = 0;
  const double peak = probs.maxCoeff(&best);

  ScoreReport report = tau_score(*context.flow, *context.extractor, patch, context.transforms);
  if (context.standardizer != nullptr) report = context.standardizer->apply(report);

  ClassifiedChar out;
  out.detection.class_index = static_cast<int>(best);
  out.detection.label = char_class_labels()[static_cast<std::size_t>(best)];
  out.detection.box = box;
  out.detection.confidence = detector_confidence * peak;
  out.detection.tau = report.tau;
  out.detection.softmax = probs;
  out.accepted = classify(report, context.theta);
  return out;
}

}  // namespace plateflow
