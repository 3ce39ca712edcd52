#include "plateflow/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "plateflow/errors.hpp"
#include "plateflow/text.hpp"

namespace plateflow {

namespace {

void check_range(bool ok, const std::string& what) {
  if (!ok) throw ConfigError("transform parameter out of range: " + what);
}

}  // namespace

TransformSpec TransformSpec::identity() { return {TransformKind::kIdentity, 0.0}; }

TransformSpec TransformSpec::rotate(double angle_deg) {
  check_range(std::isfinite(angle_deg) && std::abs(angle_deg) <= 30.0,
              "rotate " + format_double(angle_deg) + " deg (bound +-30)");
  return {TransformKind::kRotate, angle_deg};
}

TransformSpec TransformSpec::crop(double margin_frac) {
  check_range(std::isfinite(margin_frac) && margin_frac >= 0.0 && margin_frac <= 0.3,
              "crop margin " + format_double(margin_frac) + " (bound [0, 0.3])");
  return {TransformKind::kCrop, margin_frac};
}

TransformSpec TransformSpec::brightness(double delta) {
  check_range(std::isfinite(delta) && std::abs(delta) <= 0.25,
              "brightness " + format_double(delta) + " (bound +-0.25)");
  return {TransformKind::kBrightness, delta};
}

TransformSpec TransformSpec::contrast(double gamma) {
  check_range(std::isfinite(gamma) && gamma >= 0.75 && gamma <= 1.33,
              "contrast " + format_double(gamma) + " (bound [0.75, 1.33])");
  return {TransformKind::kContrast, gamma};
}

std::string TransformSpec::to_string() const {
  switch (kind) {
    case TransformKind::kIdentity: return "identity";
    case TransformKind::kRotate: return "rotate:" + format_double(value);
    case TransformKind::kCrop: return "crop:" + format_double(value);
    case TransformKind::kBrightness: return "brightness:" + format_double(value);
    case TransformKind::kContrast: return "contrast:" + format_double(value);
  }
  return "identity";
}

TransformSpec TransformSpec::parse(const std::string& text) {
  const auto t = trim(text);
  if (t == "identity") return identity();
  const auto colon = t.find(':');
  if (colon == std::string::npos) throw ConfigError("bad transform spec: '" + text + "'");
  const std::string name = t.substr(0, colon);
  const double v = parse_double(trim(t.substr(colon + 1)), "transform " + name);
  if (name == "rotate") return rotate(v);
  if (name == "crop") return crop(v);
  if (name == "brightness") return brightness(v);
  if (name == "contrast") return contrast(v);
  throw ConfigError("unknown transform kind: '" + name + "'");
}

std::vector<TransformSpec> default_transforms() {
  return {TransformSpec::identity(),      TransformSpec::rotate(10.0),
          TransformSpec::rotate(-10.0),   TransformSpec::rotate(20.0),
          TransformSpec::rotate(-20.0),   TransformSpec::crop(0.05),
          TransformSpec::crop(0.10),      TransformSpec::brightness(0.1),
          TransformSpec::brightness(-0.1), TransformSpec::contrast(0.8),
          TransformSpec::contrast(1.25)};
}

std::vector<TransformSpec> parse_transforms(const std::string& text) {
  std::vector<TransformSpec> out;
  for (const auto& part : split(text, ';')) {
    if (trim(part).empty()) continue;
    out.push_back(TransformSpec::parse(part));
  }
  if (out.empty()) throw ConfigError("empty transform list");
  return out;
}

std::string transforms_to_string(std::span<const TransformSpec> transforms) {
  std::string out;
  for (const auto& t : transforms) {
    if (!out.empty()) out += ';';
    out += t.to_string();
  }
  return out;
}

Image apply_transform(const Image& patch, const TransformSpec& t) {
  if (patch.empty()) throw DataError("apply_transform: empty patch");
  switch (t.kind) {
    case TransformKind::kIdentity:
      return patch;
    case TransformKind::kRotate:
      return rotate_about_center(patch, t.value);
    case TransformKind::kCrop: {
      const int mx = static_cast<int>(std::lround(t.value * patch.width()));
      const int my = static_cast<int>(std::lround(t.value * patch.height()));
      const int w = patch.width() - 2 * mx;
      const int h = patch.height() - 2 * my;
      if (w < 4 || h < 4)
        throw DataError("crop transform leaves a patch smaller than 4px");
      Image inner(w, h);
      for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) inner.at(r, c) = patch.at(r + my, c + mx);
      return resize_bilinear(inner, patch.width(), patch.height());
    }
    case TransformKind::kBrightness: {
      Image out = patch;
      for (auto& p : out.pixels())
        p = std::clamp(p + static_cast<float>(t.value), 0.0f, 1.0f);
      return out;
    }
    case TransformKind::kContrast: {
      Image out = patch;
      for (auto& p : out.pixels())
        p = std::clamp(0.5f + static_cast<float>(t.value) * (p - 0.5f), 0.0f, 1.0f);
      return out;
    }
  }
  throw ConfigError("unhandled transform kind");
}

ScoreReport tau_score(const FlowModel& model, const FeatureExtractor& extractor,
                      const Image& patch, std::span<const TransformSpec> transforms) {
  if (transforms.empty()) throw ConfigError("tau_score: empty transform set");
  ScoreReport report;
  std::string last_error;
  for (const auto& t : transforms) {
    try {
      const Image transformed = apply_transform(patch, t);
      report.per_transform_nll.push_back(-model.log_prob(extractor.extract(transformed)));
    } catch (const std::exception& e) {
      ++report.failed_transforms;
      last_error = e.what();
    }
  }
  if (report.per_transform_nll.empty())
    throw DataError("tau_score: every transform failed; last error: " + last_error);

  // Sum in sorted order so tau is exactly permutation-invariant.
  std::vector<double> sorted = report.per_transform_nll;
  std::sort(sorted.begin(), sorted.end());
  double sum = 0.0;
  for (double v : sorted) sum += v;
  report.tau = sum / static_cast<double>(sorted.size());
  return report;
}

bool classify(const ScoreReport& report, double theta) {
  if (!std::isfinite(theta)) throw ConfigError("classify: theta must be finite");
  return report.tau <= theta;
}

ScoreReport TauStandardizer::apply(const ScoreReport& report) const {
  ScoreReport out = report;
  for (auto& v : out.per_transform_nll) v = (v - mean) / stddev;
  out.tau = (report.tau - mean) / stddev;
  return out;
}

TauStandardizer TauStandardizer::fit(std::span<const double> training_taus) {
  if (training_taus.empty()) throw DataError("TauStandardizer: no training scores");
  double mean = 0.0;
  for (double v : training_taus) mean += v;
  mean /= static_cast<double>(training_taus.size());
  double var = 0.0;
  for (double v : training_taus) var += (v - mean) * (v - mean);
  var /= static_cast<double>(training_taus.size());
  TauStandardizer s;
  s.mean = mean;
  s.stddev = var > 1e-24 ? std::sqrt(var) : 1.0;
  return s;
}

ThresholdCalibration calibrate_threshold(std::span<const double> scores_pos,
                                         const std::function<double(double)>& objective,
                                         std::span<const double> grid) {
  if (grid.empty()) throw ConfigError("calibrate_threshold: empty grid");
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (!(grid[i] > grid[i - 1]))
      throw ConfigError("calibrate_threshold: grid must be strictly ascending");
  }

  ThresholdCalibration result;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double theta = grid[i];
    CalibrationPoint point;
    point.theta = theta;
    try {
      point.objective = objective(theta);
      if (!std::isfinite(point.objective)) throw NumericError("objective returned non-finite");
    } catch (const std::exception& e) {
      throw CalibrationError(
          "calibration objective failed at theta=" + format_double(theta) + ": " + e.what(),
          std::move(result.curve));
    }
    for (double s : scores_pos) (s <= theta ? point.n_accepted : point.n_rejected)++;
    result.curve.push_back(point);
    // Strict comparison keeps the smallest theta among ties.
    if (i == 0 || point.objective < result.curve[result.chosen_index].objective) {
      result.chosen_index = i;
    }
  }
  result.chosen_theta = result.curve[result.chosen_index].theta;
  return result;
}

void write_calibration_csv(const ThresholdCalibration& calibration, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write calibration curve: " + path);
  out << "theta,objective,n_accepted,n_rejected\n";
  for (const auto& p : calibration.curve) {
    out << format_double(p.theta) << ',' << format_double(p.objective) << ',' << p.n_accepted
        << ',' << p.n_rejected << '\n';
  }
}

double roc_auc(std::span<const double> pos, std::span<const double> neg) {
  if (pos.empty() || neg.empty()) throw DataError("roc_auc: empty population");
  std::vector<double> thresholds;
  thresholds.reserve(pos.size() + neg.size());
  thresholds.insert(thresholds.end(), pos.begin(), pos.end());
  thresholds.insert(thresholds.end(), neg.begin(), neg.end());
  std::sort(thresholds.begin(), thresholds.end());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

  double auc = 0.0;
  double prev_fpr = 0.0;
  double prev_tpr = 0.0;
  for (double theta : thresholds) {
    const auto tp = std::count_if(pos.begin(), pos.end(), [&](double s) { return s <= theta; });
    const auto fp = std::count_if(neg.begin(), neg.end(), [&](double s) { return s <= theta; });
    const double tpr = static_cast<double>(tp) / static_cast<double>(pos.size());
    const double fpr = static_cast<double>(fp) / static_cast<double>(neg.size());
    auc += 0.5 * (tpr + prev_tpr) * (fpr - prev_fpr);
    prev_fpr = fpr;
    prev_tpr = tpr;
  }
  auc += 0.5 * (1.0 + prev_tpr) * (1.0 - prev_fpr);
  return auc;
}

}  // namespace plateflow
