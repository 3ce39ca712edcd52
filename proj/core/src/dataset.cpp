#include "plateflow/dataset.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "plateflow/errors.hpp"
#include "plateflow/labels.hpp"
#include "plateflow/rng.hpp"

namespace plateflow {

SplitIndices split_indices(std::span<const std::string> strata, std::uint64_t seed,
                           const SplitFractions& fractions) {
  if (fractions.train < 0 || fractions.test < 0 || fractions.validation < 0 ||
      std::abs(fractions.train + fractions.test + fractions.validation - 1.0) > 1e-9)
    throw ConfigError("split fractions must be non-negative and sum to 1");
  if (strata.size() < 5) throw DataError("split_dataset: need at least 5 items");

  std::map<std::string, std::vector<int>> groups;
  for (std::size_t i = 0; i < strata.size(); ++i)
    groups[strata[i]].push_back(static_cast<int>(i));
  if (strata.size() < groups.size())
    throw DataError("split_dataset: fewer items than strata");

  Rng rng(seed);
  SplitIndices out;
  for (auto& [key, idx] : groups) {
    rng.shuffle(idx);
    const auto n = idx.size();
    const auto n_test = static_cast<std::size_t>(std::floor(fractions.test * n));
    const auto n_val = static_cast<std::size_t>(std::floor(fractions.validation * n));
    // Training takes the remainder.
    std::size_t i = 0;
    for (; i < n_test; ++i) out.test.push_back(idx[i]);
    for (; i < n_test + n_val; ++i) out.validation.push_back(idx[i]);
    for (; i < n; ++i) out.train.push_back(idx[i]);
  }
  return out;
}

SplitResult split_dataset(std::vector<AnnotatedImage> items, std::uint64_t seed,
                          const SplitFractions& fractions) {
  std::vector<std::string> strata(items.size());
  for (std::size_t i = 0; i < items.size(); ++i) strata[i] = items[i].stratum;
  const SplitIndices idx = split_indices(strata, seed, fractions);
  SplitResult out;
  for (int i : idx.train) {
    items[static_cast<std::size_t>(i)].split = "train";
    out.train.push_back(items[static_cast<std::size_t>(i)]);
  }
  for (int i : idx.test) {
    items[static_cast<std::size_t>(i)].split = "test";
    out.test.push_back(items[static_cast<std::size_t>(i)]);
  }
  for (int i : idx.validation) {
    items[static_cast<std::size_t>(i)].split = "validation";
    out.validation.push_back(items[static_cast<std::size_t>(i)]);
  }
  return out;
}

void save_manifest(std::span<const ManifestEntry> entries, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write manifest: " + path);
  for (const auto& e : entries) {
    nlohmann::ordered_json j;
    j["image_id"] = e.image_id;
    j["image"] = e.image_path;
    j["annotation_xml"] = e.annotation_xml;
    j["annotation_json"] = e.annotation_json;
    j["detections"] = e.detections_path;
    j["text"] = e.text;
    j["layout"] = to_string(e.layout);
    j["vehicle_number"] = e.vehicle_number;
    j["province_number"] = e.province_number;
    j["series_char"] = e.series_char;
    j["stratum"] = e.stratum;
    out << j.dump() << '\n';
  }
}

std::vector<ManifestEntry> load_manifest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open manifest: " + path);
  std::vector<ManifestEntry> entries;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      ManifestEntry e;
      e.image_id = j.at("image_id").get<std::string>();
      e.image_path = j.at("image").get<std::string>();
      e.annotation_xml = j.value("annotation_xml", "");
      e.annotation_json = j.value("annotation_json", "");
      e.detections_path = j.at("detections").get<std::string>();
      e.text = j.at("text").get<std::string>();
      e.layout = plate_layout_from_string(j.at("layout").get<std::string>());
      e.vehicle_number = j.value("vehicle_number", "");
      e.province_number = j.value("province_number", "");
      e.series_char = j.value("series_char", "");
      e.stratum = j.value("stratum", "");
      entries.push_back(std::move(e));
    } catch (const nlohmann::json::exception& ex) {
      throw DataError("manifest line " + std::to_string(line_no) + " in " + path + ": " +
                      ex.what());
    }
  }
  return entries;
}

std::vector<ManifestEntry> generate_dataset(const SynthDatasetConfig& config,
                                            const std::string& out_dir) {
  if (config.count < 0) throw ConfigError("synth count must be >= 0");
  if (config.mix_new < 0 || config.mix_numeric < 0 || config.mix_old < 0 ||
      std::abs(config.mix_new + config.mix_numeric + config.mix_old - 1.0) > 1e-9)
    throw ConfigError("layout mix fractions must be non-negative and sum to 1");
  if (config.confidence_lo < 0 || config.confidence_hi > 1.0 ||
      config.confidence_lo > config.confidence_hi)
    throw ConfigError("confidence range must lie within [0, 1]");

  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(fs::path(out_dir) / "images", ec);
  fs::create_directories(fs::path(out_dir) / "annotations", ec);
  fs::create_directories(fs::path(out_dir) / "detections", ec);
  if (!fs::is_directory(out_dir)) throw DataError("cannot create dataset dir: " + out_dir);

  static const std::array<std::string, 9> letters = {"a", "b", "d",  "h", "j",
                                                     "m", "p", "waw", "ww"};

  Rng rng(config.seed);
  std::vector<ManifestEntry> entries;
  for (int i = 0; i < config.count; ++i) {
    SyntheticPlateSpec spec;
    if (config.uniform_layouts) {
      const int pick = i % 3;
      spec.layout = pick == 0 ? PlateLayout::kNew
                              : (pick == 1 ? PlateLayout::kNumericOnly : PlateLayout::kOld);
    } else {
      const double u = rng.uniform01();
      spec.layout = u < config.mix_new
                        ? PlateLayout::kNew
                        : (u < config.mix_new + config.mix_numeric ? PlateLayout::kNumericOnly
                                                                   : PlateLayout::kOld);
    }
    spec.vehicle_number = static_cast<int>(
        spec.layout == PlateLayout::kNumericOnly ? rng.uniform_int(1000, 99999)
                                                 : rng.uniform_int(0, 99999));
    spec.province = static_cast<int>(rng.uniform_int(0, 99));
    spec.series_char = letters[static_cast<std::size_t>(rng.uniform_int(0, 8))];
    spec.noise_level = config.noise_level;
    spec.rotation_deg = config.rotation_max_deg > 0
                            ? rng.uniform(-config.rotation_max_deg, config.rotation_max_deg)
                            : 0.0;

    const std::uint64_t plate_seed = rng.next_u64();
    SyntheticPlate plate = synth_plate(spec, plate_seed);

    char id_buf[32];
    std::snprintf(id_buf, sizeof(id_buf), "plate_%06d", i);
    const std::string id(id_buf);

    ManifestEntry e;
    e.image_id = id;
    e.image_path = "images/" + id + ".pgm";
    e.annotation_xml = "annotations/" + id + ".xml";
    e.annotation_json = "annotations/" + id + ".json";
    e.detections_path = "detections/" + id + ".json";
    e.text = plate.truth.text();
    e.layout = plate.truth.layout;
    e.vehicle_number = plate.truth.vehicle_number();
    e.province_number = plate.truth.province_number();
    e.series_char = plate.truth.series_char;
    e.stratum = to_string(plate.truth.layout);

    plate.annotation.image_id = id;
    plate.annotation.path = e.image_path;
    plate.annotation.stratum = e.stratum;

    save_pgm(plate.scene, out_dir + "/" + e.image_path);
    save_voc(plate.annotation, out_dir + "/" + e.annotation_xml);
    save_annotation_json(plate.annotation, out_dir + "/" + e.annotation_json);

    // Oracle detector record: ground-truth boxes with jittered confidences.
    DetectionRecord rec;
    rec.image_id = id;
    rec.width = plate.annotation.width;
    rec.height = plate.annotation.height;
    for (const auto& obj : plate.annotation.objects) {
      Detection det;
      det.label = obj.label;
      det.box = obj.box;
      det.confidence = rng.uniform(config.confidence_lo, config.confidence_hi);
      rec.detections.push_back(std::move(det));
    }
    if (config.false_plate_rate > 0 && rng.uniform01() < config.false_plate_rate) {
      // Background box posing as a confident plate detection.
      const double w = plate.plate_box.width();
      const double h = plate.plate_box.height();
      const double x0 = rng.uniform(0.0, rec.width - w - 1.0);
      double y0 = rng.uniform(0.0, rec.height - h - 1.0);
      if (std::abs(y0 - plate.plate_box.y_min) < h) y0 = std::fmod(y0 + 2 * h, rec.height - h - 1.0);
      Detection det;
      det.label = "plate";
      det.box = {x0, y0, x0 + w, y0 + h};
      det.confidence = rng.uniform(config.confidence_lo, 1.0);
      rec.detections.push_back(std::move(det));
    }
    save_detection_record(rec, out_dir + "/" + e.detections_path);

    entries.push_back(std::move(e));
  }
  save_manifest(entries, out_dir + "/manifest.jsonl");
  return entries;
}

}  // namespace plateflow
