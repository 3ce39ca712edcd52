#include "plateflow/pipeline.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>

#include "plateflow/errors.hpp"
#include "plateflow/labels.hpp"
#include "plateflow/text.hpp"

namespace plateflow {

namespace fs = std::filesystem;

namespace {

void require_seed(const RunConfig& config) {
  if (!config.seed_set) throw ConfigError("seed is mandatory; pass --seed or set it in the config");
}

void require_dir(const std::string& path, const std::string& what) {
  if (path.empty()) throw ConfigError(what + " not set");
  if (!fs::is_directory(path)) throw DataError(what + " does not exist: " + path);
}

void ensure_dir(const std::string& path) {
  std::error_code ec;
  fs::create_directories(path, ec);
  if (!fs::is_directory(path)) throw DataError("cannot create directory: " + path);
}

FeatureExtractorConfig make_extractor_config(const std::string& method, int grid_w, int grid_h,
                                             int bins) {
  FeatureExtractorConfig cfg;
  cfg.method = extractor_method_from_string(method);
  cfg.grid_w = grid_w;
  cfg.grid_h = grid_h;
  cfg.bins = bins;
  return cfg;
}

FitConfig flow_fit_config(const RunConfig& config, std::uint64_t seed) {
  FitConfig fc;
  fc.max_steps = config.train_steps;
  fc.batch_size = config.train_batch;
  fc.lr_schedule = config.train_lr_schedule;
  fc.seed = seed;
  fc.log_every = config.train_log_every_steps;
  fc.patience = config.train_patience_intervals;
  fc.val_fraction = config.train_val_frac;
  return fc;
}

Image crop_and_normalize(const Image& scene, const BoundingBox& box, double margin, int patch_w,
                         int patch_h) {
  const BoundingBox expanded =
      expand_margin(box, margin, static_cast<double>(scene.width()),
                    static_cast<double>(scene.height()));
  return resize_bilinear(crop(scene, expanded), patch_w, patch_h);
}

void write_fit_trace_csv(const FitResult& fit, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write loss trace: " + path);
  out << (fit.val_trace.empty() ? "step,loss\n" : "step,loss,val_loss\n");
  for (std::size_t i = 0; i < fit.trace_steps.size(); ++i) {
    out << fit.trace_steps[i] << ',' << format_double(fit.loss_trace[i]);
    if (!fit.val_trace.empty()) out << ',' << format_double(fit.val_trace[i]);
    out << '\n';
  }
}

void write_classifier_trace_csv(const ClassifierFitResult& fit, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write loss trace: " + path);
  out << "step,loss\n";
  for (std::size_t i = 0; i < fit.trace_steps.size(); ++i)
    out << fit.trace_steps[i] << ',' << format_double(fit.loss_trace[i]) << '\n';
}

nlohmann::ordered_json extractor_to_json(const FeatureExtractorConfig& cfg) {
  return {{"method", to_string(cfg.method)},
          {"grid_w", cfg.grid_w},
          {"grid_h", cfg.grid_h},
          {"bins", cfg.bins}};
}

FeatureExtractorConfig extractor_from_json(const nlohmann::json& j) {
  FeatureExtractorConfig cfg;
  cfg.method = extractor_method_from_string(j.at("method").get<std::string>());
  cfg.grid_w = j.at("grid_w").get<int>();
  cfg.grid_h = j.at("grid_h").get<int>();
  cfg.bins = j.at("bins").get<int>();
  return cfg;
}

std::string iso_timestamp_utc() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::tm tm_utc;
  gmtime_r(&t, &tm_utc);
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  return buf;
}

/// Per-image intermediate state: taus are computed once, thresholds applied
/// afterwards (the calibration sweep re-applies them cheaply).
struct StagedImage {
  std::string image_id;
  std::optional<Detection> best_plate;
  std::string no_plate_reason;
  std::vector<ClassifiedChar> chars;  // accepted flag filled per theta later
};

StagedImage stage_image(const PipelineModel& model, const Image& scene,
                        const DetectionRecord& detections, const RunConfig& config,
                        double theta_plate) {
  StagedImage staged;
  staged.image_id = detections.image_id;

  const FeatureExtractor ex_plate(model.extractor_plate);
  const FeatureExtractor ex_char(model.extractor_char);

  std::vector<Detection> plate_cands;
  for (const auto& det : detections.detections) {
    if (det.label != "plate") continue;
    Detection cand = det;
    try {
      const Image patch = crop_and_normalize(scene, det.box, model.margin_plate,
                                             model.plate_patch_w, model.plate_patch_h);
      ScoreReport report = tau_score(model.nf_plate, ex_plate, patch, model.transforms);
      if (model.standardized) report = model.std_plate.apply(report);
      cand.tau = report.tau;
    } catch (const std::exception&) {
      cand.tau = std::numeric_limits<double>::infinity();  // unusable box: veto
    }
    plate_cands.push_back(std::move(cand));
  }

  if (plate_cands.empty()) {
    staged.no_plate_reason = "no_plate_detections";
    return staged;
  }
  staged.best_plate = select_best_plate(plate_cands, theta_plate);
  if (!staged.best_plate.has_value()) {
    staged.no_plate_reason = "all_plates_rejected_by_flow";
    return staged;
  }

  const BoundingBox plate_region =
      expand_margin(staged.best_plate->box, model.margin_plate,
                    static_cast<double>(scene.width()), static_cast<double>(scene.height()));

  CharClassifyContext ctx;
  ctx.classifier = &model.classifier;
  ctx.flow = &model.nf_char;
  ctx.extractor = &ex_char;
  ctx.transforms = model.transforms;
  ctx.standardizer = model.standardized ? &model.std_char : nullptr;
  ctx.theta = 0.0;  // acceptance re-evaluated against theta_char downstream

  for (const auto& det : detections.detections) {
    if (!is_char_class(det.label)) continue;
    const double cx = 0.5 * (det.box.x_min + det.box.x_max);
    const double cy = 0.5 * (det.box.y_min + det.box.y_max);
    if (cx < plate_region.x_min || cx > plate_region.x_max || cy < plate_region.y_min ||
        cy > plate_region.y_max)
      continue;
    try {
      const Image patch = crop_and_normalize(scene, det.box, model.margin_char,
                                             model.char_patch_w, model.char_patch_h);
      staged.chars.push_back(classify_char(patch, ctx, det.box, det.confidence));
    } catch (const std::exception&) {
      // Unusable character crop; skip it rather than fail the image.
    }
  }
  return staged;
}

PlateRecord finalize_record(const StagedImage& staged, const RunConfig& config,
                            double theta_char) {
  PlateRecord record;
  record.image_id = staged.image_id;
  if (!staged.best_plate.has_value()) {
    record.reason = staged.no_plate_reason;
    return record;
  }
  record.plate_tau = staged.best_plate->tau;
  record.plate_confidence = staged.best_plate->confidence;

  std::vector<CharDetection> accepted;
  for (const auto& c : staged.chars)
    if (c.detection.tau <= theta_char) accepted.push_back(c.detection);
  if (accepted.empty()) {
    record.reason = "no_characters_accepted";
    return record;
  }

  AssembleOptions opts;
  opts.row_gap_factor = config.assemble_row_gap_factor;
  opts.group_gap_factor = config.assemble_group_gap_factor;
  opts.infer_series_from_gaps = config.assemble_infer_series;
  AssembleResult assembled = assemble_plate(accepted, opts);

  const SwapTable table = SwapTable::parse(config.swap_digit_slot, config.swap_series_slot);
  record.plate = confusion_swap(assembled.plate, table);
  record.per_char = std::move(assembled.ordered);
  record.has_plate = true;
  return record;
}

struct LoadedDataset {
  std::string dir;
  std::vector<ManifestEntry> entries;  // sorted by image_id
};

LoadedDataset load_dataset(const std::string& data_dir) {
  require_dir(data_dir, "data_dir");
  LoadedDataset ds;
  ds.dir = data_dir;
  ds.entries = load_manifest(data_dir + "/manifest.jsonl");
  std::sort(ds.entries.begin(), ds.entries.end(),
            [](const ManifestEntry& a, const ManifestEntry& b) { return a.image_id < b.image_id; });
  return ds;
}

SplitIndices split_entries(const LoadedDataset& ds, const RunConfig& config) {
  std::vector<std::string> strata(ds.entries.size());
  for (std::size_t i = 0; i < ds.entries.size(); ++i) strata[i] = ds.entries[i].stratum;
  SplitFractions fr{config.split_train_frac, config.split_test_frac, config.split_val_frac};
  return split_indices(strata, config.seed, fr);
}

}  // namespace

void save_pipeline_model(const PipelineModel& model, const std::string& dir) {
  ensure_dir(dir);
  model.nf_plate.save(dir + "/nf_plate.pfnf");
  model.nf_char.save(dir + "/nf_char.pfnf");
  model.classifier.save(dir + "/classifier.json");
  save_label_map(dir + "/label_map.txt");

  nlohmann::ordered_json j;
  j["version"] = 1;
  j["standardized"] = model.standardized;
  j["transforms"] = transforms_to_string(model.transforms);
  j["extractor_plate"] = extractor_to_json(model.extractor_plate);
  j["extractor_char"] = extractor_to_json(model.extractor_char);
  j["std_plate"] = {{"mean", model.std_plate.mean}, {"stddev", model.std_plate.stddev}};
  j["std_char"] = {{"mean", model.std_char.mean}, {"stddev", model.std_char.stddev}};
  j["plate_patch_w_px"] = model.plate_patch_w;
  j["plate_patch_h_px"] = model.plate_patch_h;
  j["char_patch_w_px"] = model.char_patch_w;
  j["char_patch_h_px"] = model.char_patch_h;
  j["margin_plate_frac"] = model.margin_plate;
  j["margin_char_frac"] = model.margin_char;
  std::ofstream out(dir + "/pipeline.json", std::ios::binary);
  if (!out) throw DataError("cannot write pipeline meta: " + dir);
  out << j.dump(2) << '\n';
}

PipelineModel load_pipeline_model(const std::string& dir) {
  require_dir(dir, "models_dir");
  PipelineModel model;
  model.nf_plate = FlowModel::load(dir + "/nf_plate.pfnf");
  model.nf_char = FlowModel::load(dir + "/nf_char.pfnf");
  model.classifier = SoftmaxClassifier::load(dir + "/classifier.json");
  load_label_map(dir + "/label_map.txt");

  std::ifstream in(dir + "/pipeline.json", std::ios::binary);
  if (!in) throw DataError("cannot open pipeline meta: " + dir + "/pipeline.json");
  nlohmann::json j;
  try {
    in >> j;
    model.standardized = j.at("standardized").get<bool>();
    model.transforms = parse_transforms(j.at("transforms").get<std::string>());
    model.extractor_plate = extractor_from_json(j.at("extractor_plate"));
    model.extractor_char = extractor_from_json(j.at("extractor_char"));
    model.std_plate = {j.at("std_plate").at("mean").get<double>(),
                       j.at("std_plate").at("stddev").get<double>()};
    model.std_char = {j.at("std_char").at("mean").get<double>(),
                      j.at("std_char").at("stddev").get<double>()};
    model.plate_patch_w = j.at("plate_patch_w_px").get<int>();
    model.plate_patch_h = j.at("plate_patch_h_px").get<int>();
    model.char_patch_w = j.at("char_patch_w_px").get<int>();
    model.char_patch_h = j.at("char_patch_h_px").get<int>();
    model.margin_plate = j.at("margin_plate_frac").get<double>();
    model.margin_char = j.at("margin_char_frac").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed pipeline meta: " + std::string(e.what()));
  }
  return model;
}

void save_plate_record(const PlateRecord& record, const std::string& path) {
  nlohmann::ordered_json j;
  j["image_id"] = record.image_id;
  j["plate_text"] = record.has_plate ? record.plate.text() : "";
  j["layout"] = record.has_plate ? to_string(record.plate.layout) : "none";
  if (record.has_plate) {
    j["components"] = {{"vehicle_number", record.plate.vehicle_number()},
                       {"province_number", record.plate.province_number()},
                       {"series_char", record.plate.series_char}};
  } else {
    j["components"] = nlohmann::ordered_json::object();
  }
  j["per_char"] = nlohmann::ordered_json::array();
  for (const auto& c : record.per_char) {
    j["per_char"].push_back({{"label", c.label}, {"confidence", c.confidence}, {"tau", c.tau}});
  }
  if (!record.has_plate) j["reason"] = record.reason;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write plate record: " + path);
  out << j.dump(2) << '\n';
}

PlateRecord load_plate_record(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open plate record: " + path);
  nlohmann::json j;
  PlateRecord record;
  try {
    in >> j;
    record.image_id = j.at("image_id").get<std::string>();
    const std::string layout = j.at("layout").get<std::string>();
    record.has_plate = layout != "none";
    if (record.has_plate) {
      record.plate.layout = plate_layout_from_string(layout);
      const auto& comp = j.at("components");
      for (char c : comp.at("vehicle_number").get<std::string>())
        record.plate.vehicle_labels.emplace_back(1, c);
      for (char c : comp.at("province_number").get<std::string>())
        record.plate.province_labels.emplace_back(1, c);
      record.plate.series_char = comp.at("series_char").get<std::string>();
    } else {
      record.reason = j.value("reason", "");
    }
    for (const auto& e : j.at("per_char")) {
      CharDetection c;
      c.label = e.at("label").get<std::string>();
      c.confidence = e.at("confidence").get<double>();
      c.tau = e.at("tau").get<double>();
      record.per_char.push_back(std::move(c));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed plate record " + path + ": " + e.what());
  }
  return record;
}

PlateRecord run_single_image(const PipelineModel& model, const Image& scene,
                             const DetectionRecord& detections, const RunConfig& config,
                             double theta_plate, double theta_char) {
  const StagedImage staged = stage_image(model, scene, detections, config, theta_plate);
  return finalize_record(staged, config, theta_char);
}

void cmd_synth(const RunConfig& config) {
  require_seed(config);
  if (config.out_dir.empty()) throw ConfigError("out_dir not set");
  SynthDatasetConfig sc;
  sc.count = config.synth_count;
  sc.seed = config.seed;
  sc.noise_level = config.synth_noise_level;
  sc.rotation_max_deg = config.synth_rotation_max_deg;
  sc.mix_new = config.synth_mix_new_frac;
  sc.mix_numeric = config.synth_mix_numeric_frac;
  sc.mix_old = config.synth_mix_old_frac;
  sc.uniform_layouts = config.synth_uniform_layouts;
  sc.false_plate_rate = config.synth_false_plate_rate;
  const auto entries = generate_dataset(sc, config.out_dir);
  std::cout << "synth: wrote " << entries.size() << " plates to " << config.out_dir << "\n";
}

void cmd_train(const RunConfig& config) {
  require_seed(config);
  const LoadedDataset ds = load_dataset(config.data_dir);
  if (ds.entries.size() < 5) throw DataError("train: dataset too small");
  const SplitIndices split = split_entries(ds, config);
  if (split.train.empty()) throw DataError("train: empty training split");

  const FeatureExtractorConfig ex_plate_cfg =
      make_extractor_config(config.extractor_plate_method, config.extractor_plate_grid_w,
                            config.extractor_plate_grid_h, config.extractor_bins);
  const FeatureExtractorConfig ex_char_cfg =
      make_extractor_config(config.extractor_char_method, config.extractor_char_grid_w,
                            config.extractor_char_grid_h, config.extractor_bins);
  const FeatureExtractor ex_plate(ex_plate_cfg);
  const FeatureExtractor ex_char(ex_char_cfg);
  const auto transforms = parse_transforms(config.transforms);

  std::vector<Image> plate_patches;
  std::vector<Image> char_patches;
  std::vector<int> char_classes;

  for (int idx : split.train) {
    const auto& entry = ds.entries[static_cast<std::size_t>(idx)];
    const Image scene = load_image(ds.dir + "/" + entry.image_path);
    const AnnotatedImage ann = load_annotation_json(ds.dir + "/" + entry.annotation_json);
    for (const auto& obj : ann.objects) {
      if (obj.label == "plate") {
        plate_patches.push_back(crop_and_normalize(scene, obj.box, config.margin_plate_frac,
                                                   config.plate_patch_w_px,
                                                   config.plate_patch_h_px));
      } else if (is_char_class(obj.label)) {
        char_patches.push_back(crop_and_normalize(scene, obj.box, config.margin_char_frac,
                                                  config.char_patch_w_px,
                                                  config.char_patch_h_px));
        char_classes.push_back(char_class_index(obj.label));
      }
    }
  }
  if (plate_patches.empty() || char_patches.empty())
    throw DataError("train: training split has no plate or character boxes");

  std::set<int> classes_seen(char_classes.begin(), char_classes.end());
  if (static_cast<int>(classes_seen.size()) < kNumCharClasses) {
    std::string missing;
    for (int k = 0; k < kNumCharClasses; ++k) {
      if (!classes_seen.count(k))
        missing += (missing.empty() ? "" : ",") + char_class_labels()[static_cast<std::size_t>(k)];
    }
    throw DataError("train: classes missing from the training split: " + missing +
                    " (increase synth_count or enable synth_uniform_layouts)");
  }

  auto transform_features = [&](const std::vector<Image>& patches, const FeatureExtractor& ex) {
    std::vector<FeatureVector> features;
    features.reserve(patches.size() * transforms.size());
    for (const auto& patch : patches)
      for (const auto& t : transforms) features.push_back(ex.extract(apply_transform(patch, t)));
    return features;
  };

  PipelineModel model;
  model.extractor_plate = ex_plate_cfg;
  model.extractor_char = ex_char_cfg;
  model.transforms = transforms;
  model.standardized = config.score_standardized;
  model.plate_patch_w = config.plate_patch_w_px;
  model.plate_patch_h = config.plate_patch_h_px;
  model.char_patch_w = config.char_patch_w_px;
  model.char_patch_h = config.char_patch_h_px;
  model.margin_plate = config.margin_plate_frac;
  model.margin_char = config.margin_char_frac;

  ensure_dir(config.models_dir);

  {
    const auto features = transform_features(plate_patches, ex_plate);
    model.nf_plate = FlowModel::create(ex_plate.dim(), config.flow_layers, config.flow_hidden,
                                       config.seed + 1, config.flow_scale_clamp);
    const FitResult fit_res = fit(model.nf_plate, features, flow_fit_config(config, config.seed + 1));
    write_fit_trace_csv(fit_res, config.models_dir + "/flow_plate_loss.csv");
    std::cout << "train: NF-A " << fit_res.steps_run << " steps, final loss "
              << fit_res.loss_trace.back() << "\n";
  }
  {
    const auto features = transform_features(char_patches, ex_char);
    model.nf_char = FlowModel::create(ex_char.dim(), config.flow_layers, config.flow_hidden,
                                      config.seed + 2, config.flow_scale_clamp);
    const FitResult fit_res = fit(model.nf_char, features, flow_fit_config(config, config.seed + 2));
    write_fit_trace_csv(fit_res, config.models_dir + "/flow_char_loss.csv");
    std::cout << "train: NF-B " << fit_res.steps_run << " steps, final loss "
              << fit_res.loss_trace.back() << "\n";
  }
  {
    std::vector<LabeledFeature> samples;
    samples.reserve(char_patches.size());
    for (std::size_t i = 0; i < char_patches.size(); ++i)
      samples.push_back({ex_char.extract(char_patches[i]), char_classes[i]});
    model.classifier = SoftmaxClassifier(ex_char.dim(), kNumCharClasses);
    ClassifierFitConfig cc;
    cc.max_steps = config.classifier_steps;
    cc.batch_size = config.classifier_batch;
    cc.lr_schedule = config.classifier_lr_schedule;
    cc.seed = config.seed + 3;
    const ClassifierFitResult cres =
        train_classifier(model.classifier, samples, config.classifier_epsilon, cc);
    write_classifier_trace_csv(cres, config.models_dir + "/classifier_loss.csv");
    std::cout << "train: classifier " << cres.steps_run << " steps, accuracy "
              << classifier_accuracy(model.classifier, samples) << "\n";
  }

  // Standardizers from the training-set tau distributions.
  {
    std::vector<double> taus;
    for (const auto& patch : plate_patches)
      taus.push_back(tau_score(model.nf_plate, ex_plate, patch, transforms).tau);
    model.std_plate = TauStandardizer::fit(taus);
    taus.clear();
    for (const auto& patch : char_patches)
      taus.push_back(tau_score(model.nf_char, ex_char, patch, transforms).tau);
    model.std_char = TauStandardizer::fit(taus);
  }

  save_pipeline_model(model, config.models_dir);

  // Record the split for inspection.
  {
    std::ofstream out(config.models_dir + "/split.csv", std::ios::binary);
    out << "image_id,split\n";
    auto dump = [&](const std::vector<int>& idx, const char* name) {
      for (int i : idx) out << ds.entries[static_cast<std::size_t>(i)].image_id << ',' << name << '\n';
    };
    dump(split.train, "train");
    dump(split.test, "test");
    dump(split.validation, "validation");
  }
  std::cout << "train: models written to " << config.models_dir << "\n";
}

void cmd_calibrate(const RunConfig& config) {
  require_seed(config);
  const LoadedDataset ds = load_dataset(config.data_dir);
  const PipelineModel model = load_pipeline_model(config.models_dir);
  const SplitIndices split = split_entries(ds, config);
  if (split.validation.empty())
    throw ConfigError("calibrate: validation split is empty (check split_val_frac)");

  // Stage every validation image once; the sweep just re-applies thresholds.
  std::vector<StagedImage> staged;
  std::vector<std::string> truths;
  std::vector<double> char_scores;
  for (int idx : split.validation) {
    const auto& entry = ds.entries[static_cast<std::size_t>(idx)];
    const Image scene = load_image(ds.dir + "/" + entry.image_path);
    const DetectionRecord dets = load_detection_record(ds.dir + "/" + entry.detections_path);
    staged.push_back(stage_image(model, scene, dets, config, config.theta_plate_sigma));
    truths.push_back(entry.text);
    for (const auto& c : staged.back().chars) char_scores.push_back(c.detection.tau);
  }

  const auto objective = [&](double theta) {
    std::vector<std::pair<std::string, std::string>> pairs;
    for (std::size_t i = 0; i < staged.size(); ++i) {
      const PlateRecord rec = finalize_record(staged[i], config, theta);
      pairs.emplace_back(rec.has_plate ? rec.plate.text() : "", truths[i]);
    }
    return average_levenshtein(pairs);
  };

  const ThresholdCalibration calibration =
      calibrate_threshold(char_scores, objective, config.theta_grid);

  ensure_dir(config.out_dir);
  write_calibration_csv(calibration, config.out_dir + "/theta_curve.csv");
  nlohmann::ordered_json j;
  j["chosen_theta"] = calibration.chosen_theta;
  j["objective"] = calibration.curve[calibration.chosen_index].objective;
  j["n_grid"] = calibration.curve.size();
  j["n_validation_images"] = staged.size();
  std::ofstream out(config.out_dir + "/calibration.json", std::ios::binary);
  out << j.dump(2) << '\n';
  std::cout << "calibrate: chose theta=" << calibration.chosen_theta << " (objective "
            << calibration.curve[calibration.chosen_index].objective << ")\n";
}

void cmd_run(const RunConfig& config) {
  require_seed(config);
  const LoadedDataset ds = load_dataset(config.data_dir);
  const PipelineModel model = load_pipeline_model(config.models_dir);

  const double theta_char =
      std::isnan(config.theta_override) ? config.theta_char_sigma : config.theta_override;

  ensure_dir(config.out_dir + "/plates");
  long n_with_plate = 0;
  for (const auto& entry : ds.entries) {
    const Image scene = load_image(ds.dir + "/" + entry.image_path);
    const DetectionRecord dets = load_detection_record(ds.dir + "/" + entry.detections_path);
    const PlateRecord record =
        run_single_image(model, scene, dets, config, config.theta_plate_sigma, theta_char);
    save_plate_record(record, config.out_dir + "/plates/" + entry.image_id + ".json");
    n_with_plate += record.has_plate ? 1 : 0;
  }

  nlohmann::ordered_json j;
  j["n_images"] = ds.entries.size();
  j["n_with_plate"] = n_with_plate;
  j["n_empty"] = ds.entries.size() - static_cast<std::size_t>(n_with_plate);
  j["theta_plate_sigma"] = config.theta_plate_sigma;
  j["theta_char_sigma"] = theta_char;
  j["meta"] = {{"timestamp_utc", iso_timestamp_utc()}};
  std::ofstream out(config.out_dir + "/run_summary.json", std::ios::binary);
  out << j.dump(2) << '\n';
  std::cout << "run: " << n_with_plate << "/" << ds.entries.size() << " images with accepted plates"
            << "\n";
}

void cmd_eval(const RunConfig& config) {
  require_seed(config);
  EvalReport report;
  std::vector<std::tuple<std::string, std::string, std::string>> rows;

  if (!config.pairs_csv.empty()) {
    rows = load_pairs_csv(config.pairs_csv);
  } else {
    require_dir(config.pred_dir, "pred_dir");
    const LoadedDataset ds = load_dataset(config.data_dir);
    for (const auto& entry : ds.entries) {
      const std::string pred_path = config.pred_dir + "/" + entry.image_id + ".json";
      if (!fs::exists(pred_path))
        throw DataError("eval: missing prediction record " + pred_path);
      const PlateRecord rec = load_plate_record(pred_path);
      rows.emplace_back(entry.image_id, rec.has_plate ? rec.plate.text() : "", entry.text);
    }

    // Detection-level evaluation when oracle detections and annotations exist.
    std::vector<ImageEvalInput> inputs;
    bool have_all = true;
    for (const auto& entry : ds.entries) {
      const std::string det_path = ds.dir + "/" + entry.detections_path;
      const std::string ann_path = ds.dir + "/" + entry.annotation_json;
      if (!fs::exists(det_path) || !fs::exists(ann_path)) {
        have_all = false;
        break;
      }
      ImageEvalInput input;
      input.detections = load_detection_record(det_path).detections;
      input.ground_truth = load_annotation_json(ann_path).objects;
      inputs.push_back(std::move(input));
    }
    if (have_all && !inputs.empty()) {
      report = evaluate_detections(inputs, config.eval_iou_threshold);
      ensure_dir(config.out_dir);
      for (const auto& cls : report.per_class) {
        const auto points = pr_curve(cls.ranked_is_tp, cls.n_gt);
        std::ofstream pr(config.out_dir + "/pr_" + cls.label + ".csv", std::ios::binary);
        pr << "recall,precision\n";
        for (const auto& p : points)
          pr << format_double(p.recall) << ',' << format_double(p.precision) << '\n';
      }
    }
  }

  if (rows.empty()) throw DataError("eval: nothing to evaluate");
  std::vector<std::pair<std::string, std::string>> pairs;
  for (const auto& [id, pred, target] : rows) pairs.emplace_back(pred, target);
  add_levenshtein_stats(report, pairs);

  ensure_dir(config.out_dir);
  write_pairs_csv(rows, config.out_dir + "/pairs.csv");
  write_eval_report_json(report, config.out_dir + "/eval_report.json");
  write_eval_report_csv(report, config.out_dir + "/eval_report.csv");

  std::cout << "eval: " << report.lev.n_pairs << " pairs, ALD " << report.lev.mean_distance
            << ", exact match " << report.lev.exact_match_rate;
  if (report.has_detection_eval) std::cout << ", mAP " << report.map;
  std::cout << "\n";
}

}  // namespace plateflow
