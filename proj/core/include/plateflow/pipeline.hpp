#pragma once

#include <optional>
#include <string>
#include <vector>

#include "plateflow/classifier.hpp"
#include "plateflow/config.hpp"
#include "plateflow/dataset.hpp"
#include "plateflow/detect.hpp"
#include "plateflow/features.hpp"
#include "plateflow/flow.hpp"
#include "plateflow/metrics.hpp"
#include "plateflow/plate.hpp"
#include "plateflow/scoring.hpp"

namespace plateflow {

/// Everything cmd_run needs: the two flows, the classifier, extractor
/// configurations, score standardizers and the transform ensemble.
struct PipelineModel {
  FlowModel nf_plate;
  FlowModel nf_char;
  SoftmaxClassifier classifier;
  FeatureExtractorConfig extractor_plate;
  FeatureExtractorConfig extractor_char;
  TauStandardizer std_plate;
  TauStandardizer std_char;
  std::vector<TransformSpec> transforms;
  bool standardized = true;
  int plate_patch_w = 240, plate_patch_h = 80;
  int char_patch_w = 24, char_patch_h = 40;
  double margin_plate = 0.15, margin_char = 0.20;
};

void save_pipeline_model(const PipelineModel& model, const std::string& dir);
PipelineModel load_pipeline_model(const std::string& dir);

/// Result of running the pipeline on one image.
struct PlateRecord {
  std::string image_id;
  bool has_plate = false;
  std::string reason;  // set when has_plate is false
  PlateString plate;
  std::vector<CharDetection> per_char;  // reading order
  double plate_tau = 0.0;
  double plate_confidence = 0.0;
};

void save_plate_record(const PlateRecord& record, const std::string& path);
PlateRecord load_plate_record(const std::string& path);

/// Runs detection post-processing, flow verification and recognition for one
/// image given its detector output.
PlateRecord run_single_image(const PipelineModel& model, const Image& scene,
                             const DetectionRecord& detections, const RunConfig& config,
                             double theta_plate, double theta_char);

// Subcommand entry points; validate config, do the work, write outputs.
// Used by both the CLI and the acceptance harness.
void cmd_synth(const RunConfig& config);
void cmd_train(const RunConfig& config);
void cmd_calibrate(const RunConfig& config);
void cmd_run(const RunConfig& config);
void cmd_eval(const RunConfig& config);

}  // namespace plateflow
