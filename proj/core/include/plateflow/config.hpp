#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

namespace plateflow {

/// Everything a pipeline command needs, resolved with precedence
/// CLI > config file > defaults. Key names carry explicit units
/// (_frac, _px, _deg, _steps, _sigma).
struct RunConfig {
  std::uint64_t seed = 0;
  bool seed_set = false;  // seed is mandatory; commands reject unset seeds

  std::string data_dir;
  std::string models_dir = "models";
  std::string out_dir = "out";
  std::string pred_dir;        // eval: directory of plate JSON records
  std::string pairs_csv;       // eval: direct pairs input, bypasses pred/truth
  double theta_override = std::numeric_limits<double>::quiet_NaN();  // --theta

  // synth
  int synth_count = 200;
  double synth_noise_level = 0.0;
  double synth_rotation_max_deg = 0.0;
  double synth_mix_new_frac = 0.85;
  double synth_mix_numeric_frac = 0.10;
  double synth_mix_old_frac = 0.05;
  bool synth_uniform_layouts = false;
  double synth_false_plate_rate = 0.0;

  // dataset split
  double split_train_frac = 0.4;
  double split_test_frac = 0.4;
  double split_val_frac = 0.2;

  // crop margins and patch normalization
  double margin_plate_frac = 0.15;
  double margin_char_frac = 0.20;
  int plate_patch_w_px = 240;
  int plate_patch_h_px = 80;
  int char_patch_w_px = 24;
  int char_patch_h_px = 40;

  // feature extractors
  std::string extractor_plate_method = "raw_patch";
  int extractor_plate_grid_w = 16;
  int extractor_plate_grid_h = 4;
  std::string extractor_char_method = "raw_patch";
  int extractor_char_grid_w = 6;
  int extractor_char_grid_h = 10;
  int extractor_bins = 8;

  // flow architecture and training
  int flow_layers = 6;
  int flow_hidden = 32;
  double flow_scale_clamp = 3.0;
  int train_steps = 4000;
  int train_batch = 64;
  std::vector<double> train_lr_schedule{1e-2, 3e-3, 1e-3};
  int train_patience_intervals = 0;
  double train_val_frac = 0.1;
  int train_log_every_steps = 50;

  // character classifier
  double classifier_epsilon = 0.1;
  int classifier_steps = 4000;
  int classifier_batch = 64;
  std::vector<double> classifier_lr_schedule{0.5, 0.2, 0.05};

  // scoring
  bool score_standardized = true;
  double theta_plate_sigma = 4.0;
  double theta_char_sigma = 3.0;
  std::vector<double> theta_grid{0.01, 0.05, 0.1, 0.25, 0.5, 0.75, 1.0,
                                 1.5,  2.0,  2.5, 3.0,  3.5, 4.0};
  std::string transforms =
      "identity;rotate:10;rotate:-10;rotate:20;rotate:-20;crop:0.05;crop:0.1;"
      "brightness:0.1;brightness:-0.1;contrast:0.8;contrast:1.25";

  // assembly and post-processing
  double assemble_row_gap_factor = 0.5;
  double assemble_group_gap_factor = 0.5;
  bool assemble_infer_series = true;
  std::string swap_digit_slot = "a:1,b:6,d:0";
  std::string swap_series_slot = "1:a";

  // evaluation
  double eval_iou_threshold = 0.5;
};

/// Applies `key=value` lines from a flat config file. '#' starts a comment.
void apply_config_file(RunConfig& config, const std::string& path);

/// Applies one key=value override; unknown keys raise ConfigError.
void apply_override(RunConfig& config, const std::string& key, const std::string& value);

/// All recognized keys (for error messages and docs).
std::vector<std::string> config_keys();

}  // namespace plateflow
