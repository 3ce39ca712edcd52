#include "plateflow/config.hpp"

#include <fstream>
#include <functional>
#include <map>

#include "plateflow/errors.hpp"
#include "plateflow/text.hpp"

namespace plateflow {

namespace {

using Setter = std::function<void(RunConfig&, const std::string&)>;

bool parse_bool(const std::string& v, const std::string& key) {
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw ConfigError("expected a boolean for " + key + ", got '" + v + "'");
}

std::vector<double> parse_double_list(const std::string& v, const std::string& key) {
  std::vector<double> out;
  for (const auto& part : split(v, ',')) {
    const auto p = trim(part);
    if (p.empty()) continue;
    out.push_back(parse_double(p, key));
  }
  if (out.empty()) throw ConfigError("empty list for " + key);
  return out;
}

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"seed",
       [](RunConfig& c, const std::string& v) {
         c.seed = static_cast<std::uint64_t>(parse_int(v, "seed"));
         c.seed_set = true;
       }},
      {"data_dir", [](RunConfig& c, const std::string& v) { c.data_dir = v; }},
      {"models_dir", [](RunConfig& c, const std::string& v) { c.models_dir = v; }},
      {"out_dir", [](RunConfig& c, const std::string& v) { c.out_dir = v; }},
      {"pred_dir", [](RunConfig& c, const std::string& v) { c.pred_dir = v; }},
      {"pairs_csv", [](RunConfig& c, const std::string& v) { c.pairs_csv = v; }},

      {"synth_count",
       [](RunConfig& c, const std::string& v) { c.synth_count = static_cast<int>(parse_int(v, "synth_count")); }},
      {"synth_noise_level",
       [](RunConfig& c, const std::string& v) { c.synth_noise_level = parse_double(v, "synth_noise_level"); }},
      {"synth_rotation_max_deg",
       [](RunConfig& c, const std::string& v) { c.synth_rotation_max_deg = parse_double(v, "synth_rotation_max_deg"); }},
      {"synth_mix_new_frac",
       [](RunConfig& c, const std::string& v) { c.synth_mix_new_frac = parse_double(v, "synth_mix_new_frac"); }},
      {"synth_mix_numeric_frac",
       [](RunConfig& c, const std::string& v) { c.synth_mix_numeric_frac = parse_double(v, "synth_mix_numeric_frac"); }},
      {"synth_mix_old_frac",
       [](RunConfig& c, const std::string& v) { c.synth_mix_old_frac = parse_double(v, "synth_mix_old_frac"); }},
      {"synth_uniform_layouts",
       [](RunConfig& c, const std::string& v) { c.synth_uniform_layouts = parse_bool(v, "synth_uniform_layouts"); }},
      {"synth_false_plate_rate",
       [](RunConfig& c, const std::string& v) { c.synth_false_plate_rate = parse_double(v, "synth_false_plate_rate"); }},

      {"split_train_frac",
       [](RunConfig& c, const std::string& v) { c.split_train_frac = parse_double(v, "split_train_frac"); }},
      {"split_test_frac",
       [](RunConfig& c, const std::string& v) { c.split_test_frac = parse_double(v, "split_test_frac"); }},
      {"split_val_frac",
       [](RunConfig& c, const std::string& v) { c.split_val_frac = parse_double(v, "split_val_frac"); }},

      {"margin_plate_frac",
       [](RunConfig& c, const std::string& v) { c.margin_plate_frac = parse_double(v, "margin_plate_frac"); }},
      {"margin_char_frac",
       [](RunConfig& c, const std::string& v) { c.margin_char_frac = parse_double(v, "margin_char_frac"); }},
      {"plate_patch_w_px",
       [](RunConfig& c, const std::string& v) { c.plate_patch_w_px = static_cast<int>(parse_int(v, "plate_patch_w_px")); }},
      {"plate_patch_h_px",
       [](RunConfig& c, const std::string& v) { c.plate_patch_h_px = static_cast<int>(parse_int(v, "plate_patch_h_px")); }},
      {"char_patch_w_px",
       [](RunConfig& c, const std::string& v) { c.char_patch_w_px = static_cast<int>(parse_int(v, "char_patch_w_px")); }},
      {"char_patch_h_px",
       [](RunConfig& c, const std::string& v) { c.char_patch_h_px = static_cast<int>(parse_int(v, "char_patch_h_px")); }},

      {"extractor_plate_method",
       [](RunConfig& c, const std::string& v) { c.extractor_plate_method = v; }},
      {"extractor_plate_grid_w",
       [](RunConfig& c, const std::string& v) { c.extractor_plate_grid_w = static_cast<int>(parse_int(v, "extractor_plate_grid_w")); }},
      {"extractor_plate_grid_h",
       [](RunConfig& c, const std::string& v) { c.extractor_plate_grid_h = static_cast<int>(parse_int(v, "extractor_plate_grid_h")); }},
      {"extractor_char_method",
       [](RunConfig& c, const std::string& v) { c.extractor_char_method = v; }},
      {"extractor_char_grid_w",
       [](RunConfig& c, const std::string& v) { c.extractor_char_grid_w = static_cast<int>(parse_int(v, "extractor_char_grid_w")); }},
      {"extractor_char_grid_h",
       [](RunConfig& c, const std::string& v) { c.extractor_char_grid_h = static_cast<int>(parse_int(v, "extractor_char_grid_h")); }},
      {"extractor_bins",
       [](RunConfig& c, const std::string& v) { c.extractor_bins = static_cast<int>(parse_int(v, "extractor_bins")); }},

      {"flow_layers",
       [](RunConfig& c, const std::string& v) { c.flow_layers = static_cast<int>(parse_int(v, "flow_layers")); }},
      {"flow_hidden",
       [](RunConfig& c, const std::string& v) { c.flow_hidden = static_cast<int>(parse_int(v, "flow_hidden")); }},
      {"flow_scale_clamp",
       [](RunConfig& c, const std::string& v) { c.flow_scale_clamp = parse_double(v, "flow_scale_clamp"); }},
      {"train_steps",
       [](RunConfig& c, const std::string& v) { c.train_steps = static_cast<int>(parse_int(v, "train_steps")); }},
      {"train_batch",
       [](RunConfig& c, const std::string& v) { c.train_batch = static_cast<int>(parse_int(v, "train_batch")); }},
      {"train_lr_schedule",
       [](RunConfig& c, const std::string& v) { c.train_lr_schedule = parse_double_list(v, "train_lr_schedule"); }},
      {"train_patience_intervals",
       [](RunConfig& c, const std::string& v) { c.train_patience_intervals = static_cast<int>(parse_int(v, "train_patience_intervals")); }},
      {"train_val_frac",
       [](RunConfig& c, const std::string& v) { c.train_val_frac = parse_double(v, "train_val_frac"); }},
      {"train_log_every_steps",
       [](RunConfig& c, const std::string& v) { c.train_log_every_steps = static_cast<int>(parse_int(v, "train_log_every_steps")); }},

      {"classifier_epsilon",
       [](RunConfig& c, const std::string& v) { c.classifier_epsilon = parse_double(v, "classifier_epsilon"); }},
      {"classifier_steps",
       [](RunConfig& c, const std::string& v) { c.classifier_steps = static_cast<int>(parse_int(v, "classifier_steps")); }},
      {"classifier_batch",
       [](RunConfig& c, const std::string& v) { c.classifier_batch = static_cast<int>(parse_int(v, "classifier_batch")); }},
      {"classifier_lr_schedule",
       [](RunConfig& c, const std::string& v) { c.classifier_lr_schedule = parse_double_list(v, "classifier_lr_schedule"); }},

      {"score_standardized",
       [](RunConfig& c, const std::string& v) { c.score_standardized = parse_bool(v, "score_standardized"); }},
      {"theta_plate_sigma",
       [](RunConfig& c, const std::string& v) { c.theta_plate_sigma = parse_double(v, "theta_plate_sigma"); }},
      {"theta_char_sigma",
       [](RunConfig& c, const std::string& v) { c.theta_char_sigma = parse_double(v, "theta_char_sigma"); }},
      {"theta_grid",
       [](RunConfig& c, const std::string& v) { c.theta_grid = parse_double_list(v, "theta_grid"); }},
      {"transforms", [](RunConfig& c, const std::string& v) { c.transforms = v; }},

      {"assemble_row_gap_factor",
       [](RunConfig& c, const std::string& v) { c.assemble_row_gap_factor = parse_double(v, "assemble_row_gap_factor"); }},
      {"assemble_group_gap_factor",
       [](RunConfig& c, const std::string& v) { c.assemble_group_gap_factor = parse_double(v, "assemble_group_gap_factor"); }},
      {"assemble_infer_series",
       [](RunConfig& c, const std::string& v) { c.assemble_infer_series = parse_bool(v, "assemble_infer_series"); }},
      {"swap_digit_slot", [](RunConfig& c, const std::string& v) { c.swap_digit_slot = v; }},
      {"swap_series_slot", [](RunConfig& c, const std::string& v) { c.swap_series_slot = v; }},

      {"eval_iou_threshold",
       [](RunConfig& c, const std::string& v) { c.eval_iou_threshold = parse_double(v, "eval_iou_threshold"); }},
  };
  return table;
}

}  // namespace

void apply_override(RunConfig& config, const std::string& key, const std::string& value) {
  const auto it = setters().find(key);
  if (it == setters().end()) throw ConfigError("unknown config key: '" + key + "'");
  it->second(config, value);
}

void apply_config_file(RunConfig& config, const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path + ":" + std::to_string(line_no) + ": expected key=value");
    apply_override(config, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& [k, fn] : setters()) keys.push_back(k);
  return keys;
}

}  // namespace plateflow
