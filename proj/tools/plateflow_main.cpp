// plateflow: synthesize data, train the flow verifier and classifier,
// calibrate the acceptance threshold, run the recognition pipeline, and
// evaluate results.

#include <CLI11.hpp>

#include <iostream>
#include <string>
#include <vector>

#include "plateflow/config.hpp"
#include "plateflow/errors.hpp"
#include "plateflow/pipeline.hpp"
#include "plateflow/text.hpp"

namespace {

struct CliArgs {
  std::string config_path;
  std::vector<std::string> sets;  // key=value overrides
  // Named flags; empty/NaN means "not given".
  std::string data_dir, models_dir, out_dir, pred_dir, pairs_csv;
  double theta = std::numeric_limits<double>::quiet_NaN();
  double margin_plate = std::numeric_limits<double>::quiet_NaN();
  double margin_char = std::numeric_limits<double>::quiet_NaN();
  long long seed = -1;
  bool seed_given = false;
  int count = -1;
};

void add_common_flags(CLI::App* cmd, CliArgs& args) {
  cmd->add_option("--config", args.config_path, "flat key=value config file");
  cmd->add_option("--seed", args.seed, "deterministic RNG seed (mandatory)")
      ->each([&args](const std::string&) { args.seed_given = true; });
  cmd->add_option("--theta", args.theta, "character acceptance threshold (ST-B)");
  cmd->add_option("--margin-plate", args.margin_plate, "plate crop margin fraction");
  cmd->add_option("--margin-char", args.margin_char, "character crop margin fraction");
  cmd->add_option("--out", args.out_dir, "output directory");
  cmd->add_option("--data", args.data_dir, "dataset directory (manifest.jsonl inside)");
  cmd->add_option("--models", args.models_dir, "model directory");
  cmd->add_option("--set", args.sets, "extra key=value override, repeatable");
}

plateflow::RunConfig resolve_config(const CliArgs& args) {
  plateflow::RunConfig config;
  if (!args.config_path.empty()) plateflow::apply_config_file(config, args.config_path);
  // CLI beats the file.
  for (const auto& kv : args.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos)
      throw plateflow::ConfigError("--set expects key=value, got '" + kv + "'");
    plateflow::apply_override(config, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (args.seed_given) {
    config.seed = static_cast<std::uint64_t>(args.seed);
    config.seed_set = true;
  }
  if (!std::isnan(args.theta)) config.theta_override = args.theta;
  if (!std::isnan(args.margin_plate)) config.margin_plate_frac = args.margin_plate;
  if (!std::isnan(args.margin_char)) config.margin_char_frac = args.margin_char;
  if (!args.out_dir.empty()) config.out_dir = args.out_dir;
  if (!args.data_dir.empty()) config.data_dir = args.data_dir;
  if (!args.models_dir.empty()) config.models_dir = args.models_dir;
  if (!args.pred_dir.empty()) config.pred_dir = args.pred_dir;
  if (!args.pairs_csv.empty()) config.pairs_csv = args.pairs_csv;
  if (args.count >= 0) config.synth_count = args.count;
  return config;
}

void print_structured_error(const char* kind, const std::exception& e) {
  std::cerr << "{\"error\":\"" << kind << "\",\"message\":\"" << e.what() << "\"}" << std::endl;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-stage license-plate recognition with a normalizing-flow verifier"};
  app.require_subcommand(1);

  CliArgs args;

  auto* synth = app.add_subcommand("synth", "generate a synthetic annotated dataset");
  add_common_flags(synth, args);
  synth->add_option("--n", args.count, "number of plates to generate");

  auto* train = app.add_subcommand("train", "train NF-A, NF-B and the character classifier");
  add_common_flags(train, args);

  auto* calibrate = app.add_subcommand("calibrate", "sweep theta on the validation split");
  add_common_flags(calibrate, args);

  auto* run = app.add_subcommand("run", "run the recognition pipeline over a dataset");
  add_common_flags(run, args);

  auto* eval = app.add_subcommand("eval", "evaluate predictions against ground truth");
  add_common_flags(eval, args);
  eval->add_option("--pred", args.pred_dir, "directory of plate JSON records");
  eval->add_option("--pairs", args.pairs_csv, "pairs CSV (image_id,predicted,target)");

  CLI11_PARSE(app, argc, argv);

  try {
    const plateflow::RunConfig config = resolve_config(args);
    if (synth->parsed()) plateflow::cmd_synth(config);
    if (train->parsed()) plateflow::cmd_train(config);
    if (calibrate->parsed()) plateflow::cmd_calibrate(config);
    if (run->parsed()) plateflow::cmd_run(config);
    if (eval->parsed()) plateflow::cmd_eval(config);
    return 0;
  } catch (const plateflow::ConfigError& e) {
    print_structured_error("config", e);
    return 2;
  } catch (const plateflow::DataError& e) {
    print_structured_error("data", e);
    return 3;
  } catch (const plateflow::NumericError& e) {
    print_structured_error("numeric", e);
    return 4;
  } catch (const std::exception& e) {
    print_structured_error("internal", e);
    return 4;
  }
}
