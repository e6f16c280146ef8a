// Copyright 2026 The diffabm Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Command-line entry point: parses flags, merges them over the config file
// and dispatches to the command implementations.

#include <CLI11.hpp>

#include <exception>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "diffabm/commands.h"
#include "diffabm/config.h"

int main(int argc, char** argv) {
  using namespace diffabm;
  CLI::App app{"diffabm: differentiable agent-based epidemic simulation"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<std::string> out;
  app.add_option("--config", config_path, "configuration file (section.key = value)");
  app.add_option("--seed", seed, "root seed");
  app.add_option("--threads", threads, "worker threads; 1 is bit-exact reproducible")
      ->check(CLI::PositiveNumber);
  app.add_option("--out", out, "output directory");

  auto* simulate = app.add_subcommand("simulate", "hard-mode run; writes census.csv and summary.csv");

  std::optional<std::string> mode, targets, features;
  std::optional<int> epochs;
  auto* calibrate = app.add_subcommand("calibrate", "calibrate regions; writes loss.csv, theta.csv, checkpoints");
  calibrate->add_option("--mode", mode, "c, dc or jdc")->check(CLI::IsMember({"c", "dc", "jdc"}));
  calibrate->add_option("--targets", targets, "target CSV (date,region,value)");
  calibrate->add_option("--features", features, "feature CSV (date,region,feature_name,value)");
  calibrate->add_option("--epochs", epochs, "training epochs")->check(CLI::NonNegativeNumber);

  std::vector<int> anchors;
  std::string checkpoint;
  auto* forecast = app.add_subcommand("forecast", "real-time forecasts; writes forecast.csv and metrics.csv");
  forecast->add_option("--mode", mode, "c, dc or jdc")->check(CLI::IsMember({"c", "dc", "jdc"}));
  forecast->add_option("--anchors", anchors, "anchor epiweeks, e.g. 202014,202015")->delimiter(',');
  forecast->add_option("--checkpoint", checkpoint, "calibrator checkpoint used as warm start")
      ->check(CLI::ExistingFile);
  forecast->add_option("--targets", targets, "target CSV");
  forecast->add_option("--features", features, "feature CSV");
  forecast->add_option("--epochs", epochs, "training epochs")->check(CLI::NonNegativeNumber);

  std::vector<double> edges;
  auto* bench = app.add_subcommand("bench", "time hard-mode runs; writes bench.csv and bench_fit.csv");
  bench->add_option("--edges", edges, "directed edge counts")->delimiter(',');

  std::vector<double> efficacy;
  std::optional<int> policy_seeds;
  auto* policy = app.add_subcommand("policy", "second-dose policy sweep; writes policy.csv");
  policy->add_option("--efficacy", efficacy, "first-dose efficacies, e.g. 0.5,0.6,0.7,0.8")
      ->delimiter(',');
  policy->add_option("--seeds", policy_seeds, "paired seeds per efficacy")->check(CLI::PositiveNumber);

  auto* oracle = app.add_subcommand("oracle", "exact expectation vs Monte Carlo on a tiny instance");
  auto* synth = app.add_subcommand("synth", "write a synthetic benchmark as targets.csv and features.csv");

  CLI11_PARSE(app, argc, argv);

  try {
    RunConfig config = config_path.empty() ? RunConfig{} : LoadConfig(config_path);
    if (seed) config.seed = *seed;
    if (threads) config.threads = *threads;
    if (out) config.out = *out;
    if (mode) config.calibration.mode = ParseCalibrationMode(*mode);
    if (targets) config.calibration.targets = *targets;
    if (features) config.calibration.features = *features;
    if (epochs) config.calibration.epochs = *epochs;
    if (!anchors.empty()) config.evaluation.anchors = anchors;
    if (!edges.empty()) config.bench.edges = edges;
    if (!efficacy.empty()) config.policy.efficacy = efficacy;
    if (policy_seeds) config.policy.seeds = *policy_seeds;
    config.Validate();

    std::ostream& report = std::cout;
    if (*simulate) return CmdSimulate(config, report);
    if (*calibrate) return CmdCalibrate(config, report);
    if (*forecast) return CmdForecast(config, checkpoint, report);
    if (*bench) return CmdBench(config, report);
    if (*policy) return CmdPolicy(config, report);
    if (*oracle) return CmdOracle(config, report);
    if (*synth) return CmdSynth(config, report);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
