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

// Command implementations behind the command-line tool. Each command reads a
// RunConfig, writes its CSV outputs under config.out and prints a short
// report. Failures throw; the tool turns them into a nonzero exit code.

#ifndef DIFFABM_COMMANDS_H_
#define DIFFABM_COMMANDS_H_

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "diffabm/config.h"
#include "diffabm/eval.h"
#include "diffabm/policy.h"
#include "diffabm/synthetic.h"

namespace diffabm {

// Named child seed of the root seed.
std::uint64_t DeriveSeed(std::uint64_t root, std::string_view name, std::uint64_t index = 0);

PopulationConfig PopulationFrom(const RunConfig& config, std::uint64_t seed);
TransmissionParams TransmissionFrom(const RunConfig& config, int steps);
ProgressionParams ProgressionFrom(const RunConfig& config);

// ---------------------------------------------------------------------------
// Regions to calibrate: loaded from CSV files or generated synthetically.

struct RegionData {
  std::vector<std::shared_ptr<RegionModel>> models;
  std::vector<EpisodeData> episodes;
};
RegionData LoadRegions(const RunConfig& config);

// Calibrates all regions on the given windows and returns, per region, the
// parameter rows for `weeks` weeks (training weeks first).
struct CalibrationOutcome {
  std::vector<ad::Tensor> theta;
  std::vector<LossRecord> history;
  std::vector<CalibNet> networks;  // one per region (DC), one shared (JDC)
};
CalibrationOutcome CalibrateRegions(const RunConfig& config,
                                    const std::vector<std::shared_ptr<RegionModel>>& models,
                                    std::span<const EpisodeData> windows, std::size_t weeks,
                                    const CalibNet* warm_start = nullptr);

// ---------------------------------------------------------------------------
// Benchmark helpers.

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};
// Least squares; R^2 is 1 for a perfect fit and 0 when x explains nothing.
LinearFit FitLine(std::span<const double> x, std::span<const double> y);

struct BenchPoint {
  std::size_t directed_edges = 0;
  std::size_t agents = 0;
  int steps = 0;
  double seconds = 0.0;  // best of the repeats
};
BenchPoint TimeHardRun(std::size_t directed_edges, int steps, int mean_degree, int repeats,
                       std::uint64_t seed);

// ---------------------------------------------------------------------------
// Oracle comparison.

struct OracleReport {
  double exact = 0.0;
  double mc_mean = 0.0;
  double mc_stderr = 0.0;
  double relaxed_mean = 0.0;
  int samples = 0;
};
OracleReport RunOracle(const Population& seeded, const ContactNetwork& network,
                       const TransmissionParams& transmission,
                       const ProgressionParams& progression, const InfectiousnessCurve& curve,
                       int steps, int samples, double temperature, int relaxed_samples,
                       std::uint64_t seed);

PolicyScenario PolicyScenarioFrom(const RunConfig& config);

// ---------------------------------------------------------------------------
// Commands. Each returns the process exit code.

int CmdSimulate(const RunConfig& config, std::ostream& report);
int CmdCalibrate(const RunConfig& config, std::ostream& report);
int CmdForecast(const RunConfig& config, const std::string& checkpoint, std::ostream& report);
int CmdBench(const RunConfig& config, std::ostream& report);
int CmdPolicy(const RunConfig& config, std::ostream& report);
int CmdOracle(const RunConfig& config, std::ostream& report);
// Writes a synthetic benchmark as target and feature CSVs.
int CmdSynth(const RunConfig& config, std::ostream& report);

}  // namespace diffabm

#endif  // DIFFABM_COMMANDS_H_
