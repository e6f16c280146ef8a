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

// Run configuration: flat `section.key = value` text files. Blank lines and
// lines starting with '#' or ';' are ignored. Unknown keys, repeated keys and
// malformed values are errors reported with the offending line number.

#ifndef DIFFABM_CONFIG_H_
#define DIFFABM_CONFIG_H_

#include <array>
#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "diffabm/ode.h"
#include "diffabm/population.h"
#include "diffabm/train.h"

namespace diffabm {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct PopulationSection {
  std::size_t n = 1000;
  int mean_degree = 10;
  double rewire = 0.01;
  std::array<double, kAgeBins> age_distribution{
      1.0 / 9, 1.0 / 9, 1.0 / 9, 1.0 / 9, 1.0 / 9, 1.0 / 9, 1.0 / 9, 1.0 / 9, 1.0 / 9};
  std::string edges;  // optional edge-list CSV replacing the generated network
};

struct EpiSection {
  Disease disease = Disease::kCovid;
  std::vector<double> r{2.5};  // weekly; the last value repeats
  double i0 = 0.01;
  double mortality = 0.01;
  int tau_ei = 3;
  int tau_ir = 7;
  int tau_im = 10;
  int steps = 28;
  double transmissibility_e = 0.33;
  double transmissibility_i = 1.0;
  std::array<double, kAgeBins> susceptibility{1, 1, 1, 1, 1, 1, 1, 1, 1};
  double curve_shape = 2.0;
  double curve_scale = 2.5;
};

struct SyntheticSection {
  int regions = 5;
  std::size_t agents = 500;
  int weeks = 12;
  double perturbation = 0.15;
  std::string start = "2020-03-01";
};

struct CalibrationSection {
  CalibrationMode mode = CalibrationMode::kDC;
  int epochs = 1000;
  double lr = 1e-3;
  OptimizerKind optimizer = OptimizerKind::kAdam;
  int hidden_dim = 32;
  int horizon_weeks = 4;
  bool resample_noise = false;
  double temperature = 0.5;
  int train_weeks = 0;        // 0 uses every complete week of the data
  double noise_lambda = 0.0;  // observation noise added to training targets
  std::string targets;        // empty: synthetic benchmark from [synthetic]
  std::string features;
};

struct EvaluationSection {
  std::vector<int> anchors;  // epiweek codes
  int horizon_weeks = 4;
  int min_train_weeks = 3;
  ReportMode report = ReportMode::kRelaxed;
  int samples = 1;
  bool rmse_no_sqrt = false;
};

struct PolicySection {
  std::vector<double> efficacy;  // sweep values
  double second_dose_efficacy = 0.9;
  int onset_delay = 12;
  int second_dose_interval = 21;
  double vaccination_rate = 0.003;
  int burn_in = 20;
  int seed_infections = 10;
  int horizon = 74;
  std::string vaccine = "non-sterilizing";
  double test_probability = 0.2;
  double quarantine_compliance = 0.5;
  double r = 4.0;
  double age_mortality_ratio = 2.5;
  int seeds = 10;
  std::string p1 = "standard";
  std::string p2 = "delayed";
};

struct BenchSection {
  std::vector<double> edges{1e4, 5e4, 1e5, 5e5, 1e6};  // directed edge counts
  int steps = 133;
  int repeats = 1;
};

struct OracleSection {
  int samples = 100000;
  double temperature = 0.1;
  int relaxed_samples = 2000;
};

struct RunConfig {
  std::uint64_t seed = 0;
  int threads = 1;
  std::string out = ".";
  PopulationSection population;
  EpiSection epi;
  SyntheticSection synthetic;
  CalibrationSection calibration;
  EvaluationSection evaluation;
  PolicySection policy;
  BenchSection bench;
  OracleSection oracle;
  ExpertConfig expert;  // literature values; unset unless supplied

  // Cross-field checks and existence of referenced files.
  void Validate() const;
};

// `source` names the input in diagnostics ("path:line: message").
RunConfig ParseConfig(std::istream& in, const std::string& source = "<config>");
RunConfig LoadConfig(const std::string& path);
// Writes every key with its current value; parses back to the same config.
void WriteConfig(std::ostream& out, const RunConfig& config);

}  // namespace diffabm

#endif  // DIFFABM_CONFIG_H_
