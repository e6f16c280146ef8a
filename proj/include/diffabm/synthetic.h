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

// Synthetic multi-region benchmark: regions share a weekly reproduction-rate
// curve with region-specific perturbations; targets come from the relaxed
// simulator itself and features are noisy views of the driving quantities.

#ifndef DIFFABM_SYNTHETIC_H_
#define DIFFABM_SYNTHETIC_H_

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "diffabm/eval.h"
#include "diffabm/train.h"

namespace diffabm {

// Builds a region simulator from population settings with default clinical
// parameters (infectiousness gamma(2, 2.5) normalized over 14 days).
std::shared_ptr<RegionModel> MakeRegionModel(const std::string& name,
                                             const PopulationConfig& population,
                                             Disease disease);

struct SyntheticConfig {
  Disease disease = Disease::kCovid;
  int regions = 5;
  std::size_t agents = 500;
  int mean_degree = 10;
  double rewire_probability = 0.05;
  int weeks = 12;
  double perturbation = 0.15;
  double temperature = 0.5;
  std::uint64_t seed = 0;
  std::string start_date = "2020-03-01";  // must be a Sunday
};

struct SyntheticBenchmark {
  std::vector<std::shared_ptr<RegionModel>> models;
  std::vector<EpisodeData> episodes;
  std::vector<ad::Tensor> true_theta;  // [weeks, D] per region
  std::vector<std::uint64_t> truth_noise_seeds;
};

SyntheticBenchmark GenerateSyntheticBenchmark(const SyntheticConfig& config);

}  // namespace diffabm

#endif  // DIFFABM_SYNTHETIC_H_
