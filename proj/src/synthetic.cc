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

#include "diffabm/synthetic.h"

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

#include "diffabm/rng.h"

namespace diffabm {

using ad::Tensor;

std::shared_ptr<RegionModel> MakeRegionModel(const std::string& name,
                                             const PopulationConfig& population,
                                             Disease disease) {
  auto m = std::make_shared<RegionModel>();
  m->name = name;
  m->agents = GeneratePopulation(population);
  m->network = BuildContactNetwork(population);
  m->curve = InfectiousnessCurve::Normalized(2.0, 2.5);
  m->disease = disease;
  if (disease == Disease::kFlu) m->progression = {2, 5, 5, 0.0};
  return m;
}

SyntheticBenchmark GenerateSyntheticBenchmark(const SyntheticConfig& config) {
  if (config.regions < 1 || config.weeks < 1) {
    throw std::invalid_argument("synthetic benchmark needs regions and weeks");
  }
  const bool covid = config.disease == Disease::kCovid;
  const CounterRng rng(config.seed);
  const std::uint64_t kRegionStream = StreamId("synthetic-region");
  const std::uint64_t kFeatureStream = StreamId("synthetic-features");
  const int days = 7 * config.weeks;
  SyntheticBenchmark out;
  for (int r = 0; r < config.regions; ++r) {
    auto uni = [&](std::uint64_t k) { return rng.Uniform(kRegionStream, r, k); };
    PopulationConfig pc;
    pc.n = config.agents;
    pc.mean_degree = config.mean_degree;
    pc.rewire_probability = config.rewire_probability;
    pc.seed = Mix64(config.seed ^ (0x100 + static_cast<std::uint64_t>(r)));
    const std::string name = "region" + std::to_string(r);
    auto model = MakeRegionModel(name, pc, config.disease);

    // Shared seasonal curve, region scale and weekly jitter.
    const double scale = 1.0 + config.perturbation * (2.0 * uni(0) - 1.0);
    Tensor theta({static_cast<std::size_t>(config.weeks), covid ? 3u : 2u});
    const double mortality = 0.01 * (1.0 + 0.3 * (2.0 * uni(1) - 1.0));
    const double i0_percent = covid ? 0.2 + 0.4 * uni(2) : 0.5 + 1.0 * uni(2);
    for (int w = 0; w < config.weeks; ++w) {
      const double phase = std::cos(2.0 * std::numbers::pi * w / 14.0);
      const double base = covid ? 1.7 + 0.5 * phase : 1.7 + 0.5 * phase;
      const double jitter = 1.0 + 0.03 * (2.0 * uni(10 + w) - 1.0);
      theta.at(w, 0) = base * scale * jitter;
      if (covid) theta.at(w, 1) = mortality;
      theta.at(w, covid ? 2 : 1) = i0_percent;
    }
    const std::uint64_t truth_seed = Mix64(config.seed ^ (0x200 + static_cast<std::uint64_t>(r)));
    const SimSettings settings{config.temperature, truth_seed};
    const std::vector<double> target =
        SimulateSeriesValues(*model, theta, days, ReportMode::kRelaxed, settings);

    // Infection incidence from the same run, read through the flu layout.
    RegionModel incidence_view = *model;
    incidence_view.disease = Disease::kFlu;
    Tensor flu_theta({theta.rows(), 2});
    for (std::size_t w = 0; w < theta.rows(); ++w) {
      flu_theta.at(w, 0) = theta.at(w, 0);
      flu_theta.at(w, 1) = i0_percent;
    }
    if (covid) incidence_view.progression.mortality = mortality;
    const std::vector<double> incidence = SimulateSeriesValues(
        incidence_view, flu_theta, days, ReportMode::kRelaxed, settings);

    EpisodeData e;
    e.region = name;
    e.disease = config.disease;
    e.start = ParseDate(config.start_date);
    e.target = target;
    e.feature_names = {"contact_index", "noise", "symptom_rate"};
    e.features = Tensor({static_cast<std::size_t>(days), 3});
    std::mt19937_64 gen = rng.Engine(kFeatureStream, static_cast<std::uint64_t>(r));
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int t = 0; t < days; ++t) {
      e.features.at(t, 0) = theta.at(t / 7, 0) * (1.0 + 0.05 * normal(gen));
      e.features.at(t, 1) = normal(gen);
      e.features.at(t, 2) = incidence[t] * (1.0 + 0.1 * normal(gen));
    }
    e.Validate();
    out.models.push_back(model);
    out.episodes.push_back(std::move(e));
    out.true_theta.push_back(theta);
    out.truth_noise_seeds.push_back(truth_seed);
  }
  return out;
}

}  // namespace diffabm
