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

// Vaccination policy experiments on the hard-mode engine: standard versus
// delayed second-dose schedules with age-prioritized queues, optional testing
// and quarantine, and an efficacy sensitivity sweep reporting the death
// ratio of the delayed policy (P2) to the standard one (P1).

#ifndef DIFFABM_POLICY_H_
#define DIFFABM_POLICY_H_

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "diffabm/epi.h"
#include "diffabm/population.h"

namespace diffabm {

enum class Strategy { kStandard, kDelayed };
enum class VaccineMode { kNonSterilizing, kSterilizing };
Strategy ParseStrategy(const std::string& name);
VaccineMode ParseVaccineMode(const std::string& name);

struct PolicyConfig {
  Strategy strategy = Strategy::kStandard;
  double first_dose_efficacy = 0.5;
  double second_dose_efficacy = 0.9;
  int onset_delay = 12;            // days from a dose until it protects
  int second_dose_interval = 21;   // earliest second dose after the first
  double vaccination_rate = 0.003; // fraction of the population per day
  int burn_in = 20;
  int seed_infections = 10;
  int horizon = 74;                // vaccinated days after burn-in
  VaccineMode mode = VaccineMode::kNonSterilizing;
  double test_probability = 0.2;       // daily detection chance while infectious
  double quarantine_compliance = 0.5;  // outgoing rate factor once detected

  void Validate() const;
  int total_days() const { return burn_in + horizon; }
};

struct VaccinationRecord {
  std::uint8_t doses = 0;
  int first_day = -1;
  int second_day = -1;
  bool deceased = false;  // never queued
};

// Protection on `day`: the second dose's efficacy once it is active, else
// the first dose's, else zero. A dose is active from dose day + onset delay.
double CurrentEfficacy(const VaccinationRecord& record, const PolicyConfig& config, int day);

struct VaccineEffect {
  double susceptibility = 1.0;
  double mortality = 1.0;
};
VaccineEffect ApplyVaccineEffect(const VaccinationRecord& record,
                                 const PolicyConfig& config, int day);

// Agents to vaccinate today, in priority order, at most `count` of them.
// First-dose eligible: no dose yet. Second-dose eligible: one dose given at
// least `second_dose_interval` days ago. Standard puts the second-dose tier
// first, delayed the first-dose tier; each tier is ordered by age descending,
// then by agent index.
std::vector<std::int32_t> VaccinationQueue(std::span<const int> ages,
                                           std::span<const VaccinationRecord> records,
                                           const PolicyConfig& config, int day,
                                           std::size_t count);

struct PolicyScenario {
  Population agents;  // all susceptible
  ContactNetwork network;
  TransmissionParams transmission;  // r[0] is used for every day
  ProgressionParams progression;
  InfectiousnessCurve curve = InfectiousnessCurve::Normalized(2.0, 2.5);
  // Multiplier of the expiry probability per age bin.
  std::array<double, kAgeBins> age_mortality{1, 1, 1, 1, 1, 1, 1, 1, 1};

  // Relative risk growing by `ratio` per age bin, normalized to mean one.
  static std::array<double, kAgeBins> GeometricAgeProfile(double ratio);
};

struct PolicyRun {
  double deaths = 0.0;      // cumulative M at the end
  double infections = 0.0;  // cumulative exposures, seeds included
  std::vector<double> deaths_by_day;
  std::vector<VaccinationRecord> vaccination;
};

PolicyRun RunPolicy(const PolicyScenario& scenario, const PolicyConfig& config,
                    std::uint64_t seed);

struct PolicyOutcome {
  std::vector<double> deaths_p1, deaths_p2;  // per seed
  std::vector<double> infections_p1, infections_p2;
  double mean_deaths_p1 = 0.0, mean_deaths_p2 = 0.0;
  double mean_infections_p1 = 0.0, mean_infections_p2 = 0.0;
  // Ratio of seed-averaged deaths, NaN when P1 has none.
  double relative_mortality = 0.0;
};

// Paired comparison: both policies see the same seeds.
PolicyOutcome RunPolicyExperiment(const PolicyScenario& scenario, const PolicyConfig& p1,
                                  const PolicyConfig& p2, std::span<const std::uint64_t> seeds,
                                  int threads = 1);

// "P2" below one, "P1" above, "tie" at exactly one, "undefined" for NaN.
std::string Decide(double relative_mortality);

struct SweepRow {
  double efficacy = 0.0;
  double relative_mortality = 0.0;
  std::string decision;
  int seeds = 0;
};

// P1 and P2 take the given first-dose efficacy; everything else comes from
// the base configs.
std::vector<SweepRow> SensitivitySweep(const PolicyScenario& scenario, const PolicyConfig& p1,
                                       const PolicyConfig& p2, std::span<const double> efficacies,
                                       std::span<const std::uint64_t> seeds, int threads = 1);

void WriteSweepCsv(std::ostream& out, std::span<const SweepRow> rows);
std::vector<SweepRow> ReadSweepCsv(std::istream& in);

// Spearman rank correlation (average ranks for ties).
double RankCorrelation(std::span<const double> x, std::span<const double> y);

}  // namespace diffabm

#endif  // DIFFABM_POLICY_H_
