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

#include "diffabm/policy.h"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "gtest/gtest.h"

namespace diffabm {
namespace {

// Six agents: three already hold a first dose given 21 days ago, three hold
// none. Ages 78, 68 and 40 fall in bins 7, 6 and 3.
struct SixAgents {
  std::vector<std::string> names = {"Adam", "Betty", "Charlie", "David", "Eleanor", "Frank"};
  std::vector<int> ages = {7, 7, 6, 6, 3, 3};
  std::vector<VaccinationRecord> records{6};
  SixAgents() {
    for (int i : {1, 3, 5}) records[i] = {1, 0, -1, false};
  }
  std::vector<std::string> Order(Strategy s) const {
    PolicyConfig c;
    c.strategy = s;
    std::vector<std::string> out;
    for (std::int32_t i : VaccinationQueue(ages, records, c, 21, 6)) out.push_back(names[i]);
    return out;
  }
};

TEST(Queue, StandardServesSecondDosesFirst) {
  EXPECT_EQ(SixAgents().Order(Strategy::kStandard),
            (std::vector<std::string>{"Betty", "David", "Frank", "Adam", "Charlie", "Eleanor"}));
}

TEST(Queue, DelayedServesFirstDosesFirst) {
  EXPECT_EQ(SixAgents().Order(Strategy::kDelayed),
            (std::vector<std::string>{"Adam", "Charlie", "Eleanor", "Betty", "David", "Frank"}));
}

TEST(Queue, SecondDoseWaitsForInterval) {
  SixAgents s;
  PolicyConfig c;
  const auto q = VaccinationQueue(s.ages, s.records, c, 20, 6);
  EXPECT_EQ(q.size(), 3u);  // only the unvaccinated are eligible on day 20
  for (std::int32_t i : q) EXPECT_EQ(s.records[i].doses, 0);
  EXPECT_TRUE(VaccinationQueue(s.ages, s.records, c, 21, 0).empty());
  s.records[0].deceased = true;
  for (std::int32_t i : VaccinationQueue(s.ages, s.records, c, 30, 6)) EXPECT_NE(i, 0);
}

TEST(VaccineEffect, StartsAfterOnsetDelay) {
  PolicyConfig c;
  c.first_dose_efficacy = 0.7;
  const VaccinationRecord r{1, 10, -1, false};
  EXPECT_EQ(CurrentEfficacy(r, c, 21), 0.0);  // day 11 after the dose
  EXPECT_EQ(CurrentEfficacy(r, c, 22), 0.7);  // day 12
  EXPECT_EQ(CurrentEfficacy({}, c, 100), 0.0);
  const VaccinationRecord two{2, 10, 31, false};
  EXPECT_EQ(CurrentEfficacy(two, c, 42), 0.7);
  EXPECT_EQ(CurrentEfficacy(two, c, 43), 0.9);
}

TEST(VaccineEffect, ModeDecidesWhatIsScaled) {
  PolicyConfig c;
  c.first_dose_efficacy = 0.6;
  const VaccinationRecord r{1, 0, -1, false};
  const VaccineEffect ns = ApplyVaccineEffect(r, c, 12);
  EXPECT_DOUBLE_EQ(ns.mortality, 0.4);
  EXPECT_EQ(ns.susceptibility, 1.0);
  c.mode = VaccineMode::kSterilizing;
  const VaccineEffect st = ApplyVaccineEffect(r, c, 12);
  EXPECT_EQ(st.mortality, 1.0);
  EXPECT_DOUBLE_EQ(st.susceptibility, 0.4);
  c.first_dose_efficacy = 0.0;
  const VaccineEffect none = ApplyVaccineEffect(r, c, 12);
  EXPECT_EQ(none.mortality, 1.0);
  EXPECT_EQ(none.susceptibility, 1.0);
}

TEST(Config, RejectsInvalidValues) {
  PolicyConfig c;
  c.vaccination_rate = 1.5;
  EXPECT_THROW(c.Validate(), std::invalid_argument);
  c = {};
  c.second_dose_interval = 0;
  EXPECT_THROW(c.Validate(), std::invalid_argument);
  EXPECT_THROW(ParseStrategy("eventually"), std::invalid_argument);
  EXPECT_EQ(ParseVaccineMode("sterilizing"), VaccineMode::kSterilizing);
}

PolicyScenario Scenario(std::size_t n, double r, double age_ratio) {
  PopulationConfig pc;
  pc.n = n;
  pc.mean_degree = 10;
  pc.rewire_probability = 0.05;
  pc.seed = 3;
  PolicyScenario s;
  s.agents = GeneratePopulation(pc);
  s.network = BuildContactNetwork(pc);
  s.transmission.r = {r};
  s.age_mortality = PolicyScenario::GeometricAgeProfile(age_ratio);
  return s;
}

TEST(Scenario, GeometricProfileHasUnitMean) {
  const auto p = PolicyScenario::GeometricAgeProfile(2.0);
  double sum = 0.0;
  for (double v : p) sum += v;
  EXPECT_NEAR(sum, 9.0, 1e-12);
  EXPECT_NEAR(p[8] / p[7], 2.0, 1e-12);
}

TEST(Experiment, IdenticalPoliciesGiveRatioOne) {
  const PolicyScenario s = Scenario(2000, 4.0, 2.5);
  PolicyConfig p;
  const std::vector<std::uint64_t> seeds = {1, 2, 3};
  const PolicyOutcome o = RunPolicyExperiment(s, p, p, seeds);
  EXPECT_EQ(o.deaths_p1, o.deaths_p2);
  EXPECT_GT(o.mean_deaths_p1, 0.0);
  EXPECT_EQ(o.relative_mortality, 1.0);
  EXPECT_EQ(Decide(o.relative_mortality), "tie");
}

TEST(Experiment, NoVaccinationMakesPoliciesInert) {
  const PolicyScenario s = Scenario(2000, 4.0, 2.5);
  PolicyConfig p1, p2;
  p1.vaccination_rate = p2.vaccination_rate = 0.0;
  p2.strategy = Strategy::kDelayed;
  const std::vector<std::uint64_t> seeds = {4, 5};
  const PolicyOutcome o = RunPolicyExperiment(s, p1, p2, seeds);
  EXPECT_EQ(o.relative_mortality, 1.0);
}

TEST(Experiment, ThreadedRunsMatchSerial) {
  const PolicyScenario s = Scenario(1000, 4.0, 2.5);
  PolicyConfig p1, p2;
  p2.strategy = Strategy::kDelayed;
  const std::vector<std::uint64_t> seeds = {1, 2, 3, 4};
  const PolicyOutcome a = RunPolicyExperiment(s, p1, p2, seeds, 1);
  const PolicyOutcome b = RunPolicyExperiment(s, p1, p2, seeds, 3);
  EXPECT_EQ(a.deaths_p1, b.deaths_p1);
  EXPECT_EQ(a.deaths_p2, b.deaths_p2);
}

TEST(Experiment, NoDeathsMeansUndefinedRatio) {
  PolicyScenario s = Scenario(500, 0.0, 1.0);
  PolicyConfig p;
  p.seed_infections = 0;
  const std::vector<std::uint64_t> seeds = {1};
  const PolicyOutcome o = RunPolicyExperiment(s, p, p, seeds);
  EXPECT_TRUE(std::isnan(o.relative_mortality));
  EXPECT_EQ(Decide(o.relative_mortality), "undefined");
}

TEST(Run, FullMortalityProtectionLeavesOnlySeedDeaths) {
  // Every infection is fatal without protection.
  PolicyScenario s = Scenario(1000, 5.0, 1.0);
  s.progression.mortality = 1.0;
  PolicyConfig p;
  p.burn_in = 0;
  p.onset_delay = 0;
  p.vaccination_rate = 1.0;
  p.first_dose_efficacy = 1.0;
  p.second_dose_efficacy = 1.0;
  const PolicyRun run = RunPolicy(s, p, 7);
  EXPECT_GT(run.infections, static_cast<double>(p.seed_infections));
  EXPECT_LE(run.deaths, static_cast<double>(p.seed_infections));
  p.first_dose_efficacy = p.second_dose_efficacy = 0.0;
  EXPECT_GT(RunPolicy(s, p, 7).deaths, static_cast<double>(p.seed_infections));
}

TEST(Run, SterilizingProtectionBlocksInfection) {
  const PolicyScenario s = Scenario(1000, 5.0, 1.0);
  PolicyConfig p;
  p.mode = VaccineMode::kSterilizing;
  p.burn_in = 0;
  p.onset_delay = 0;
  p.vaccination_rate = 1.0;
  p.first_dose_efficacy = 1.0;
  const PolicyRun run = RunPolicy(s, p, 7);
  EXPECT_EQ(run.infections, static_cast<double>(p.seed_infections));
}

TEST(Run, QuarantineReducesSpread) {
  const PolicyScenario s = Scenario(2000, 4.0, 1.0);
  PolicyConfig none, strict;
  none.test_probability = 0.0;
  strict.test_probability = 1.0;
  strict.quarantine_compliance = 0.0;
  double a = 0.0, b = 0.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    a += RunPolicy(s, none, seed).infections;
    b += RunPolicy(s, strict, seed).infections;
  }
  EXPECT_LT(b, 0.5 * a);
}

TEST(Run, QueueEventuallyReachesEveryone) {
  const PolicyScenario s = Scenario(20, 0.0, 1.0);
  PolicyConfig p;
  p.seed_infections = 0;
  p.burn_in = 0;
  p.vaccination_rate = 0.05;  // one agent per day
  p.horizon = 200;
  for (Strategy st : {Strategy::kStandard, Strategy::kDelayed}) {
    p.strategy = st;
    const PolicyRun run = RunPolicy(s, p, 1);
    for (const VaccinationRecord& r : run.vaccination) {
      EXPECT_EQ(r.doses, 2);
      EXPECT_GE(r.second_day - r.first_day, p.second_dose_interval);
    }
  }
}

TEST(Run, DeathCurveIsCumulative) {
  const PolicyScenario s = Scenario(2000, 4.0, 2.5);
  const PolicyRun run = RunPolicy(s, PolicyConfig{}, 3);
  ASSERT_EQ(run.deaths_by_day.size(), static_cast<std::size_t>(PolicyConfig{}.total_days()));
  for (std::size_t d = 1; d < run.deaths_by_day.size(); ++d) {
    EXPECT_GE(run.deaths_by_day[d], run.deaths_by_day[d - 1]);
  }
  EXPECT_EQ(run.deaths, run.deaths_by_day.back());
}

TEST(Sweep, OneRowPerEfficacyAndCsvRoundTrip) {
  const PolicyScenario s = Scenario(1000, 4.0, 2.5);
  PolicyConfig p1, p2;
  p2.strategy = Strategy::kDelayed;
  const std::vector<double> eff = {0.5, 0.7, 0.9};
  const std::vector<std::uint64_t> seeds = {1, 2};
  const auto rows = SensitivitySweep(s, p1, p2, eff, seeds);
  ASSERT_EQ(rows.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(rows[i].efficacy, eff[i]);
    EXPECT_EQ(rows[i].seeds, 2);
    EXPECT_EQ(rows[i].decision, Decide(rows[i].relative_mortality));
  }
  std::stringstream buf;
  WriteSweepCsv(buf, rows);
  EXPECT_EQ(buf.str().rfind("efficacy,relative_mortality,decision,seeds\n", 0), 0u);
  const auto back = ReadSweepCsv(buf);
  ASSERT_EQ(back.size(), 3u);
  EXPECT_EQ(back[2].relative_mortality, rows[2].relative_mortality);
  EXPECT_EQ(back[2].decision, rows[2].decision);
  EXPECT_THROW(SensitivitySweep(s, p1, p2, std::vector<double>{0.5}, seeds), std::invalid_argument);
}

TEST(Decision, FollowsRatioRule) {
  EXPECT_EQ(Decide(0.99), "P2");
  EXPECT_EQ(Decide(1.01), "P1");
  EXPECT_EQ(Decide(1.0), "tie");
  EXPECT_EQ(Decide(std::numeric_limits<double>::quiet_NaN()), "undefined");
}

TEST(RankCorrelation, KnownValues) {
  const std::vector<double> x = {0.5, 0.6, 0.7, 0.8};
  EXPECT_DOUBLE_EQ(RankCorrelation(x, std::vector<double>{4, 3, 2, 1}), -1.0);
  EXPECT_DOUBLE_EQ(RankCorrelation(x, std::vector<double>{1, 5, 9, 20}), 1.0);
  // Ranks (1, 2.5, 2.5, 4) against (1, 2, 3, 4).
  EXPECT_NEAR(RankCorrelation(x, std::vector<double>{1, 2, 2, 3}), 4.5 / std::sqrt(5.0 * 4.5), 1e-15);
  EXPECT_THROW(RankCorrelation(x, std::vector<double>{1}), std::invalid_argument);
}

}  // namespace
}  // namespace diffabm
