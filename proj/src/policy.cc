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

#include <algorithm>
#include <cmath>
#include <exception>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <thread>

#include "diffabm/rng.h"

namespace diffabm {

Strategy ParseStrategy(const std::string& name) {
  if (name == "standard") return Strategy::kStandard;
  if (name == "delayed") return Strategy::kDelayed;
  throw std::invalid_argument("unknown strategy '" + name + "' (standard|delayed)");
}

VaccineMode ParseVaccineMode(const std::string& name) {
  if (name == "non-sterilizing") return VaccineMode::kNonSterilizing;
  if (name == "sterilizing") return VaccineMode::kSterilizing;
  throw std::invalid_argument("unknown vaccine mode '" + name +
                              "' (non-sterilizing|sterilizing)");
}

void PolicyConfig::Validate() const {
  auto fraction = [](double v, const char* what) {
    if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument(std::string(what) + " must lie in [0, 1]");
  };
  fraction(first_dose_efficacy, "first-dose efficacy");
  fraction(second_dose_efficacy, "second-dose efficacy");
  fraction(vaccination_rate, "vaccination rate");
  fraction(test_probability, "test probability");
  fraction(quarantine_compliance, "quarantine compliance");
  if (onset_delay < 0 || second_dose_interval < 1 || burn_in < 0 || horizon < 1 ||
      seed_infections < 0) {
    throw std::invalid_argument("policy intervals must be >= 1 day and counts >= 0");
  }
}

double CurrentEfficacy(const VaccinationRecord& r, const PolicyConfig& c, int day) {
  if (r.doses >= 2 && day >= r.second_day + c.onset_delay) return c.second_dose_efficacy;
  if (r.doses >= 1 && day >= r.first_day + c.onset_delay) return c.first_dose_efficacy;
  return 0.0;
}

VaccineEffect ApplyVaccineEffect(const VaccinationRecord& r, const PolicyConfig& c, int day) {
  const double e = CurrentEfficacy(r, c, day);
  VaccineEffect out;
  if (c.mode == VaccineMode::kNonSterilizing) {
    out.mortality = 1.0 - e;
  } else {
    out.susceptibility = 1.0 - e;
  }
  return out;
}

std::vector<std::int32_t> VaccinationQueue(std::span<const int> ages,
                                           std::span<const VaccinationRecord> records,
                                           const PolicyConfig& config, int day,
                                           std::size_t count) {
  if (ages.size() != records.size()) throw std::invalid_argument("queue: size mismatch");
  struct Entry {
    int tier;
    int age;
    std::int32_t agent;
  };
  const bool delayed = config.strategy == Strategy::kDelayed;
  std::vector<Entry> eligible;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const VaccinationRecord& r = records[i];
    if (r.deceased) continue;
    if (r.doses == 0) {
      eligible.push_back({delayed ? 0 : 1, ages[i], static_cast<std::int32_t>(i)});
    } else if (r.doses == 1 && day >= r.first_day + config.second_dose_interval) {
      eligible.push_back({delayed ? 1 : 0, ages[i], static_cast<std::int32_t>(i)});
    }
  }
  const std::size_t take = std::min(count, eligible.size());
  std::partial_sort(eligible.begin(), eligible.begin() + static_cast<std::ptrdiff_t>(take),
                    eligible.end(), [](const Entry& a, const Entry& b) {
                      if (a.tier != b.tier) return a.tier < b.tier;
                      if (a.age != b.age) return a.age > b.age;
                      return a.agent < b.agent;
                    });
  std::vector<std::int32_t> out;
  for (std::size_t k = 0; k < take; ++k) out.push_back(eligible[k].agent);
  return out;
}

std::array<double, kAgeBins> PolicyScenario::GeometricAgeProfile(double ratio) {
  std::array<double, kAgeBins> p{};
  double total = 0.0;
  for (int b = 0; b < kAgeBins; ++b) total += p[b] = std::pow(ratio, b);
  for (double& v : p) v *= kAgeBins / total;
  return p;
}

PolicyRun RunPolicy(const PolicyScenario& scenario, const PolicyConfig& config,
                    std::uint64_t seed) {
  config.Validate();
  const std::size_t n = scenario.agents.size();
  if (n == 0) throw std::invalid_argument("policy scenario has no agents");
  if (scenario.transmission.r.empty()) throw std::invalid_argument("policy scenario needs r");
  const int days = config.total_days();
  TransmissionParams tp = scenario.transmission;
  tp.r.assign(static_cast<std::size_t>(days), scenario.transmission.r[0]);
  HardSimulator sim(scenario.agents, scenario.network, tp, scenario.progression,
                    scenario.curve, seed);
  AgentModifiers& mod = sim.modifiers();
  mod.susceptibility.assign(n, 1.0);
  mod.transmission.assign(n, 1.0);
  mod.mortality.resize(n);
  for (std::size_t i = 0; i < n; ++i) mod.mortality[i] = scenario.age_mortality[scenario.agents[i].age_bin];

  PolicyRun run;
  {
    Population pick = scenario.agents;
    SeedInfections(pick, static_cast<double>(std::min<std::size_t>(config.seed_infections, n)) /
                             static_cast<double>(n),
                   seed);
    for (std::size_t i = 0; i < n; ++i) {
      if (pick[i].stage == Stage::kE) {
        sim.Expose(static_cast<std::int32_t>(i));
        run.infections += 1.0;
      }
    }
  }
  std::vector<int> ages(n);
  for (std::size_t i = 0; i < n; ++i) ages[i] = scenario.agents[i].age_bin;
  run.vaccination.assign(n, {});
  std::vector<std::uint8_t> detected(n, 0);
  const CounterRng rng(seed);
  const auto daily = static_cast<std::size_t>(
      std::floor(config.vaccination_rate * static_cast<double>(n) + 1e-9));

  for (int day = 0; day < days; ++day) {
    if (day >= config.burn_in && daily > 0) {
      for (std::int32_t i : VaccinationQueue(ages, run.vaccination, config, day, daily)) {
        VaccinationRecord& r = run.vaccination[i];
        if (r.doses == 0) {
          r.first_day = day;
        } else {
          r.second_day = day;
        }
        ++r.doses;
      }
    }
    const Population& agents = sim.agents();
    for (std::size_t i = 0; i < n; ++i) {
      if (!detected[i] && agents[i].stage == Stage::kI &&
          rng.Uniform(streams::kTesting, static_cast<std::uint64_t>(day), i) <
              config.test_probability) {
        detected[i] = 1;
      }
      const VaccineEffect e = ApplyVaccineEffect(run.vaccination[i], config, day);
      mod.susceptibility[i] = e.susceptibility;
      mod.mortality[i] = scenario.age_mortality[agents[i].age_bin] * e.mortality;
      mod.transmission[i] = detected[i] ? config.quarantine_compliance : 1.0;
    }
    run.infections += static_cast<double>(sim.Step().size());
    double dead = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (sim.agents()[i].stage == Stage::kM) {
        run.vaccination[i].deceased = true;
        dead += 1.0;
      }
    }
    run.deaths_by_day.push_back(dead);
  }
  run.deaths = run.deaths_by_day.empty() ? 0.0 : run.deaths_by_day.back();
  return run;
}

namespace {

template <typename F>
void ParallelFor(std::size_t count, int threads, F&& body) {
  if (threads <= 1 || count <= 1) {
    for (std::size_t k = 0; k < count; ++k) body(k);
    return;
  }
  const std::size_t workers = std::min<std::size_t>(threads, count);
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t k = w; k < count; k += workers) body(k);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

double Mean(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

PolicyOutcome RunPolicyExperiment(const PolicyScenario& scenario, const PolicyConfig& p1,
                                  const PolicyConfig& p2, std::span<const std::uint64_t> seeds,
                                  int threads) {
  if (seeds.empty()) throw std::invalid_argument("policy experiment needs seeds");
  PolicyOutcome out;
  const std::size_t s = seeds.size();
  out.deaths_p1.resize(s);
  out.deaths_p2.resize(s);
  out.infections_p1.resize(s);
  out.infections_p2.resize(s);
  ParallelFor(2 * s, threads, [&](std::size_t k) {
    const bool second = k >= s;
    const std::size_t i = second ? k - s : k;
    const PolicyRun run = RunPolicy(scenario, second ? p2 : p1, seeds[i]);
    (second ? out.deaths_p2 : out.deaths_p1)[i] = run.deaths;
    (second ? out.infections_p2 : out.infections_p1)[i] = run.infections;
  });
  out.mean_deaths_p1 = Mean(out.deaths_p1);
  out.mean_deaths_p2 = Mean(out.deaths_p2);
  out.mean_infections_p1 = Mean(out.infections_p1);
  out.mean_infections_p2 = Mean(out.infections_p2);
  out.relative_mortality = out.mean_deaths_p1 > 0.0
                               ? out.mean_deaths_p2 / out.mean_deaths_p1
                               : std::numeric_limits<double>::quiet_NaN();
  return out;
}

std::string Decide(double ratio) {
  if (std::isnan(ratio)) return "undefined";
  if (ratio < 1.0) return "P2";
  if (ratio > 1.0) return "P1";
  return "tie";
}

std::vector<SweepRow> SensitivitySweep(const PolicyScenario& scenario, const PolicyConfig& p1,
                                       const PolicyConfig& p2, std::span<const double> efficacies,
                                       std::span<const std::uint64_t> seeds, int threads) {
  if (efficacies.size() < 2) throw std::invalid_argument("sweep needs at least two efficacy values");
  std::vector<SweepRow> rows;
  for (double e : efficacies) {
    PolicyConfig a = p1, b = p2;
    a.first_dose_efficacy = e;
    b.first_dose_efficacy = e;
    const PolicyOutcome o = RunPolicyExperiment(scenario, a, b, seeds, threads);
    rows.push_back({e, o.relative_mortality, Decide(o.relative_mortality),
                    static_cast<int>(seeds.size())});
  }
  return rows;
}

void WriteSweepCsv(std::ostream& out, std::span<const SweepRow> rows) {
  out << "efficacy,relative_mortality,decision,seeds\n";
  char buf[64];
  for (const SweepRow& r : rows) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g", r.efficacy, r.relative_mortality);
    out << buf << ',' << r.decision << ',' << r.seeds << '\n';
  }
}

std::vector<SweepRow> ReadSweepCsv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "efficacy,relative_mortality,decision,seeds") {
    throw std::invalid_argument("sweep csv: expected header "
                                "'efficacy,relative_mortality,decision,seeds'");
  }
  std::vector<SweepRow> rows;
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::size_t begin = 0, comma;
    while ((comma = line.find(',', begin)) != std::string::npos) {
      f.push_back(line.substr(begin, comma - begin));
      begin = comma + 1;
    }
    f.push_back(line.substr(begin));
    if (f.size() != 4) throw std::invalid_argument("sweep csv row " + std::to_string(row) + ": expected 4 fields");
    try {
      rows.push_back({std::stod(f[0]), std::stod(f[1]), f[2], std::stoi(f[3])});
    } catch (const std::logic_error&) {
      throw std::invalid_argument("sweep csv row " + std::to_string(row) + ": bad number");
    }
  }
  return rows;
}

double RankCorrelation(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw std::invalid_argument("rank correlation needs two equal series of length >= 2");
  }
  auto ranks = [](std::span<const double> v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < idx.size();) {
      std::size_t j = i;
      while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
      const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
      for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
      i = j + 1;
    }
    return r;
  };
  const std::vector<double> rx = ranks(x), ry = ranks(y);
  const double mx = Mean(rx), my = Mean(ry);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace diffabm
