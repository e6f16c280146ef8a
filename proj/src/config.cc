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

#include "diffabm/config.h"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>

#include "diffabm/eval.h"

namespace diffabm {
namespace {

std::string Trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> SplitList(const std::string& s) {
  std::vector<std::string> out;
  std::size_t begin = 0;
  while (true) {
    const auto comma = s.find(',', begin);
    out.push_back(Trim(s.substr(begin, comma == std::string::npos ? std::string::npos : comma - begin)));
    if (comma == std::string::npos) break;
    begin = comma + 1;
  }
  return out;
}

template <typename T>
T ParseNumber(const std::string& text) {
  T v{};
  const char* end = text.data() + text.size();
  auto [p, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || p != end || text.empty()) {
    throw std::invalid_argument("expected a number, got '" + text + "'");
  }
  return v;
}

bool ParseBool(const std::string& text) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw std::invalid_argument("expected true or false, got '" + text + "'");
}

struct Binding {
  std::function<void(const std::string&)> set;
  std::function<std::string()> get;
};

template <typename T>
Binding Number(T& field) {
  return {[&field](const std::string& v) { field = ParseNumber<T>(v); },
          [&field] {
            if constexpr (std::is_floating_point_v<T>) return FormatDouble(field);
            else return std::to_string(field);
          }};
}

Binding Text(std::string& field) {
  return {[&field](const std::string& v) { field = v; }, [&field] { return field; }};
}

Binding Flag(bool& field) {
  return {[&field](const std::string& v) { field = ParseBool(v); },
          [&field] { return std::string(field ? "true" : "false"); }};
}

template <typename Container>
Binding List(Container& field, std::size_t exact = 0) {
  using T = typename Container::value_type;
  return {[&field, exact](const std::string& v) {
            std::vector<T> values;
            if (!Trim(v).empty()) {
              for (const std::string& item : SplitList(v)) values.push_back(ParseNumber<T>(item));
            }
            if constexpr (requires { field.push_back(T{}); }) {
              if (exact && values.size() != exact) {
                throw std::invalid_argument("expected " + std::to_string(exact) + " values");
              }
              field.assign(values.begin(), values.end());
            } else {
              if (values.size() != field.size()) {
                throw std::invalid_argument("expected " + std::to_string(field.size()) + " values");
              }
              std::copy(values.begin(), values.end(), field.begin());
            }
          },
          [&field] {
            std::string s;
            for (const T& x : field) {
              if (!s.empty()) s += ",";
              if constexpr (std::is_floating_point_v<T>) s += FormatDouble(x);
              else s += std::to_string(x);
            }
            return s;
          }};
}

Binding Optional(std::optional<double>& field) {
  return {[&field](const std::string& v) {
            if (v.empty()) field.reset();
            else field = ParseNumber<double>(v);
          },
          [&field] { return field ? FormatDouble(*field) : std::string(); }};
}

template <typename E>
Binding Choice(E& field, E (*parse)(const std::string&), const char* (*name)(E)) {
  return {[&field, parse](const std::string& v) { field = parse(v); },
          [&field, name] { return std::string(name(field)); }};
}

const char* OptimizerName(OptimizerKind k) { return k == OptimizerKind::kAdam ? "adam" : "sgd"; }
OptimizerKind ParseOptimizer(const std::string& s) {
  if (s == "adam") return OptimizerKind::kAdam;
  if (s == "sgd") return OptimizerKind::kSgd;
  throw std::invalid_argument("unknown optimizer '" + s + "' (adam|sgd)");
}
const char* ReportName(ReportMode m) { return m == ReportMode::kHard ? "hard" : "relaxed"; }

std::map<std::string, Binding> Bindings(RunConfig& c) {
  std::map<std::string, Binding> b;
  b["run.seed"] = Number(c.seed);
  b["run.threads"] = Number(c.threads);
  b["run.out"] = Text(c.out);

  auto& p = c.population;
  b["population.n"] = Number(p.n);
  b["population.mean_degree"] = Number(p.mean_degree);
  b["population.rewire"] = Number(p.rewire);
  b["population.age_distribution"] = List(p.age_distribution);
  b["population.edges"] = Text(p.edges);

  auto& e = c.epi;
  b["epi.disease"] = Choice(e.disease, &ParseDisease, &DiseaseName);
  b["epi.r"] = List(e.r);
  b["epi.i0"] = Number(e.i0);
  b["epi.mortality"] = Number(e.mortality);
  b["epi.tau_ei"] = Number(e.tau_ei);
  b["epi.tau_ir"] = Number(e.tau_ir);
  b["epi.tau_im"] = Number(e.tau_im);
  b["epi.steps"] = Number(e.steps);
  b["epi.transmissibility_e"] = Number(e.transmissibility_e);
  b["epi.transmissibility_i"] = Number(e.transmissibility_i);
  b["epi.susceptibility"] = List(e.susceptibility);
  b["epi.curve_shape"] = Number(e.curve_shape);
  b["epi.curve_scale"] = Number(e.curve_scale);

  auto& s = c.synthetic;
  b["synthetic.regions"] = Number(s.regions);
  b["synthetic.agents"] = Number(s.agents);
  b["synthetic.weeks"] = Number(s.weeks);
  b["synthetic.perturbation"] = Number(s.perturbation);
  b["synthetic.start"] = Text(s.start);

  auto& k = c.calibration;
  b["calibration.mode"] = Choice(k.mode, &ParseCalibrationMode, &CalibrationModeName);
  b["calibration.epochs"] = Number(k.epochs);
  b["calibration.lr"] = Number(k.lr);
  b["calibration.optimizer"] = Choice(k.optimizer, &ParseOptimizer, &OptimizerName);
  b["calibration.hidden_dim"] = Number(k.hidden_dim);
  b["calibration.horizon_weeks"] = Number(k.horizon_weeks);
  b["calibration.resample_noise"] = Flag(k.resample_noise);
  b["calibration.temperature"] = Number(k.temperature);
  b["calibration.train_weeks"] = Number(k.train_weeks);
  b["calibration.noise_lambda"] = Number(k.noise_lambda);
  b["calibration.targets"] = Text(k.targets);
  b["calibration.features"] = Text(k.features);

  auto& v = c.evaluation;
  b["evaluation.anchors"] = List(v.anchors);
  b["evaluation.horizon_weeks"] = Number(v.horizon_weeks);
  b["evaluation.min_train_weeks"] = Number(v.min_train_weeks);
  b["evaluation.report"] = Choice(v.report, &ParseReportMode, &ReportName);
  b["evaluation.samples"] = Number(v.samples);
  b["evaluation.rmse_no_sqrt"] = Flag(v.rmse_no_sqrt);

  auto& q = c.policy;
  b["policy.efficacy"] = List(q.efficacy);
  b["policy.second_dose_efficacy"] = Number(q.second_dose_efficacy);
  b["policy.onset_delay"] = Number(q.onset_delay);
  b["policy.second_dose_interval"] = Number(q.second_dose_interval);
  b["policy.vaccination_rate"] = Number(q.vaccination_rate);
  b["policy.burn_in"] = Number(q.burn_in);
  b["policy.seed_infections"] = Number(q.seed_infections);
  b["policy.horizon"] = Number(q.horizon);
  b["policy.vaccine"] = Text(q.vaccine);
  b["policy.test_probability"] = Number(q.test_probability);
  b["policy.quarantine_compliance"] = Number(q.quarantine_compliance);
  b["policy.r"] = Number(q.r);
  b["policy.age_mortality_ratio"] = Number(q.age_mortality_ratio);
  b["policy.seeds"] = Number(q.seeds);
  b["policy.p1"] = Text(q.p1);
  b["policy.p2"] = Text(q.p2);

  b["bench.edges"] = List(c.bench.edges);
  b["bench.steps"] = Number(c.bench.steps);
  b["bench.repeats"] = Number(c.bench.repeats);

  b["oracle.samples"] = Number(c.oracle.samples);
  b["oracle.temperature"] = Number(c.oracle.temperature);
  b["oracle.relaxed_samples"] = Number(c.oracle.relaxed_samples);

  b["expert.r0"] = Optional(c.expert.r0);
  b["expert.cfr"] = Optional(c.expert.cfr);
  b["expert.r0_flu"] = Optional(c.expert.r0_flu);
  return b;
}

void RequireFile(const std::string& path, const char* key) {
  if (!path.empty() && !std::filesystem::is_regular_file(path)) {
    throw ConfigError(std::string(key) + ": file not found: " + path);
  }
}

}  // namespace

void RunConfig::Validate() const {
  auto fail = [](const std::string& m) { throw ConfigError(m); };
  if (threads < 1) fail("run.threads must be >= 1");
  if (population.n == 0) fail("population.n must be positive");
  if (epi.r.empty()) fail("epi.r needs at least one value");
  if (epi.steps < 1) fail("epi.steps must be >= 1");
  if (!(epi.i0 >= 0 && epi.i0 <= 1)) fail("epi.i0 must lie in [0, 1]");
  if (calibration.epochs < 0) fail("calibration.epochs must be >= 0");
  if (calibration.hidden_dim < 1) fail("calibration.hidden_dim must be >= 1");
  if (evaluation.samples < 1) fail("evaluation.samples must be >= 1");
  if (policy.seeds < 1) fail("policy.seeds must be >= 1");
  if (bench.steps < 1 || bench.repeats < 1) fail("bench.steps and bench.repeats must be >= 1");
  if (calibration.features.size() && calibration.targets.empty()) {
    fail("calibration.features requires calibration.targets");
  }
  RequireFile(population.edges, "population.edges");
  RequireFile(calibration.targets, "calibration.targets");
  RequireFile(calibration.features, "calibration.features");
}

RunConfig ParseConfig(std::istream& in, const std::string& source) {
  RunConfig config;
  auto bindings = Bindings(config);
  std::set<std::string> seen;
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const std::string text = Trim(line);
    if (text.empty() || text[0] == '#' || text[0] == ';') continue;
    auto fail = [&](const std::string& m) {
      throw ConfigError(source + ":" + std::to_string(number) + ": " + m);
    };
    const auto eq = text.find('=');
    if (eq == std::string::npos) fail("expected 'section.key = value'");
    const std::string key = Trim(text.substr(0, eq));
    const std::string value = Trim(text.substr(eq + 1));
    auto it = bindings.find(key);
    if (it == bindings.end()) fail("unknown key '" + key + "'");
    if (!seen.insert(key).second) fail("duplicate key '" + key + "'");
    try {
      it->second.set(value);
    } catch (const std::exception& e) {
      fail(key + ": " + e.what());
    }
  }
  try {
    config.Validate();
  } catch (const ConfigError& e) {
    throw ConfigError(source + ": " + e.what());
  }
  return config;
}

RunConfig LoadConfig(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  return ParseConfig(in, path);
}

void WriteConfig(std::ostream& out, const RunConfig& config) {
  RunConfig copy = config;
  for (const auto& [key, binding] : Bindings(copy)) out << key << " = " << binding.get() << '\n';
}

}  // namespace diffabm
