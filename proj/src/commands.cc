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

#include "diffabm/commands.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>
#include <ostream>
#include <stdexcept>

#include "diffabm/rng.h"

namespace diffabm {
namespace {

std::filesystem::path OutDir(const RunConfig& config) {
  std::filesystem::path dir(config.out);
  std::filesystem::create_directories(dir);
  return dir;
}

std::ofstream OpenOut(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

ContactNetwork NetworkFrom(const RunConfig& config, const PopulationConfig& pc) {
  if (!config.population.edges.empty()) return LoadEdgeListCsv(config.population.edges, pc.n);
  return BuildContactNetwork(pc);
}

const char* ParamName(Disease d, std::size_t col) {
  static const char* covid[] = {"r", "mortality", "i0_percent"};
  static const char* flu[] = {"r", "i0_percent"};
  return d == Disease::kCovid ? covid[col] : flu[col];
}

}  // namespace

std::uint64_t DeriveSeed(std::uint64_t root, std::string_view name, std::uint64_t index) {
  return CounterRng(root).Bits(StreamId(name), index);
}

PopulationConfig PopulationFrom(const RunConfig& config, std::uint64_t seed) {
  PopulationConfig pc;
  pc.n = config.population.n;
  pc.mean_degree = config.population.mean_degree;
  pc.rewire_probability = config.population.rewire;
  pc.age_distribution = config.population.age_distribution;
  pc.seed = seed;
  return pc;
}

TransmissionParams TransmissionFrom(const RunConfig& config, int steps) {
  TransmissionParams tp;
  tp.r = TransmissionParams::WeeklyToSteps(config.epi.r, steps);
  tp.susceptibility = config.epi.susceptibility;
  tp.transmissibility_e = config.epi.transmissibility_e;
  tp.transmissibility_i = config.epi.transmissibility_i;
  tp.i0 = config.epi.i0;
  return tp;
}

ProgressionParams ProgressionFrom(const RunConfig& config) {
  ProgressionParams p{config.epi.tau_ei, config.epi.tau_ir, config.epi.tau_im,
                      config.epi.mortality};
  p.Validate();
  return p;
}

// ---------------------------------------------------------------------------

RegionData LoadRegions(const RunConfig& config) {
  RegionData data;
  const Disease disease = config.epi.disease;
  if (config.calibration.targets.empty()) {
    SyntheticConfig sc;
    sc.disease = disease;
    sc.regions = config.synthetic.regions;
    sc.agents = config.synthetic.agents;
    sc.mean_degree = config.population.mean_degree;
    sc.rewire_probability = config.population.rewire;
    sc.weeks = config.synthetic.weeks;
    sc.perturbation = config.synthetic.perturbation;
    sc.temperature = config.calibration.temperature;
    sc.seed = DeriveSeed(config.seed, "synthetic");
    sc.start_date = config.synthetic.start;
    SyntheticBenchmark bench = GenerateSyntheticBenchmark(sc);
    data.models = std::move(bench.models);
    data.episodes = std::move(bench.episodes);
    return data;
  }
  data.episodes = LoadEpisodes(config.calibration.targets, config.calibration.features, disease);
  for (std::size_t i = 0; i < data.episodes.size(); ++i) {
    const EpisodeData& e = data.episodes[i];
    if (e.feature_names != data.episodes[0].feature_names) {
      throw std::invalid_argument("region " + e.region + ": has " +
                                  std::to_string(e.feature_names.size()) +
                                  " feature columns, region " + data.episodes[0].region +
                                  " has " + std::to_string(data.episodes[0].feature_names.size()));
    }
    auto model = MakeRegionModel(e.region, PopulationFrom(config, DeriveSeed(config.seed, "population", i)),
                                 disease);
    model->transmission.susceptibility = config.epi.susceptibility;
    model->transmission.transmissibility_e = config.epi.transmissibility_e;
    model->transmission.transmissibility_i = config.epi.transmissibility_i;
    model->progression.tau_ei = config.epi.tau_ei;
    model->progression.tau_ir = config.epi.tau_ir;
    model->progression.tau_im = config.epi.tau_im;
    model->curve = InfectiousnessCurve::Normalized(config.epi.curve_shape, config.epi.curve_scale);
    data.models.push_back(model);
  }
  return data;
}

CalibrationOutcome CalibrateRegions(const RunConfig& config,
                                    const std::vector<std::shared_ptr<RegionModel>>& models,
                                    std::span<const EpisodeData> windows, std::size_t weeks,
                                    const CalibNet* warm_start) {
  if (windows.size() != models.size()) throw std::invalid_argument("calibrate: region count mismatch");
  if (windows.empty()) throw std::invalid_argument("calibrate: no regions");
  const auto& cal = config.calibration;
  const Disease disease = models[0]->disease;

  std::vector<CalibrationTask> tasks;
  for (std::size_t i = 0; i < windows.size(); ++i) {
    const EpisodeData& w = windows[i];
    if (w.days() % 7 != 0 || w.days() == 0) {
      throw std::invalid_argument("region " + w.region + ": training window of " +
                                  std::to_string(w.days()) + " days is not whole weeks");
    }
    CalibrationTask task;
    task.model = models[i];
    task.features = PrepareFeatures(w, i, windows.size());
    task.target = w.target;
    if (cal.noise_lambda > 0.0) {
      task.target = AddObservationNoise(w.target, cal.noise_lambda, DeriveSeed(config.seed, "noise", i));
    }
    task.noise_seed = DeriveSeed(config.seed, "gumbel", i);
    if (warm_start && task.features.cols() != warm_start->config().input_dim) {
      throw std::invalid_argument("region " + w.region + ": " + std::to_string(task.features.cols()) +
                                  " feature columns, checkpoint expects " +
                                  std::to_string(warm_start->config().input_dim));
    }
    tasks.push_back(std::move(task));
  }

  TrainConfig tc;
  tc.learning_rate = cal.lr;
  tc.optimizer = cal.optimizer;
  tc.epochs = cal.epochs;
  tc.temperature = cal.temperature;
  tc.mode = cal.mode;
  tc.horizon_weeks = static_cast<int>(std::max<std::size_t>(weeks, tasks[0].train_weeks()) -
                                      tasks[0].train_weeks());
  tc.resample_noise = cal.resample_noise;
  tc.threads = config.threads;
  tc.log = [](const std::string&) {};

  CalibNetConfig nc;
  nc.input_dim = tasks[0].features.cols();
  nc.hidden_dim = static_cast<std::size_t>(cal.hidden_dim);
  nc.bounds = DefaultBounds(disease);
  auto make_net = [&](std::uint64_t index) {
    return warm_start ? *warm_start : CalibNet(nc, DeriveSeed(config.seed, "calibnet", index));
  };

  CalibrationOutcome out;
  switch (cal.mode) {
    case CalibrationMode::kC:
      for (std::size_t i = 0; i < tasks.size(); ++i) {
        tc.seed = DeriveSeed(config.seed, "init", i);
        CResult r = TrainC(tasks[i], DefaultBounds(disease), tc);
        out.theta.push_back(ExtendTheta(r.theta, weeks));
        out.history.insert(out.history.end(), r.history.begin(), r.history.end());
      }
      break;
    case CalibrationMode::kDC:
      for (std::size_t i = 0; i < tasks.size(); ++i) {
        CalibNet net = make_net(i);
        NetResult r = TrainDC(tasks[i], net, tc);
        out.theta.push_back(NetworkTheta(net, tasks[i], weeks));
        out.history.insert(out.history.end(), r.history.begin(), r.history.end());
        out.networks.push_back(std::move(net));
      }
      break;
    case CalibrationMode::kJDC: {
      CalibNet net = make_net(0);
      NetResult r = TrainJDC(tasks, net, tc);
      for (const CalibrationTask& t : tasks) out.theta.push_back(NetworkTheta(net, t, weeks));
      out.history = std::move(r.history);
      out.networks.push_back(std::move(net));
      break;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

LinearFit FitLine(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("fit needs >= 2 points");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0) throw std::invalid_argument("fit needs distinct x values");
  LinearFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.r2 = syy == 0.0 ? 1.0 : std::clamp(sxy * sxy / (sxx * syy), 0.0, 1.0);
  return f;
}

BenchPoint TimeHardRun(std::size_t directed_edges, int steps, int mean_degree, int repeats,
                       std::uint64_t seed) {
  PopulationConfig pc;
  pc.mean_degree = mean_degree;
  pc.n = std::max<std::size_t>(directed_edges / static_cast<std::size_t>(mean_degree),
                               static_cast<std::size_t>(mean_degree) + 1);
  pc.rewire_probability = 0.05;
  pc.seed = seed;
  Population agents = GeneratePopulation(pc);
  const ContactNetwork network = BuildContactNetwork(pc);
  SeedInfections(agents, 0.01, seed);
  TransmissionParams tp;
  tp.r.assign(static_cast<std::size_t>(steps), 2.5);
  const InfectiousnessCurve curve = InfectiousnessCurve::Normalized(2.0, 2.5);
  BenchPoint p{network.directed_count(), pc.n, steps, 0.0};
  for (int k = 0; k < repeats; ++k) {
    const auto t0 = std::chrono::steady_clock::now();
    const SimOutput out = RunSimulation(agents, network, tp, ProgressionParams{}, curve, {steps, seed});
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (out.census.empty()) throw std::logic_error("empty simulation");
    p.seconds = k == 0 ? s : std::min(p.seconds, s);
  }
  return p;
}

OracleReport RunOracle(const Population& seeded, const ContactNetwork& network,
                       const TransmissionParams& transmission,
                       const ProgressionParams& progression, const InfectiousnessCurve& curve,
                       int steps, int samples, double temperature, int relaxed_samples,
                       std::uint64_t seed) {
  if (samples < 2) throw std::invalid_argument("oracle needs at least 2 Monte Carlo samples");
  OracleReport r;
  r.samples = samples;
  r.exact = ExactExpectedTarget(seeded, network, transmission, progression, curve, steps);
  double sum = 0.0, sq = 0.0;
  for (int s = 0; s < samples; ++s) {
    const double y = RunSimulation(seeded, network, transmission, progression, curve,
                                   {steps, DeriveSeed(seed, "oracle-mc", s)})
                         .final_target();
    sum += y;
    sq += y * y;
  }
  r.mc_mean = sum / samples;
  const double var = std::max(0.0, (sq - samples * r.mc_mean * r.mc_mean) / (samples - 1));
  r.mc_stderr = std::sqrt(var / samples);
  double relaxed = 0.0;
  for (int s = 0; s < relaxed_samples; ++s) {
    ad::Tape tape;
    const DiffParams params = DiffParams::Constants(tape, transmission, progression);
    DiffOptions opt;
    opt.steps = steps;
    opt.seed = DeriveSeed(seed, "oracle-relaxed", s);
    opt.temperature = temperature;
    opt.seeding = Seeding::kPopulation;
    relaxed += RunDifferentiable(tape, seeded, network, params, transmission, progression, curve, opt)
                   .final_target()
                   .item();
  }
  r.relaxed_mean = relaxed_samples > 0 ? relaxed / relaxed_samples : 0.0;
  return r;
}

PolicyScenario PolicyScenarioFrom(const RunConfig& config) {
  PolicyScenario s;
  const PopulationConfig pc = PopulationFrom(config, DeriveSeed(config.seed, "population"));
  s.agents = GeneratePopulation(pc);
  s.network = NetworkFrom(config, pc);
  s.transmission = TransmissionFrom(config, 1);
  s.transmission.r = {config.policy.r};
  s.progression = ProgressionFrom(config);
  s.curve = InfectiousnessCurve::Normalized(config.epi.curve_shape, config.epi.curve_scale);
  s.age_mortality = PolicyScenario::GeometricAgeProfile(config.policy.age_mortality_ratio);
  return s;
}

// ---------------------------------------------------------------------------

int CmdSimulate(const RunConfig& config, std::ostream& report) {
  const PopulationConfig pc = PopulationFrom(config, DeriveSeed(config.seed, "population"));
  Population agents = GeneratePopulation(pc);
  const ContactNetwork network = NetworkFrom(config, pc);
  SeedInfections(agents, config.epi.i0, DeriveSeed(config.seed, "seeding"));
  const int steps = config.epi.steps;
  const SimOutput out =
      RunSimulation(agents, network, TransmissionFrom(config, steps), ProgressionFrom(config),
                    InfectiousnessCurve::Normalized(config.epi.curve_shape, config.epi.curve_scale),
                    {steps, DeriveSeed(config.seed, "simulation")});
  const auto dir = OutDir(config);
  {
    std::ofstream csv = OpenOut(dir / "census.csv");
    csv << "step,S,E,I,R,M\n";
    for (std::size_t t = 0; t < out.census.size(); ++t) {
      csv << t;
      for (double v : out.census[t]) csv << ',' << FormatDouble(v);
      csv << '\n';
    }
  }
  const double infections =
      std::accumulate(out.new_infections.begin(), out.new_infections.end(), 0.0);
  std::ofstream summary = OpenOut(dir / "summary.csv");
  summary << "key,value\n"
          << "agents," << agents.size() << '\n'
          << "directed_edges," << network.directed_count() << '\n'
          << "steps," << steps << '\n'
          << "seeded," << FormatDouble(out.census[0][1]) << '\n'
          << "new_infections," << FormatDouble(infections) << '\n'
          << "deaths," << FormatDouble(out.deaths.back()) << '\n'
          << "final_target," << FormatDouble(out.final_target()) << '\n';
  report << "simulated " << agents.size() << " agents for " << steps << " steps: "
         << infections << " new infections, " << out.deaths.back() << " deaths\n";
  return 0;
}

int CmdCalibrate(const RunConfig& config, std::ostream& report) {
  RegionData data = LoadRegions(config);
  std::size_t train_weeks = config.calibration.train_weeks;
  std::vector<EpisodeData> windows;
  for (const EpisodeData& e : data.episodes) {
    const std::size_t weeks = train_weeks ? train_weeks : e.days() / 7;
    if (weeks == 0 || 7 * weeks > e.days()) {
      throw std::invalid_argument("region " + e.region + ": " + std::to_string(e.days()) +
                                  " days cannot cover " + std::to_string(weeks) + " training weeks");
    }
    windows.push_back(e.Truncate(7 * weeks));
  }
  const std::size_t weeks = windows[0].days() / 7 + config.calibration.horizon_weeks;
  const CalibrationOutcome result = CalibrateRegions(config, data.models, windows, weeks);

  const auto dir = OutDir(config);
  {
    std::ofstream csv = OpenOut(dir / "loss.csv");
    WriteLossCsv(csv, result.history);
  }
  {
    std::ofstream csv = OpenOut(dir / "theta.csv");
    csv << "region,week,param,value\n";
    for (std::size_t r = 0; r < result.theta.size(); ++r) {
      const ad::Tensor& th = result.theta[r];
      for (std::size_t w = 0; w < th.rows(); ++w) {
        for (std::size_t c = 0; c < th.cols(); ++c) {
          csv << windows[r].region << ',' << w << ',' << ParamName(data.models[r]->disease, c) << ','
              << FormatDouble(th.at(w, c)) << '\n';
        }
      }
    }
  }
  if (config.calibration.mode == CalibrationMode::kDC) {
    for (std::size_t r = 0; r < result.networks.size(); ++r) {
      result.networks[r].Save((dir / ("checkpoint_" + windows[r].region + ".txt")).string());
    }
  } else if (config.calibration.mode == CalibrationMode::kJDC) {
    result.networks[0].Save((dir / "checkpoint.txt").string());
  }
  // First and best loss per region.
  for (const EpisodeData& w : windows) {
    double first = NAN, best = INFINITY;
    for (const LossRecord& l : result.history) {
      if (l.region != w.region) continue;
      if (std::isnan(first)) first = l.loss;
      best = std::min(best, l.loss);
    }
    report << w.region << ": initial loss " << first << ", best loss " << best << '\n';
  }
  return 0;
}

int CmdForecast(const RunConfig& config, const std::string& checkpoint, std::ostream& report) {
  const auto& ev = config.evaluation;
  if (ev.anchors.empty()) throw std::invalid_argument("forecast: no anchor weeks given");
  RegionData data = LoadRegions(config);
  std::optional<CalibNet> warm;
  if (!checkpoint.empty()) {
    if (config.calibration.mode == CalibrationMode::kC) {
      throw std::invalid_argument("forecast: a checkpoint needs mode dc or jdc");
    }
    warm = CalibNet::Load(checkpoint);
  }
  const Calibrator calibrator = [&](std::span<const EpisodeData> windows, int horizon_days) {
    const std::size_t train_weeks = windows[0].days() / 7;
    const std::size_t weeks = train_weeks + static_cast<std::size_t>((horizon_days + 6) / 7);
    const CalibrationOutcome result =
        CalibrateRegions(config, data.models, windows, weeks, warm ? &*warm : nullptr);
    std::vector<std::vector<double>> out;
    for (std::size_t r = 0; r < windows.size(); ++r) {
      const int train_days = static_cast<int>(windows[r].days());
      const SimSettings settings{config.calibration.temperature, DeriveSeed(config.seed, "gumbel", r)};
      const std::vector<double> series = SimulateSeriesValues(
          *data.models[r], result.theta[r], train_days + horizon_days, ev.report, settings, ev.samples);
      out.emplace_back(series.begin() + train_days, series.end());
    }
    return out;
  };
  ForecastOptions options{ev.horizon_weeks, ev.min_train_weeks};
  std::vector<std::string> diagnostics;
  const std::vector<Forecast> forecasts =
      RealTimeForecast(data.episodes, ev.anchors, calibrator, options, &diagnostics);
  for (const std::string& d : diagnostics) report << "warning: " << d << '\n';
  if (forecasts.empty()) throw std::runtime_error("forecast: no anchor week could be forecast");
  const std::vector<RegionMetrics> metrics =
      EvaluateForecasts(data.episodes, forecasts, ev.rmse_no_sqrt);
  const auto dir = OutDir(config);
  {
    std::ofstream csv = OpenOut(dir / "forecast.csv");
    WriteForecastCsv(csv, forecasts);
  }
  {
    std::ofstream csv = OpenOut(dir / "metrics.csv");
    WriteMetricsCsv(csv, metrics);
  }
  for (const RegionMetrics& m : metrics) {
    report << m.region << ": nd " << m.report.nd << ", rmse " << m.report.rmse << ", mae "
           << m.report.mae << " over " << m.pairs << " pairs\n";
  }
  return 0;
}

int CmdBench(const RunConfig& config, std::ostream& report) {
  std::vector<BenchPoint> points;
  for (double e : config.bench.edges) {
    if (!(e >= 1.0)) throw std::invalid_argument("bench: edge counts must be positive");
    points.push_back(TimeHardRun(static_cast<std::size_t>(std::llround(e)), config.bench.steps,
                                 config.population.mean_degree, config.bench.repeats,
                                 DeriveSeed(config.seed, "bench")));
    report << points.back().directed_edges << " directed edges, " << config.bench.steps
           << " steps: " << points.back().seconds << " s\n";
  }
  const auto dir = OutDir(config);
  {
    std::ofstream csv = OpenOut(dir / "bench.csv");
    csv << "directed_edges,agents,steps,seconds\n";
    for (const BenchPoint& p : points) {
      csv << p.directed_edges << ',' << p.agents << ',' << p.steps << ',' << FormatDouble(p.seconds) << '\n';
    }
  }
  std::vector<double> x, y;
  for (const BenchPoint& p : points) {
    x.push_back(static_cast<double>(p.directed_edges));
    y.push_back(p.seconds);
  }
  std::ofstream fit = OpenOut(dir / "bench_fit.csv");
  fit << "slope,intercept,r2\n";
  if (std::set<double>(x.begin(), x.end()).size() < 2) {
    report << "fit skipped: fewer than two distinct edge counts\n";
    return 0;
  }
  const LinearFit f = FitLine(x, y);
  fit << FormatDouble(f.slope) << ',' << FormatDouble(f.intercept) << ',' << FormatDouble(f.r2) << '\n';
  report << "fit: seconds = " << f.slope << " * edges + " << f.intercept << ", R^2 = " << f.r2 << '\n';
  return 0;
}

int CmdPolicy(const RunConfig& config, std::ostream& report) {
  const auto& pol = config.policy;
  if (pol.efficacy.empty()) throw std::invalid_argument("policy: no first-dose efficacy values given");
  const PolicyScenario scenario = PolicyScenarioFrom(config);
  PolicyConfig base;
  base.second_dose_efficacy = pol.second_dose_efficacy;
  base.onset_delay = pol.onset_delay;
  base.second_dose_interval = pol.second_dose_interval;
  base.vaccination_rate = pol.vaccination_rate;
  base.burn_in = pol.burn_in;
  base.seed_infections = pol.seed_infections;
  base.horizon = pol.horizon;
  base.mode = ParseVaccineMode(pol.vaccine);
  base.test_probability = pol.test_probability;
  base.quarantine_compliance = pol.quarantine_compliance;
  PolicyConfig p1 = base, p2 = base;
  p1.strategy = ParseStrategy(pol.p1);
  p2.strategy = ParseStrategy(pol.p2);
  std::vector<std::uint64_t> seeds;
  for (int s = 0; s < pol.seeds; ++s) seeds.push_back(DeriveSeed(config.seed, "policy", s));
  std::vector<SweepRow> rows;
  for (double e : pol.efficacy) {
    PolicyConfig a = p1, b = p2;
    a.first_dose_efficacy = b.first_dose_efficacy = e;
    const PolicyOutcome o = RunPolicyExperiment(scenario, a, b, seeds, config.threads);
    rows.push_back({e, o.relative_mortality, Decide(o.relative_mortality), pol.seeds});
    report << "efficacy " << e << ": deaths P1 " << o.mean_deaths_p1 << ", P2 " << o.mean_deaths_p2
           << ", relative mortality " << o.relative_mortality << " -> " << rows.back().decision << '\n';
  }
  std::ofstream csv = OpenOut(OutDir(config) / "policy.csv");
  WriteSweepCsv(csv, rows);
  return 0;
}

int CmdOracle(const RunConfig& config, std::ostream& report) {
  const int steps = config.epi.steps;
  if (config.population.n > 10) {
    throw std::invalid_argument("oracle: n = " + std::to_string(config.population.n) +
                                " exceeds the enumeration limit of 10");
  }
  if (steps < 1 || steps > 3) {
    throw std::invalid_argument("oracle: steps = " + std::to_string(steps) + " outside 1..3");
  }
  PopulationConfig pc = PopulationFrom(config, DeriveSeed(config.seed, "population"));
  ContactNetwork network;
  if (!config.population.edges.empty()) {
    network = LoadEdgeListCsv(config.population.edges, pc.n);
  } else if (static_cast<std::size_t>(pc.mean_degree) < pc.n) {
    network = BuildContactNetwork(pc);
  } else {
    // Too few agents for the configured degree: a path graph.
    std::vector<std::pair<std::int32_t, std::int32_t>> edges;
    for (std::size_t i = 0; i + 1 < pc.n; ++i) {
      edges.emplace_back(static_cast<std::int32_t>(i), static_cast<std::int32_t>(i + 1));
    }
    network = ContactNetwork::FromUndirected(pc.n, edges);
    pc.mean_degree = 2;
  }
  Population agents = GeneratePopulation({pc.n, pc.age_distribution, 2, 0.0, pc.seed});
  SeedInfections(agents, config.epi.i0, DeriveSeed(config.seed, "seeding"));
  const OracleReport r = RunOracle(
      agents, network, TransmissionFrom(config, steps), ProgressionFrom(config),
      InfectiousnessCurve::Normalized(config.epi.curve_shape, config.epi.curve_scale), steps,
      config.oracle.samples, config.oracle.temperature, config.oracle.relaxed_samples,
      DeriveSeed(config.seed, "oracle"));
  const double z = r.mc_stderr > 0 ? (r.mc_mean - r.exact) / r.mc_stderr : 0.0;
  report << "exact E[y]        " << FormatDouble(r.exact) << '\n'
         << "monte carlo mean  " << FormatDouble(r.mc_mean) << " +- " << FormatDouble(r.mc_stderr)
         << " (" << r.samples << " runs, z = " << z << ")\n"
         << "relaxed mean      " << FormatDouble(r.relaxed_mean) << " (temperature "
         << config.oracle.temperature << ")\n"
         << "delta mc          " << FormatDouble(r.mc_mean - r.exact) << '\n'
         << "delta relaxed     " << FormatDouble(r.relaxed_mean - r.exact) << '\n';
  return 0;
}

int CmdSynth(const RunConfig& config, std::ostream& report) {
  RunConfig c = config;
  c.calibration.targets.clear();
  c.calibration.features.clear();
  const RegionData data = LoadRegions(c);
  const auto dir = OutDir(config);
  {
    std::ofstream csv = OpenOut(dir / "targets.csv");
    WriteTargetCsv(csv, data.episodes);
  }
  {
    std::ofstream csv = OpenOut(dir / "features.csv");
    WriteFeatureCsv(csv, data.episodes);
  }
  report << "wrote " << data.episodes.size() << " regions of " << data.episodes[0].days()
         << " days\n";
  return 0;
}

}  // namespace diffabm
