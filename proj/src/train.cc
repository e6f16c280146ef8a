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

#include "diffabm/train.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <iostream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "diffabm/rng.h"

namespace diffabm {

using ad::Tensor;
using ad::Value;

const char* DiseaseName(Disease d) { return d == Disease::kCovid ? "covid" : "flu"; }

Disease ParseDisease(const std::string& name) {
  if (name == "covid") return Disease::kCovid;
  if (name == "flu") return Disease::kFlu;
  throw std::invalid_argument("unknown disease '" + name + "' (covid|flu)");
}

ParamBounds DefaultBounds(Disease d) {
  return d == Disease::kCovid ? ParamBounds::Covid() : ParamBounds::Flu();
}

ReportMode ParseReportMode(const std::string& name) {
  if (name == "relaxed") return ReportMode::kRelaxed;
  if (name == "hard") return ReportMode::kHard;
  throw std::invalid_argument("unknown report mode '" + name + "' (relaxed|hard)");
}

CalibrationMode ParseCalibrationMode(const std::string& name) {
  if (name == "c") return CalibrationMode::kC;
  if (name == "dc") return CalibrationMode::kDC;
  if (name == "jdc") return CalibrationMode::kJDC;
  throw std::invalid_argument("unknown calibration mode '" + name + "' (c|dc|jdc)");
}

const char* CalibrationModeName(CalibrationMode m) {
  switch (m) {
    case CalibrationMode::kC: return "c";
    case CalibrationMode::kDC: return "dc";
    case CalibrationMode::kJDC: return "jdc";
  }
  return "?";
}

namespace {

std::size_t ParamDim(Disease d) { return d == Disease::kCovid ? 3 : 2; }

void CheckTheta(const RegionModel& model, const ad::Shape& s) {
  if (s.cols != ParamDim(model.disease) || s.rows == 0) {
    throw std::invalid_argument("region " + model.name + ": parameter rows " +
                                s.ToString() + " do not match disease " +
                                DiseaseName(model.disease));
  }
}

Tensor WeekExpansion(int steps, std::size_t weeks) {
  Tensor e({static_cast<std::size_t>(steps), weeks});
  for (int t = 0; t < steps; ++t) {
    e.at(t, std::min<std::size_t>(t / 7, weeks - 1)) = 1.0;
  }
  return e;
}

}  // namespace

Value SimulateSeries(ad::Tape& tape, const RegionModel& model, Value theta, int steps,
                     const SimSettings& settings) {
  CheckTheta(model, theta.shape());
  const std::size_t d = theta.shape().cols;
  DiffParams p;
  p.r_per_step = ad::MatMul(tape.Constant(WeekExpansion(steps, theta.shape().rows)),
                            ad::SliceCols(theta, 0, 1));
  p.susceptibility = tape.Constant(ad::Tensor::Column(std::vector<double>(
      model.transmission.susceptibility.begin(), model.transmission.susceptibility.end())));
  const Value first = ad::SliceRows(theta, 0, 1);
  p.mortality = model.disease == Disease::kCovid ? ad::SliceCols(first, 1, 2)
                                                 : tape.Constant(model.progression.mortality);
  p.i0 = ad::SliceCols(first, d - 1, d) * 0.01;
  DiffOptions opt;
  opt.steps = steps;
  opt.seed = settings.noise_seed;
  opt.relaxation = Relaxation::kSoft;
  opt.temperature = settings.temperature;
  opt.seeding = Seeding::kMeanField;
  const DiffSimOutput out = RunDifferentiable(tape, model.agents, model.network, p,
                                              model.transmission, model.progression,
                                              model.curve, opt);
  return model.disease == Disease::kCovid ? out.DailyTarget()
                                          : out.DailyIncidencePercent(model.agents.size());
}

std::vector<double> SimulateSeriesValues(const RegionModel& model, const Tensor& theta,
                                         int steps, ReportMode mode,
                                         const SimSettings& settings, int samples) {
  CheckTheta(model, theta.shape());
  if (mode == ReportMode::kRelaxed) {
    ad::Tape tape;
    return SimulateSeries(tape, model, tape.Constant(theta), steps, settings).data().vec();
  }
  if (samples < 1) throw std::invalid_argument("need at least one sample");
  const std::size_t d = theta.cols();
  TransmissionParams tp = model.transmission;
  tp.r.resize(static_cast<std::size_t>(steps));
  for (int t = 0; t < steps; ++t) tp.r[t] = theta.at(std::min<std::size_t>(t / 7, theta.rows() - 1), 0);
  tp.i0 = theta.at(0, d - 1) / 100.0;
  ProgressionParams pp = model.progression;
  if (model.disease == Disease::kCovid) pp.mortality = theta.at(0, 1);
  std::vector<double> mean(static_cast<std::size_t>(steps), 0.0);
  for (int s = 0; s < samples; ++s) {
    const std::uint64_t seed = Mix64(settings.noise_seed + static_cast<std::uint64_t>(s));
    Population agents = model.agents;
    SeedInfections(agents, tp.i0, seed);
    const SimOutput out =
        RunSimulation(agents, model.network, tp, pp, model.curve, {steps, seed});
    const std::vector<double> y = model.disease == Disease::kCovid
                                      ? out.DailyTarget()
                                      : out.DailyIncidencePercent();
    for (int t = 0; t < steps; ++t) mean[t] += y[t] / samples;
  }
  return mean;
}

Tensor ExtendTheta(const Tensor& theta, std::size_t weeks) {
  if (theta.rows() == 0) throw std::invalid_argument("empty parameter rows");
  Tensor out({std::max(weeks, theta.rows()), theta.cols()});
  for (std::size_t r = 0; r < out.rows(); ++r) {
    const std::size_t src = std::min(r, theta.rows() - 1);
    for (std::size_t c = 0; c < theta.cols(); ++c) out.at(r, c) = theta.at(src, c);
  }
  return out;
}

Value MseLoss(Value predicted, Value observed) {
  if (predicted.shape() != observed.shape() || predicted.shape().size() == 0) {
    throw std::invalid_argument("mse: length mismatch " + predicted.shape().ToString() +
                                " vs " + observed.shape().ToString());
  }
  const Value diff = predicted - observed;
  return ad::Mean(diff * diff);
}

Value MseLoss(Value predicted, std::span<const double> observed) {
  Tensor t(predicted.shape());
  if (t.size() != observed.size()) {
    throw std::invalid_argument("mse: " + std::to_string(t.size()) + " predictions vs " +
                                std::to_string(observed.size()) + " observations");
  }
  std::copy(observed.begin(), observed.end(), t.vec().begin());
  return MseLoss(predicted, predicted.tape()->Constant(std::move(t)));
}

void TrainConfig::Validate() const {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning rate must be > 0");
  if (epochs < 0) throw std::invalid_argument("epochs must be >= 0");
  if (!(temperature > 0.0)) throw std::invalid_argument("temperature must be > 0");
  if (horizon_weeks < 0) throw std::invalid_argument("horizon weeks must be >= 0");
  if (threads < 1) throw std::invalid_argument("threads must be >= 1");
}

Optimizer::Optimizer(const TrainConfig& config) : config_(config) {}

bool Optimizer::Step(std::vector<Tensor>& params, const std::vector<Tensor>& grads) {
  if (params.size() != grads.size()) {
    throw std::invalid_argument("optimizer: parameter/gradient count mismatch");
  }
  for (std::size_t p = 0; p < params.size(); ++p) {
    if (params[p].shape() != grads[p].shape()) {
      throw std::invalid_argument("optimizer: gradient shape " +
                                  grads[p].shape().ToString() + " for parameter " +
                                  params[p].shape().ToString());
    }
    for (double g : grads[p].vec()) {
      if (!std::isfinite(g)) return false;
    }
  }
  ++steps_;
  if (config_.optimizer == OptimizerKind::kSgd) {
    for (std::size_t p = 0; p < params.size(); ++p) {
      for (std::size_t i = 0; i < params[p].size(); ++i) {
        params[p][i] -= config_.learning_rate * grads[p][i];
      }
    }
    return true;
  }
  if (m_.empty()) {
    for (const Tensor& t : params) {
      m_.emplace_back(t.shape());
      v_.emplace_back(t.shape());
    }
  }
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, steps_);
  const double c2 = 1.0 - std::pow(b2, steps_);
  for (std::size_t p = 0; p < params.size(); ++p) {
    for (std::size_t i = 0; i < params[p].size(); ++i) {
      const double g = grads[p][i];
      m_[p][i] = b1 * m_[p][i] + (1.0 - b1) * g;
      v_[p][i] = b2 * v_[p][i] + (1.0 - b2) * g * g;
      params[p][i] -= config_.learning_rate * (m_[p][i] / c1) /
                      (std::sqrt(v_[p][i] / c2) + config_.epsilon);
    }
  }
  return true;
}

Value TaskLoss(ad::Tape& tape, const CalibrationTask& task, Value theta,
               const SimSettings& settings) {
  if (!task.model) throw std::invalid_argument("task without region model");
  const Value y = SimulateSeries(tape, *task.model, theta, task.train_days(), settings);
  return MseLoss(y, task.target);
}

namespace {

void Log(const TrainConfig& config, const std::string& msg) {
  if (config.log) {
    config.log(msg);
  } else {
    std::cerr << msg << '\n';
  }
}

SimSettings SettingsFor(const CalibrationTask& task, const TrainConfig& config, int epoch) {
  SimSettings s;
  s.temperature = config.temperature;
  s.noise_seed = config.resample_noise
                     ? Mix64(task.noise_seed ^ Mix64(static_cast<std::uint64_t>(epoch)))
                     : task.noise_seed;
  return s;
}

}  // namespace

Tensor RandomLogits(std::size_t weeks, std::size_t dim, std::uint64_t seed) {
  const CounterRng rng(seed);
  Tensor t({weeks, dim});
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double u = 0.1 + 0.8 * rng.Uniform(streams::kInit, 0xc, i);
    t[i] = std::log(u / (1.0 - u));
  }
  return t;
}

CResult TrainC(const CalibrationTask& task, const ParamBounds& bounds,
               const TrainConfig& config) {
  if (!task.model) throw std::invalid_argument("task without region model");
  return TrainC(task, bounds, config,
                RandomLogits(task.train_weeks(), ParamDim(task.model->disease), config.seed));
}

CResult TrainC(const CalibrationTask& task, const ParamBounds& bounds,
               const TrainConfig& config, Tensor initial_logits) {
  config.Validate();
  bounds.Validate();
  if (!task.model) throw std::invalid_argument("task without region model");
  if (task.target.empty() || task.target.size() % 7 != 0) {
    throw std::invalid_argument("C calibration needs a target length that is a "
                                "multiple of 7, got " +
                                std::to_string(task.target.size()));
  }
  if (initial_logits.rows() != task.train_weeks() ||
      initial_logits.cols() != bounds.size()) {
    throw std::invalid_argument("initial logits " + initial_logits.shape().ToString() +
                                " do not match weeks x bounds");
  }
  Optimizer opt(config);
  std::vector<Tensor> params{std::move(initial_logits)};
  CResult res;
  res.logits = params[0];
  res.best_loss = std::numeric_limits<double>::quiet_NaN();
  res.initial_loss = res.best_loss;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    ad::Tape tape;
    const Value logits = tape.Leaf(params[0]);
    const Value loss =
        TaskLoss(tape, task, BoundOutputs(logits, bounds), SettingsFor(task, config, epoch));
    const double l = loss.item();
    res.history.push_back({epoch, task.model->name, l});
    if (epoch == 0) res.initial_loss = l;
    if (std::isfinite(l) && !(l >= res.best_loss)) {
      res.best_loss = l;
      res.logits = params[0];
    }
    const ad::Gradients g = ad::Backward(loss);
    if (!std::isfinite(l) || !opt.Step(params, {g[logits]})) {
      ++res.rejected_steps;
      Log(config, "c: epoch " + std::to_string(epoch) + " region " + task.model->name +
                      ": non-finite loss or gradient, step skipped");
    }
  }
  ad::Tape tape;
  res.theta = BoundOutputs(tape.Constant(res.logits), bounds).data();
  return res;
}

Tensor NetworkTheta(const CalibNet& net, const CalibrationTask& task, std::size_t weeks) {
  return net.Predict(task.features, weeks);
}

NetResult TrainNetwork(std::span<const CalibrationTask> tasks, CalibNet& net,
                       const TrainConfig& config) {
  config.Validate();
  if (tasks.empty()) throw std::invalid_argument("no regions to calibrate");
  for (const CalibrationTask& t : tasks) {
    if (!t.model) throw std::invalid_argument("task without region model");
    if (t.features.cols() != net.config().input_dim) {
      throw std::invalid_argument("region " + t.model->name + ": feature dimension " +
                                  std::to_string(t.features.cols()) + " but network expects " +
                                  std::to_string(net.config().input_dim));
    }
    if (ParamDim(t.model->disease) != net.config().output_dim()) {
      throw std::invalid_argument("region " + t.model->name +
                                  ": network output width does not match disease");
    }
    if (t.target.empty()) throw std::invalid_argument("region " + t.model->name + ": empty target");
  }
  const std::size_t regions = tasks.size();
  Optimizer opt(config);
  std::vector<Tensor>& weights = net.weights().values();
  std::vector<Tensor> best = weights;
  NetResult res;
  res.best_loss = std::numeric_limits<double>::quiet_NaN();
  res.initial_loss = res.best_loss;

  std::vector<double> losses(regions);
  std::vector<std::vector<Tensor>> grads(regions);
  auto run_region = [&](std::size_t r, int epoch) {
    const CalibrationTask& task = tasks[r];
    ad::Tape tape;
    const BoundParameters w(tape, net.weights());
    const std::size_t weeks = task.train_weeks() + static_cast<std::size_t>(config.horizon_weeks);
    const Value theta = net.Forward(w, task.features, weeks).params;
    const Value loss = TaskLoss(tape, task, theta, SettingsFor(task, config, epoch));
    losses[r] = loss.item();
    const ad::Gradients g = ad::Backward(loss);
    grads[r].clear();
    for (const Value& leaf : w.leaves()) grads[r].push_back(g[leaf]);
  };

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    if (config.threads > 1 && regions > 1) {
      std::vector<std::thread> pool;
      const std::size_t workers = std::min<std::size_t>(config.threads, regions);
      std::vector<std::exception_ptr> errors(workers);
      for (std::size_t k = 0; k < workers; ++k) {
        pool.emplace_back([&, k] {
          try {
            for (std::size_t r = k; r < regions; r += workers) run_region(r, epoch);
          } catch (...) {
            errors[k] = std::current_exception();
          }
        });
      }
      for (auto& t : pool) t.join();
      for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
      }
    } else {
      for (std::size_t r = 0; r < regions; ++r) run_region(r, epoch);
    }
    // Summed in region order so the result does not depend on threading.
    double mean = 0.0;
    std::vector<Tensor> total = grads[0];
    for (std::size_t r = 0; r < regions; ++r) {
      res.history.push_back({epoch, tasks[r].model->name, losses[r]});
      mean += losses[r];
      if (r == 0) continue;
      for (std::size_t p = 0; p < total.size(); ++p) {
        for (std::size_t i = 0; i < total[p].size(); ++i) total[p][i] += grads[r][p][i];
      }
    }
    mean /= static_cast<double>(regions);
    if (regions > 1) {
      for (Tensor& t : total) {
        for (double& v : t.vec()) v /= static_cast<double>(regions);
      }
    }
    res.mean_loss.push_back(mean);
    if (epoch == 0) res.initial_loss = mean;
    if (std::isfinite(mean) && !(mean >= res.best_loss)) {
      res.best_loss = mean;
      best = weights;
    }
    if (!std::isfinite(mean) || !opt.Step(weights, total)) {
      ++res.rejected_steps;
      Log(config, "network: epoch " + std::to_string(epoch) +
                      ": non-finite loss or gradient, step skipped");
    }
  }
  if (config.epochs > 0) weights = best;
  return res;
}

NetResult TrainDC(const CalibrationTask& task, CalibNet& net, const TrainConfig& config) {
  return TrainNetwork(std::span<const CalibrationTask>(&task, 1), net, config);
}

NetResult TrainJDC(std::span<const CalibrationTask> tasks, CalibNet& net,
                   const TrainConfig& config) {
  return TrainNetwork(tasks, net, config);
}

void WriteLossCsv(std::ostream& out, std::span<const LossRecord> history) {
  out << "epoch,region,loss\n";
  for (const LossRecord& r : history) {
    out << r.epoch << ',' << r.region << ',';
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", r.loss);
    out << buf << '\n';
  }
}

std::vector<LossRecord> ReadLossCsv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "epoch,region,loss") {
    throw std::invalid_argument("loss csv: expected header 'epoch,region,loss'");
  }
  std::vector<LossRecord> out;
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    const auto a = line.find(',');
    const auto b = line.rfind(',');
    if (a == std::string::npos || a == b) {
      throw std::invalid_argument("loss csv row " + std::to_string(row) + ": need 3 fields");
    }
    try {
      out.push_back({std::stoi(line.substr(0, a)), line.substr(a + 1, b - a - 1),
                     std::stod(line.substr(b + 1))});
    } catch (const std::logic_error&) {
      throw std::invalid_argument("loss csv row " + std::to_string(row) + ": bad number");
    }
  }
  return out;
}

}  // namespace diffabm
