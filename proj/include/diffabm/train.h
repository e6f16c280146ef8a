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

// Calibration loops: direct parameter descent (C), a per-region calibrator
// network (DC) and one calibrator shared by several regions (JDC).

#ifndef DIFFABM_TRAIN_H_
#define DIFFABM_TRAIN_H_

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "diffabm/autodiff.h"
#include "diffabm/calibnet.h"
#include "diffabm/epi.h"
#include "diffabm/population.h"

namespace diffabm {

enum class Disease { kCovid, kFlu };
const char* DiseaseName(Disease d);
Disease ParseDisease(const std::string& name);
ParamBounds DefaultBounds(Disease d);

// The simulator instance for one region. Parameter rows produced by a
// calibrator are laid out as (R, mortality, i0 %) for COVID and (R, i0 %) for
// flu. The COVID target is the daily increment of m * #{R, M}; the flu
// target is 100 * daily new infections / n.
struct RegionModel {
  std::string name;
  Population agents;  // all susceptible; seeding comes from i0
  ContactNetwork network;
  TransmissionParams transmission;  // T_E, T_I, S_a (r and i0 are ignored)
  ProgressionParams progression;    // transition times (m is ignored for COVID)
  InfectiousnessCurve curve;
  Disease disease = Disease::kCovid;
};

struct SimSettings {
  double temperature = 0.5;
  std::uint64_t noise_seed = 0;
};

// Relaxed run driven by weekly parameter rows theta ([weeks, D]); step t uses
// row min(t / 7, weeks - 1). Returns the [steps, 1] target series.
ad::Value SimulateSeries(ad::Tape& tape, const RegionModel& model, ad::Value theta,
                         int steps, const SimSettings& settings);

enum class ReportMode { kRelaxed, kHard };
ReportMode ParseReportMode(const std::string& name);

// Plain-valued run for reporting and forecasting. Hard mode seeds
// round(i0 * n) agents and averages `samples` runs.
std::vector<double> SimulateSeriesValues(const RegionModel& model,
                                         const ad::Tensor& theta, int steps,
                                         ReportMode mode, const SimSettings& settings,
                                         int samples = 1);

// Repeats the last row until the tensor has `weeks` rows.
ad::Tensor ExtendTheta(const ad::Tensor& theta, std::size_t weeks);

ad::Value MseLoss(ad::Value predicted, ad::Value observed);
ad::Value MseLoss(ad::Value predicted, std::span<const double> observed);

enum class CalibrationMode { kC, kDC, kJDC };
CalibrationMode ParseCalibrationMode(const std::string& name);
const char* CalibrationModeName(CalibrationMode m);

enum class OptimizerKind { kAdam, kSgd };

struct TrainConfig {
  double learning_rate = 1e-3;
  OptimizerKind optimizer = OptimizerKind::kAdam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int epochs = 1000;
  std::uint64_t seed = 0;  // initialization
  double temperature = 0.5;
  CalibrationMode mode = CalibrationMode::kDC;
  int horizon_weeks = 4;        // extra decoder positions beyond training
  bool resample_noise = false;  // fresh Gumbel noise each epoch
  int threads = 1;
  std::function<void(const std::string&)> log;  // diagnostics; stderr if empty

  void Validate() const;
};

class Optimizer {
 public:
  explicit Optimizer(const TrainConfig& config);

  // Updates params in place. Rejects the step (returns false, no change) if
  // any gradient is non-finite.
  bool Step(std::vector<ad::Tensor>& params, const std::vector<ad::Tensor>& grads);

  int steps() const { return steps_; }
  const std::vector<ad::Tensor>& first_moment() const { return m_; }
  const std::vector<ad::Tensor>& second_moment() const { return v_; }

 private:
  TrainConfig config_;
  int steps_ = 0;
  std::vector<ad::Tensor> m_, v_;
};

// One region's calibration problem.
struct CalibrationTask {
  std::shared_ptr<const RegionModel> model;
  ad::Tensor features;         // [T, F] normalized weekly rows (DC/JDC)
  std::vector<double> target;  // daily series, length train_days
  std::uint64_t noise_seed = 0;

  int train_days() const { return static_cast<int>(target.size()); }
  std::size_t train_weeks() const { return (target.size() + 6) / 7; }
};

// Loss of one task under parameter rows theta.
ad::Value TaskLoss(ad::Tape& tape, const CalibrationTask& task, ad::Value theta,
                   const SimSettings& settings);

struct LossRecord {
  int epoch = 0;
  std::string region;
  double loss = 0.0;
};

struct CResult {
  ad::Tensor theta;   // best [train_weeks, D]
  ad::Tensor logits;  // unconstrained parameters behind theta
  std::vector<LossRecord> history;
  double initial_loss = 0.0;
  double best_loss = 0.0;
  int rejected_steps = 0;
};

// Random in-bounds initialization: each logit is logit(u), u ~ U(0.1, 0.9).
ad::Tensor RandomLogits(std::size_t weeks, std::size_t dim, std::uint64_t seed);

// Requires a target length that is a multiple of 7.
CResult TrainC(const CalibrationTask& task, const ParamBounds& bounds,
               const TrainConfig& config);
CResult TrainC(const CalibrationTask& task, const ParamBounds& bounds,
               const TrainConfig& config, ad::Tensor initial_logits);

struct NetResult {
  std::vector<LossRecord> history;  // per region per epoch
  std::vector<double> mean_loss;    // per epoch, averaged over regions
  double initial_loss = 0.0;
  double best_loss = 0.0;
  int rejected_steps = 0;
};

// Trains `net` in place on the average loss of the tasks and leaves the
// best-loss weights in it. With a single task this is DC; with several it is
// JDC. Each task's network output covers train_weeks + horizon_weeks rows.
NetResult TrainNetwork(std::span<const CalibrationTask> tasks, CalibNet& net,
                       const TrainConfig& config);
NetResult TrainDC(const CalibrationTask& task, CalibNet& net, const TrainConfig& config);
NetResult TrainJDC(std::span<const CalibrationTask> tasks, CalibNet& net,
                   const TrainConfig& config);

// Parameter rows for a task from a trained network, covering train and
// forecast weeks.
ad::Tensor NetworkTheta(const CalibNet& net, const CalibrationTask& task,
                        std::size_t weeks);

void WriteLossCsv(std::ostream& out, std::span<const LossRecord> history);
std::vector<LossRecord> ReadLossCsv(std::istream& in);

}  // namespace diffabm

#endif  // DIFFABM_TRAIN_H_
