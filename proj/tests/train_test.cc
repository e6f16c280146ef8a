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

#include <cmath>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>

#include "diffabm/synthetic.h"
#include "gtest/gtest.h"

namespace diffabm {
namespace {

using ad::Tape;
using ad::Tensor;
using ad::Value;

std::shared_ptr<RegionModel> SmallModel(std::size_t n, Disease d, std::uint64_t seed) {
  PopulationConfig pc;
  pc.n = n;
  pc.mean_degree = 4;
  pc.rewire_probability = 0.1;
  pc.seed = seed;
  return MakeRegionModel("r" + std::to_string(seed), pc, d);
}

Tensor CovidTheta(std::size_t weeks, double r, double m, double i0_percent) {
  Tensor t({weeks, 3});
  for (std::size_t w = 0; w < weeks; ++w) {
    t.at(w, 0) = r + 0.3 * static_cast<double>(w);
    t.at(w, 1) = m;
    t.at(w, 2) = i0_percent;
  }
  return t;
}

TEST(Optimizer, FirstAdamStepHasLearningRateMagnitude) {
  TrainConfig c;
  c.learning_rate = 0.01;
  Optimizer opt(c);
  std::vector<Tensor> params = {Tensor::Column({1.0, -2.0, 0.5})};
  const std::vector<Tensor> grads = {Tensor::Column({3.0, -0.25, 1e-3})};
  ASSERT_TRUE(opt.Step(params, grads));
  // Bias-corrected moments equal g and g^2 after one step.
  const double want[] = {1.0 - 0.01 * 3.0 / (3.0 + 1e-8), -2.0 + 0.01 * 0.25 / (0.25 + 1e-8),
                         0.5 - 0.01 * 1e-3 / (1e-3 + 1e-8)};
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(params[0][i], want[i], 1e-15);
  EXPECT_EQ(opt.steps(), 1);
}

TEST(Optimizer, AdamMatchesReferenceRecursion) {
  TrainConfig c;
  c.learning_rate = 0.05;
  c.beta1 = 0.8;
  c.beta2 = 0.9;
  Optimizer opt(c);
  std::vector<Tensor> params = {Tensor::Scalar(0.3)};
  double x = 0.3, m = 0.0, v = 0.0;
  for (int t = 1; t <= 6; ++t) {
    const double g = std::sin(3.0 * x) + x;
    ASSERT_TRUE(opt.Step(params, {Tensor::Scalar(g)}));
    m = 0.8 * m + 0.2 * g;
    v = 0.9 * v + 0.1 * g * g;
    const double mh = m / (1.0 - std::pow(0.8, t)), vh = v / (1.0 - std::pow(0.9, t));
    x -= 0.05 * mh / (std::sqrt(vh) + 1e-8);
    EXPECT_NEAR(params[0].item(), x, 1e-14) << "step " << t;
  }
}

TEST(Optimizer, SgdStepsAlongNegativeGradient) {
  TrainConfig c;
  c.learning_rate = 0.1;
  c.optimizer = OptimizerKind::kSgd;
  Optimizer opt(c);
  std::vector<Tensor> params = {Tensor::Column({1.0, 2.0})};
  ASSERT_TRUE(opt.Step(params, {Tensor::Column({2.0, -4.0})}));
  EXPECT_DOUBLE_EQ(params[0][0], 0.8);
  EXPECT_DOUBLE_EQ(params[0][1], 2.4);
}

TEST(Optimizer, RejectsNonFiniteGradientsWithoutChange) {
  TrainConfig c;
  Optimizer opt(c);
  std::vector<Tensor> params = {Tensor::Column({1.0, 2.0})};
  EXPECT_FALSE(opt.Step(params, {Tensor::Column({0.5, std::numeric_limits<double>::quiet_NaN()})}));
  EXPECT_FALSE(opt.Step(params, {Tensor::Column({std::numeric_limits<double>::infinity(), 0.0})}));
  EXPECT_EQ(params[0][0], 1.0);
  EXPECT_EQ(params[0][1], 2.0);
  EXPECT_EQ(opt.steps(), 0);
  EXPECT_THROW(opt.Step(params, {Tensor::Scalar(1.0)}), std::invalid_argument);
}

TEST(Series, ExtendRepeatsLastRow) {
  const Tensor t = CovidTheta(2, 2.0, 0.01, 0.5);
  const Tensor e = ExtendTheta(t, 4);
  ASSERT_EQ(e.rows(), 4u);
  for (std::size_t c = 0; c < 3; ++c) {
    EXPECT_EQ(e.at(0, c), t.at(0, c));
    EXPECT_EQ(e.at(3, c), t.at(1, c));
  }
  EXPECT_EQ(ExtendTheta(t, 1).rows(), 2u);
}

TEST(Series, MseLossValue) {
  Tape tape;
  const Value p = tape.Constant(Tensor::Column({1.0, 2.0, 4.0}));
  const std::vector<double> y = {0.0, 2.0, 1.0};
  EXPECT_DOUBLE_EQ(MseLoss(p, y).item(), 10.0 / 3.0);
  EXPECT_THROW(MseLoss(p, std::vector<double>{1.0}), std::invalid_argument);
}

TEST(Series, RelaxedValuesMatchTapeRun) {
  const auto model = SmallModel(60, Disease::kCovid, 1);
  const Tensor theta = CovidTheta(3, 2.5, 0.02, 5.0);
  const SimSettings s{0.5, 17};
  Tape tape;
  const Tensor on_tape = SimulateSeries(tape, *model, tape.Constant(theta), 21, s).data();
  EXPECT_EQ(SimulateSeriesValues(*model, theta, 21, ReportMode::kRelaxed, s), on_tape.vec());
  EXPECT_EQ(on_tape.rows(), 21u);
}

TEST(Series, HardModeAveragesSamplesAndIsDeterministic) {
  const auto model = SmallModel(200, Disease::kFlu, 2);
  Tensor theta({2, 2});
  theta.at(0, 0) = theta.at(1, 0) = 2.0;
  theta.at(0, 1) = theta.at(1, 1) = 5.0;
  const SimSettings s{0.5, 3};
  const auto a = SimulateSeriesValues(*model, theta, 14, ReportMode::kHard, s, 4);
  EXPECT_EQ(a, SimulateSeriesValues(*model, theta, 14, ReportMode::kHard, s, 4));
  double total = 0.0;
  for (double v : a) {
    EXPECT_GE(v, 0.0);
    total += v;
  }
  EXPECT_GT(total, 0.0);
}

TEST(Series, RejectsMismatchedParameterWidth) {
  const auto model = SmallModel(30, Disease::kFlu, 3);
  EXPECT_THROW(SimulateSeriesValues(*model, CovidTheta(1, 2.0, 0.01, 1.0), 7, ReportMode::kRelaxed, {}),
               std::invalid_argument);
}

// The whole differentiable pipeline (features -> calibrator -> simulator ->
// loss) against central differences on every network weight.
TEST(Pipeline, NetworkGradientsThroughSimulatorMatchFiniteDifferences) {
  const auto model = SmallModel(20, Disease::kCovid, 4);
  std::mt19937_64 gen(4);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  CalibrationTask task;
  task.model = model;
  task.features = Tensor({2, 3});
  for (std::size_t i = 0; i < task.features.size(); ++i) task.features[i] = u(gen);
  task.target.resize(14);
  for (double& y : task.target) y = 0.05 * (1.0 + u(gen));
  task.noise_seed = 9;
  CalibNetConfig nc;
  nc.input_dim = 3;
  nc.hidden_dim = 4;
  CalibNet net(nc, 5);
  const ParameterSet& set = net.weights();
  auto f = [&](Tape& tape, std::span<const Value> p) {
    const CalibOutput out = net.Forward(BoundParameters(tape, set, p), task.features, 2);
    return TaskLoss(tape, task, out.params, {0.5, task.noise_seed});
  };
  const ad::GradReport report = ad::FiniteDifferenceCheck(f, set.values(), 1e-5);
  EXPECT_LT(report.max_relative_error, 1e-3);
  double norm = 0.0;
  for (double g : report.analytic) norm += std::abs(g);
  EXPECT_GT(norm, 0.0);
}

CalibrationTask SelfTargetTask(std::uint64_t seed, int weeks) {
  CalibrationTask task;
  task.model = SmallModel(100, Disease::kCovid, seed);
  task.noise_seed = 100 + seed;
  task.target = SimulateSeriesValues(*task.model, CovidTheta(weeks, 2.5, 0.015, 0.5), 7 * weeks,
                                     ReportMode::kRelaxed, {0.5, task.noise_seed});
  task.features = Tensor({static_cast<std::size_t>(weeks), 2});
  for (int w = 0; w < weeks; ++w) {
    task.features.at(w, 0) = 0.3 * w;
    task.features.at(w, 1) = 1.0;
  }
  return task;
}

TEST(TrainC, ReducesLossFromRandomStart) {
  const CalibrationTask task = SelfTargetTask(1, 2);
  TrainConfig c;
  c.learning_rate = 0.05;
  c.epochs = 300;
  c.seed = 3;
  const CResult r = TrainC(task, ParamBounds::Covid(), c);
  EXPECT_EQ(r.history.size(), 300u);
  EXPECT_LT(r.best_loss, 0.01 * r.initial_loss);
  EXPECT_EQ(r.theta.rows(), 2u);
  const ParamBounds b = ParamBounds::Covid();
  for (std::size_t w = 0; w < 2; ++w) {
    for (std::size_t k = 0; k < 3; ++k) {
      EXPECT_GT(r.theta.at(w, k), b.lower[k]);
      EXPECT_LT(r.theta.at(w, k), b.upper[k]);
    }
  }
  // The reported theta reproduces the best loss.
  Tape tape;
  EXPECT_NEAR(TaskLoss(tape, task, tape.Constant(r.theta), {c.temperature, task.noise_seed}).item(),
              r.best_loss, 1e-12);
}

TEST(TrainC, RejectsPartialWeeks) {
  CalibrationTask task = SelfTargetTask(2, 1);
  task.target.pop_back();
  TrainConfig c;
  c.epochs = 1;
  EXPECT_THROW(TrainC(task, ParamBounds::Covid(), c), std::invalid_argument);
}

TEST(TrainC, RandomLogitsStayInBand) {
  const Tensor l = RandomLogits(4, 3, 7);
  for (double x : l.vec()) {
    const double u = 1.0 / (1.0 + std::exp(-x));
    EXPECT_GT(u, 0.1 - 1e-12);
    EXPECT_LT(u, 0.9 + 1e-12);
  }
  EXPECT_EQ(l.vec(), RandomLogits(4, 3, 7).vec());
  EXPECT_NE(l.vec(), RandomLogits(4, 3, 8).vec());
}

TEST(TrainNetwork, JointWithOneRegionEqualsSingleRegion) {
  const CalibrationTask task = SelfTargetTask(3, 2);
  TrainConfig c;
  c.learning_rate = 0.01;
  c.epochs = 8;
  CalibNetConfig nc;
  nc.input_dim = 2;
  nc.hidden_dim = 4;
  CalibNet a(nc, 1), b(nc, 1);
  const NetResult dc = TrainDC(task, a, c);
  const NetResult jdc = TrainJDC(std::span<const CalibrationTask>(&task, 1), b, c);
  ASSERT_EQ(dc.history.size(), jdc.history.size());
  for (std::size_t i = 0; i < dc.history.size(); ++i) EXPECT_EQ(dc.history[i].loss, jdc.history[i].loss);
  EXPECT_EQ(NetworkTheta(a, task, 4).vec(), NetworkTheta(b, task, 4).vec());
}

TEST(TrainNetwork, ThreadCountDoesNotChangeResults) {
  std::vector<CalibrationTask> tasks = {SelfTargetTask(4, 2), SelfTargetTask(5, 2), SelfTargetTask(6, 2)};
  TrainConfig c;
  c.learning_rate = 0.01;
  c.epochs = 5;
  CalibNetConfig nc;
  nc.input_dim = 2;
  nc.hidden_dim = 4;
  CalibNet a(nc, 2), b(nc, 2);
  const NetResult one = TrainJDC(tasks, a, c);
  c.threads = 3;
  const NetResult three = TrainJDC(tasks, b, c);
  ASSERT_EQ(one.mean_loss.size(), 5u);
  EXPECT_EQ(one.mean_loss, three.mean_loss);
  EXPECT_EQ(a.weights().values()[0].vec(), b.weights().values()[0].vec());
}

TEST(TrainNetwork, NoiseResamplingChangesTheLossTrajectory) {
  const CalibrationTask task = SelfTargetTask(7, 2);
  TrainConfig c;
  c.learning_rate = 0.01;
  c.epochs = 4;
  CalibNetConfig nc;
  nc.input_dim = 2;
  nc.hidden_dim = 4;
  CalibNet a(nc, 3), b(nc, 3);
  const NetResult fixed = TrainDC(task, a, c);
  c.resample_noise = true;
  const NetResult fresh = TrainDC(task, b, c);
  EXPECT_NE(fixed.mean_loss, fresh.mean_loss);
  CalibNet again(nc, 3);
  c.resample_noise = false;
  EXPECT_EQ(TrainDC(task, again, c).mean_loss, fixed.mean_loss);
}

TEST(TrainNetwork, KeepsBestWeightsAndCoversForecastWeeks) {
  const CalibrationTask task = SelfTargetTask(8, 3);
  TrainConfig c;
  c.learning_rate = 0.01;
  c.epochs = 15;
  c.horizon_weeks = 2;
  CalibNetConfig nc;
  nc.input_dim = 2;
  nc.hidden_dim = 4;
  CalibNet net(nc, 4);
  const NetResult r = TrainDC(task, net, c);
  double best = r.mean_loss[0];
  for (double l : r.mean_loss) best = std::min(best, l);
  EXPECT_EQ(r.best_loss, best);
  EXPECT_LE(r.best_loss, r.initial_loss);
  const Tensor theta = NetworkTheta(net, task, 5);
  EXPECT_EQ(theta.rows(), 5u);
  Tape tape;
  EXPECT_NEAR(TaskLoss(tape, task, tape.Constant(theta), {c.temperature, task.noise_seed}).item(),
              r.best_loss, 1e-12);
}

TEST(TrainNetwork, RejectsFeatureWidthMismatch) {
  const CalibrationTask task = SelfTargetTask(9, 2);
  CalibNetConfig nc;
  nc.input_dim = 5;
  nc.hidden_dim = 4;
  CalibNet net(nc, 1);
  TrainConfig c;
  c.epochs = 1;
  EXPECT_THROW(TrainDC(task, net, c), std::invalid_argument);
}

TEST(LossCsv, RoundTrips) {
  const std::vector<LossRecord> h = {{0, "a", 0.1}, {0, "b", 1.0 / 3.0}, {1, "a", 2e-17}};
  std::stringstream buf;
  WriteLossCsv(buf, h);
  EXPECT_EQ(buf.str().substr(0, 18), "epoch,region,loss\n");
  const auto back = ReadLossCsv(buf);
  ASSERT_EQ(back.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(back[i].epoch, h[i].epoch);
    EXPECT_EQ(back[i].region, h[i].region);
    EXPECT_EQ(back[i].loss, h[i].loss);
  }
  std::stringstream bad("epoch,region,loss\n1,a\n");
  EXPECT_THROW(ReadLossCsv(bad), std::invalid_argument);
}

TEST(Modes, ParseNames) {
  EXPECT_EQ(ParseCalibrationMode("jdc"), CalibrationMode::kJDC);
  EXPECT_STREQ(CalibrationModeName(CalibrationMode::kC), "c");
  EXPECT_THROW(ParseCalibrationMode("dcx"), std::invalid_argument);
  EXPECT_EQ(ParseDisease("flu"), Disease::kFlu);
  EXPECT_THROW(ParseDisease("measles"), std::invalid_argument);
}

}  // namespace
}  // namespace diffabm
