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

#include "diffabm/ode.h"

#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include "gtest/gtest.h"

namespace diffabm {
namespace {

using ad::Tape;
using ad::Tensor;
using ad::Value;

TEST(Seirm, WorkedStepMatchesHandEvaluation) {
  // Infections 0.3 * 990 * 10 / 1000 = 2.97; recoveries 1.0; deaths 0.1.
  const SeirmParams p{0.3, 0.2, 0.1, 0.01, 1000.0};
  const SeirmState<double> x = SeirmStep({990, 0, 10, 0, 0}, p, 1.0);
  EXPECT_NEAR(x.s, 987.03, 1e-12);
  EXPECT_NEAR(x.e, 2.97, 1e-12);
  EXPECT_NEAR(x.i, 8.9, 1e-12);
  EXPECT_NEAR(x.r, 1.0, 1e-12);
  EXPECT_NEAR(x.m, 0.1, 1e-12);
}

TEST(Seirm, ConservesPopulationOverRandomSteps) {
  std::mt19937_64 gen(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double n = 1e4;
  for (int trial = 0; trial < 100; ++trial) {
    const SeirmParams p{1.5 * u(gen), u(gen), 0.5 * u(gen), 0.05 * u(gen), n};
    SeirmState<double> x{n - 50.0, 20.0, 30.0, 0.0, 0.0};
    for (int t = 0; t < 100; ++t) {
      x = SeirmStep(x, p, 1.0);
      EXPECT_NEAR(x.s + x.e + x.i + x.r + x.m, n, 1e-9);
    }
  }
}

TEST(Seirm, DiseaseFreeStateIsExactFixedPoint) {
  const SeirmParams p{0.9, 0.3, 0.2, 0.02, 500.0};
  const SeirmState<double> x0{400.0, 0.0, 0.0, 90.0, 10.0};
  SeirmState<double> x = x0;
  for (int t = 0; t < 50; ++t) x = SeirmStep(x, p, 1.0);
  EXPECT_EQ(x.s, x0.s);
  EXPECT_EQ(x.e, 0.0);
  EXPECT_EQ(x.i, 0.0);
  EXPECT_EQ(x.r, x0.r);
  EXPECT_EQ(x.m, x0.m);
}

TEST(Seirm, LargeStepsAreClampedAndCounted) {
  const SeirmParams p{5.0, 1.0, 1.0, 0.5, 100.0};
  int clamped = 0;
  const SeirmState<double> x = SeirmStep({50, 0, 50, 0, 0}, p, 3.0, &clamped);
  EXPECT_GT(clamped, 0);
  for (double v : {x.s, x.e, x.i, x.r, x.m}) EXPECT_GE(v, 0.0);
}

TEST(Seirm, RejectsInvalidParameters) {
  EXPECT_THROW((SeirmParams{-0.1, 0.2, 0.1, 0.0, 10.0}.Validate()), std::invalid_argument);
  EXPECT_THROW((SeirmParams{0.1, 0.2, 0.1, 0.0, 0.0}.Validate()), std::invalid_argument);
  EXPECT_THROW(SeirmStep({1, 0, 0, 0, 0}, {0.1, 0.1, 0.1, 0.0, 1.0}, -1.0), std::invalid_argument);
}

TEST(Sirs, DiseaseFreeFixedPointAndWaning) {
  const SirsParams p{0.8, 3.0, 100.0, 1000.0};
  const SirsState<double> x = SirsStep({1000.0, 0.0}, p, 1.0);
  EXPECT_EQ(x.s, 1000.0);
  EXPECT_EQ(x.i, 0.0);
  // With 200 recovered and no infection, S gains 200 / L per day.
  const SirsState<double> y = SirsStep({800.0, 0.0}, p, 1.0);
  EXPECT_DOUBLE_EQ(y.s, 802.0);
  EXPECT_DOUBLE_EQ(p.R0(), 2.4);
}

TEST(OdeSeries, TapeAndPlainVersionsAgree) {
  for (OdeModel m : {OdeModel::kSeirm, OdeModel::kSirs}) {
    const std::vector<double> params = m == OdeModel::kSeirm
                                           ? std::vector<double>{0.5, 0.25, 0.12, 0.01, 0.002}
                                           : std::vector<double>{0.6, 3.0, 200.0, 0.01};
    const std::vector<double> plain = OdeSeries(m, params, 5e4, 30);
    Tape tape;
    Tensor row({1, params.size()});
    for (std::size_t k = 0; k < params.size(); ++k) row[k] = params[k];
    const Tensor taped = OdeSeries(m, tape.Constant(row), 5e4, 30).data();
    ASSERT_EQ(plain.size(), 30u);
    for (std::size_t t = 0; t < 30; ++t) EXPECT_NEAR(taped[t], plain[t], 1e-12 * (1.0 + std::abs(plain[t])));
  }
}

TEST(OdeSeries, SeirmDailyDeathsSumToFinalDeaths) {
  const std::vector<double> p = {0.5, 0.25, 0.12, 0.01, 0.002};
  const double n = 1e4;
  const std::vector<double> y = OdeSeries(OdeModel::kSeirm, p, n, 40);
  SeirmState<double> x{(1.0 - p[4]) * n, 0.0, p[4] * n, 0.0, 0.0};
  const SeirmParams sp{p[0], p[1], p[2], p[3], n};
  double total = 0.0;
  for (double v : y) total += v;
  for (int t = 0; t < 40; ++t) x = SeirmStep(x, sp, 1.0);
  EXPECT_NEAR(total, x.m, 1e-9);
}

TEST(OdeSeries, GradientsMatchFiniteDifferences) {
  auto f = [](Tape& tape, std::span<const Value> p) {
    (void)tape;
    return ad::Sum(OdeSeries(OdeModel::kSeirm, p[0], 1e3, 20)) +
           ad::Sum(OdeSeries(OdeModel::kSirs, p[1], 1e3, 20));
  };
  const std::vector<Tensor> params = {Tensor({1, 5}, {0.4, 0.3, 0.15, 0.02, 0.01}),
                                      Tensor({1, 4}, {0.7, 4.0, 80.0, 0.02})};
  const ad::GradReport r = ad::FiniteDifferenceCheck(f, params, 1e-6);
  EXPECT_LT(r.max_relative_error, 1e-5);
}

// Synthetic targets from known parameters; the latent and infectious rates
// are held near their known values, as they cannot be told apart from an
// early death series alone.
TEST(FitOde, RecoversReproductionNumber) {
  const double n = 1e5;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const std::vector<double> p = {0.3 + 0.4 * u(gen), 0.2 + 0.3 * u(gen), 0.1 + 0.15 * u(gen),
                                   0.005 + 0.02 * u(gen), 0.001 + 0.01 * u(gen)};
    OdeFitConfig c;
    c.population = n;
    c.train.learning_rate = 0.1;
    c.train.epochs = 2000;
    for (int k : {1, 2}) {
      c.bounds.lower[k] = 0.95 * p[k];
      c.bounds.upper[k] = 1.05 * p[k];
    }
    const OdeFit fit = FitOde(OdeSeries(OdeModel::kSeirm, p, n, 42), c);
    const double truth = SeirmParams{p[0], p[1], p[2], p[3], n}.R0();
    EXPECT_NEAR(fit.seirm().R0() / truth, 1.0, 0.1) << "seed " << seed;
    EXPECT_LT(fit.best_loss, fit.history.front());
  }
}

TEST(FitOde, NonFiniteLossRestartsWithSmallerSteps) {
  std::vector<double> target(10, 1.0);
  target[3] = std::numeric_limits<double>::quiet_NaN();
  OdeFitConfig c;
  c.train.epochs = 5;
  c.max_restarts = 3;
  const OdeFit fit = FitOde(target, c);
  EXPECT_EQ(fit.restarts, 3);
  // No finite loss was ever seen, so the fit stays at the bound midpoints.
  for (std::size_t k = 0; k < fit.values.size(); ++k) {
    EXPECT_NEAR(fit.values[k], c.bounds.midpoint(k), 1e-15);
  }
}

TEST(FitOde, RejectsBadInput) {
  OdeFitConfig c;
  EXPECT_THROW(FitOde(std::vector<double>{1.0}, c), std::invalid_argument);
  c.bounds = DefaultOdeBounds(OdeModel::kSirs);
  EXPECT_THROW(FitOde(std::vector<double>{1.0, 2.0}, c), std::invalid_argument);
}

TEST(Surrogate, MapsCompartmentalParameters) {
  const AbmParams a = SurrogateFromSeirm({0.5, 0.2, 0.09, 0.01, 1e3}, 0.004);
  EXPECT_DOUBLE_EQ(a.r, 5.0);
  EXPECT_DOUBLE_EQ(a.mortality, 0.1);
  EXPECT_DOUBLE_EQ(a.i0_percent, 0.4);
  const AbmParams b = SurrogateFromSirs({0.5, 3.0, 100.0, 1e3}, 0.01);
  EXPECT_DOUBLE_EQ(b.r, 1.5);
  EXPECT_DOUBLE_EQ(b.i0_percent, 1.0);
  const Tensor t = a.ToTheta(Disease::kCovid, 3);
  ASSERT_EQ(t.shape(), (ad::Shape{3, 3}));
  EXPECT_EQ(t.at(2, 0), 5.0);
  EXPECT_EQ(t.at(2, 1), 0.1);
  EXPECT_EQ(b.ToTheta(Disease::kFlu, 2).cols(), 2u);
}

TEST(ExpertSearch, UsesGivenValuesAndMidpointSeeding) {
  ExpertConfig e;
  e.r0 = 2.5;
  e.cfr = 0.012;
  const AbmParams a = ExpertSearch(e, ParamBounds::Covid(), Disease::kCovid);
  EXPECT_EQ(a.r, 2.5);
  EXPECT_EQ(a.mortality, 0.012);
  EXPECT_DOUBLE_EQ(a.i0_percent, 0.505);
  EXPECT_THROW(ExpertSearch(e, ParamBounds::Flu(), Disease::kFlu), std::invalid_argument);
  e.cfr.reset();
  EXPECT_THROW(ExpertSearch(e, ParamBounds::Covid(), Disease::kCovid), std::invalid_argument);
}

}  // namespace
}  // namespace diffabm
