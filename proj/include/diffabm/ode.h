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

// Compartmental baselines (SEIRM for mortality, SIRS for ILI) integrated with
// forward Euler, gradient-based fitting of their parameters, and the two
// non-gradient ways of parameterizing the agent model from them.

#ifndef DIFFABM_ODE_H_
#define DIFFABM_ODE_H_

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "diffabm/autodiff.h"
#include "diffabm/calibnet.h"
#include "diffabm/train.h"

namespace diffabm {

template <typename T>
struct SeirmState {
  T s, e, i, r, m;
};

struct SeirmParams {
  double beta = 0.0;   // infectivity rate
  double alpha = 0.0;  // inverse latent period
  double gamma = 0.0;  // inverse infectious period
  double mu = 0.0;     // mortality rate
  double n = 0.0;      // population size

  double R0() const { return beta / (gamma + mu); }
  void Validate() const;
};

template <typename T>
struct SirsState {
  T s, i;  // R is n - s - i
};

struct SirsParams {
  double beta = 0.0;
  double duration = 1.0;  // mean infectious duration D
  double immunity = 1.0;  // mean immunity duration L
  double n = 0.0;

  double R0() const { return beta * duration; }
  void Validate() const;
};

// One forward-Euler step. Works for double and ad::Value.
template <typename T, typename P>
SeirmState<T> SeirmEuler(const SeirmState<T>& x, const P& beta, const P& alpha,
                         const P& gamma, const P& mu, double n, double dt) {
  const T infection = beta * x.s * x.i * (1.0 / n);
  const T onset = alpha * x.e;
  const T recovery = gamma * x.i;
  const T death = mu * x.i;
  return {x.s - infection * dt, x.e + (infection - onset) * dt,
          x.i + (onset - recovery - death) * dt, x.r + recovery * dt, x.m + death * dt};
}

template <typename T, typename P>
SirsState<T> SirsEuler(const SirsState<T>& x, const P& beta, const P& duration,
                       const P& immunity, double n, double dt) {
  const T infection = beta * x.i * x.s * (1.0 / n);
  const T waning = (n - x.s - x.i) / immunity;
  return {x.s + (waning - infection) * dt, x.i + (infection - x.i / duration) * dt};
}

// Plain steps. Each outflow is capped at the content of its source so that
// no compartment goes negative and the total is conserved; every cap that
// fires is counted in `clamped` when given.
SeirmState<double> SeirmStep(const SeirmState<double>& x, const SeirmParams& p, double dt,
                             int* clamped = nullptr);
SirsState<double> SirsStep(const SirsState<double>& x, const SirsParams& p, double dt,
                           int* clamped = nullptr);

enum class OdeModel { kSeirm, kSirs };
OdeModel OdeModelFor(Disease d);

// Fitted parameter vector layout:
//   SEIRM: beta, alpha, gamma, mu, i0 (fraction of n initially infected)
//   SIRS:  beta, D, L, i0
ParamBounds DefaultOdeBounds(OdeModel model);

// Daily model output compared with the target: new deaths (SEIRM) or
// 100 * new infections / n (SIRS), for days 0..steps-1 with dt = 1.
std::vector<double> OdeSeries(OdeModel model, std::span<const double> params, double n,
                              int steps);
ad::Value OdeSeries(OdeModel model, ad::Value params, double n, int steps);

struct OdeFitConfig {
  OdeModel model = OdeModel::kSeirm;
  double population = 1000.0;
  ParamBounds bounds = DefaultOdeBounds(OdeModel::kSeirm);
  TrainConfig train;  // learning rate, epochs, optimizer
  int max_restarts = 3;
};

struct OdeFit {
  OdeModel model = OdeModel::kSeirm;
  double population = 0.0;
  std::vector<double> values;  // best parameters, layout above
  double best_loss = 0.0;
  std::vector<double> history;  // loss per epoch of the final attempt
  int restarts = 0;

  SeirmParams seirm() const;
  SirsParams sirs() const;
  double i0() const { return values.back(); }
};

// Minimizes the MSE between OdeSeries and the target. A non-finite loss
// restarts the fit with half the learning rate, up to max_restarts times.
OdeFit FitOde(std::span<const double> target, const OdeFitConfig& config);

// Agent-model parameters from a fitted or hand-set source.
struct AbmParams {
  double r = 0.0;
  double mortality = 0.0;
  double i0_percent = 0.0;

  // Constant parameter rows in the calibrator layout for `disease`.
  ad::Tensor ToTheta(Disease disease, std::size_t weeks) const;
};

// R := R0; m := mu / (gamma + mu); i0 := I(0) / n.
AbmParams SurrogateFromSeirm(const SeirmParams& p, double i0_fraction);
// R := beta * D; i0 := I(0) / n.
AbmParams SurrogateFromSirs(const SirsParams& p, double i0_fraction);
AbmParams SurrogateCalibrate(const OdeFit& fit);

struct ExpertConfig {
  std::optional<double> r0;      // COVID reproduction number
  std::optional<double> cfr;     // COVID case-fatality rate
  std::optional<double> r0_flu;  // flu reproduction number
};

// Literature values for R and m, i0 at the midpoint of its bound range.
AbmParams ExpertSearch(const ExpertConfig& config, const ParamBounds& bounds,
                       Disease disease);

}  // namespace diffabm

#endif  // DIFFABM_ODE_H_
