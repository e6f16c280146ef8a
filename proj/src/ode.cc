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

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace diffabm {

using ad::Tensor;
using ad::Value;

void SeirmParams::Validate() const {
  if (!(beta >= 0 && alpha >= 0 && gamma >= 0 && mu >= 0 && n > 0)) {
    throw std::invalid_argument("SEIRM parameters must be nonnegative with n > 0");
  }
}

void SirsParams::Validate() const {
  if (!(beta >= 0 && duration > 0 && immunity > 0 && n > 0)) {
    throw std::invalid_argument("SIRS needs beta >= 0, D > 0, L > 0, n > 0");
  }
}

namespace {

// Outflow over one step, capped at what the source compartment holds.
double Capped(double flow, double available, int* clamped) {
  flow = std::max(flow, 0.0);
  if (flow <= available) return flow;
  if (clamped) ++*clamped;
  return std::max(available, 0.0);
}

}  // namespace

SeirmState<double> SeirmStep(const SeirmState<double>& x, const SeirmParams& p, double dt,
                             int* clamped) {
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
  const double infection = Capped(p.beta * x.s * x.i * (1.0 / p.n) * dt, x.s, clamped);
  const double onset = Capped(p.alpha * x.e * dt, x.e, clamped);
  // I has two exits; when they overdraw it, both shrink proportionally.
  double recovery = p.gamma * x.i * dt, death = p.mu * x.i * dt;
  const double exits = recovery + death;
  if (exits > x.i && exits > 0.0) {
    if (clamped) ++*clamped;
    recovery *= x.i / exits;
    death = x.i - recovery;
  }
  return {x.s - infection, x.e + infection - onset, x.i + onset - recovery - death,
          x.r + recovery, x.m + death};
}

SirsState<double> SirsStep(const SirsState<double>& x, const SirsParams& p, double dt,
                           int* clamped) {
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
  const double infection = Capped(p.beta * x.i * x.s * (1.0 / p.n) * dt, x.s, clamped);
  const double recovery = Capped(x.i / p.duration * dt, x.i, clamped);
  const double waning = Capped((p.n - x.s - x.i) / p.immunity * dt, p.n - x.s - x.i, clamped);
  return {x.s + waning - infection, x.i + infection - recovery};
}

OdeModel OdeModelFor(Disease d) { return d == Disease::kCovid ? OdeModel::kSeirm : OdeModel::kSirs; }

ParamBounds DefaultOdeBounds(OdeModel model) {
  if (model == OdeModel::kSeirm) {
    return {{0.05, 0.1, 0.05, 0.0, 1e-4}, {1.5, 1.0, 0.5, 0.05, 0.05}};
  }
  return {{0.05, 1.0, 10.0, 1e-4}, {2.0, 10.0, 1000.0, 0.05}};
}

namespace {

std::size_t ParamCount(OdeModel m) { return m == OdeModel::kSeirm ? 5 : 4; }

template <typename T, typename P>
std::vector<T> Integrate(OdeModel model, const std::vector<P>& p, double n, int steps,
                         T zero) {
  std::vector<T> out;
  out.reserve(static_cast<std::size_t>(steps));
  if (model == OdeModel::kSeirm) {
    const P& i0 = p[4];
    SeirmState<T> x{(1.0 - i0) * n, zero, i0 * n, zero, zero};
    for (int t = 0; t < steps; ++t) {
      const SeirmState<T> y = SeirmEuler(x, p[0], p[1], p[2], p[3], n, 1.0);
      out.push_back(y.m - x.m);
      x = y;
    }
  } else {
    const P& i0 = p[3];
    SirsState<T> x{(1.0 - i0) * n, i0 * n};
    for (int t = 0; t < steps; ++t) {
      out.push_back(p[0] * x.i * x.s * (100.0 / (n * n)));
      x = SirsEuler(x, p[0], p[1], p[2], n, 1.0);
    }
  }
  return out;
}

}  // namespace

std::vector<double> OdeSeries(OdeModel model, std::span<const double> params, double n,
                              int steps) {
  if (params.size() != ParamCount(model)) throw std::invalid_argument("wrong ODE parameter count");
  const std::vector<double> p(params.begin(), params.end());
  return Integrate<double, double>(model, p, n, steps, 0.0);
}

Value OdeSeries(OdeModel model, Value params, double n, int steps) {
  if (params.shape().size() != ParamCount(model)) {
    throw std::invalid_argument("wrong ODE parameter count");
  }
  std::vector<Value> p;
  const bool row = params.shape().rows == 1;
  for (std::size_t k = 0; k < ParamCount(model); ++k) {
    p.push_back(row ? ad::SliceCols(params, k, k + 1) : ad::SliceRows(params, k, k + 1));
  }
  const Value zero = params.tape()->Constant(0.0);
  return ad::ConcatRows(Integrate<Value, Value>(model, p, n, steps, zero));
}

SeirmParams OdeFit::seirm() const {
  if (model != OdeModel::kSeirm) throw std::logic_error("not a SEIRM fit");
  return {values[0], values[1], values[2], values[3], population};
}

SirsParams OdeFit::sirs() const {
  if (model != OdeModel::kSirs) throw std::logic_error("not a SIRS fit");
  return {values[0], values[1], values[2], population};
}

OdeFit FitOde(std::span<const double> target, const OdeFitConfig& config) {
  if (target.size() < 2) throw std::invalid_argument("ODE fit needs at least 2 targets");
  config.bounds.Validate();
  config.train.Validate();
  if (config.bounds.size() != ParamCount(config.model)) {
    throw std::invalid_argument("ODE bounds have the wrong length");
  }
  if (!(config.population > 0)) throw std::invalid_argument("population must be > 0");
  const int steps = static_cast<int>(target.size());
  TrainConfig train = config.train;
  OdeFit fit;
  fit.model = config.model;
  fit.population = config.population;
  for (int attempt = 0;; ++attempt) {
    Optimizer opt(train);
    std::vector<Tensor> logits{Tensor({1, config.bounds.size()}, 0.0)};
    Tensor best = logits[0];
    double best_loss = std::numeric_limits<double>::infinity();
    std::vector<double> history;
    bool diverged = false;
    for (int epoch = 0; epoch < train.epochs; ++epoch) {
      ad::Tape tape;
      const Value leaf = tape.Leaf(logits[0]);
      const Value y =
          OdeSeries(config.model, BoundOutputs(leaf, config.bounds), config.population, steps);
      const Value loss = MseLoss(y, target);
      const double l = loss.item();
      history.push_back(l);
      if (!std::isfinite(l)) {
        diverged = true;
        break;
      }
      if (l < best_loss) {
        best_loss = l;
        best = logits[0];
      }
      if (!opt.Step(logits, {ad::Backward(loss)[leaf]})) {
        diverged = true;
        break;
      }
    }
    if (diverged && attempt < config.max_restarts) {
      train.learning_rate *= 0.5;
      ++fit.restarts;
      continue;
    }
    ad::Tape tape;
    fit.values = BoundOutputs(tape.Constant(best), config.bounds).data().vec();
    fit.best_loss = best_loss;
    fit.history = std::move(history);
    return fit;
  }
}

Tensor AbmParams::ToTheta(Disease disease, std::size_t weeks) const {
  const bool covid = disease == Disease::kCovid;
  Tensor t({weeks, covid ? 3u : 2u});
  for (std::size_t w = 0; w < weeks; ++w) {
    t.at(w, 0) = r;
    if (covid) t.at(w, 1) = mortality;
    t.at(w, covid ? 2 : 1) = i0_percent;
  }
  return t;
}

AbmParams SurrogateFromSeirm(const SeirmParams& p, double i0_fraction) {
  const double exits = p.gamma + p.mu;
  return {exits > 0 ? p.beta / exits : 0.0, exits > 0 ? p.mu / exits : 0.0,
          100.0 * i0_fraction};
}

AbmParams SurrogateFromSirs(const SirsParams& p, double i0_fraction) {
  return {p.R0(), 0.0, 100.0 * i0_fraction};
}

AbmParams SurrogateCalibrate(const OdeFit& fit) {
  return fit.model == OdeModel::kSeirm ? SurrogateFromSeirm(fit.seirm(), fit.i0())
                                       : SurrogateFromSirs(fit.sirs(), fit.i0());
}

AbmParams ExpertSearch(const ExpertConfig& config, const ParamBounds& bounds,
                       Disease disease) {
  bounds.Validate();
  const std::size_t i0_index = bounds.size() - 1;
  if (disease == Disease::kCovid) {
    if (!config.r0 || !config.cfr) {
      throw std::invalid_argument("expert search needs expert.r0 and expert.cfr for covid");
    }
    return {*config.r0, *config.cfr, bounds.midpoint(i0_index)};
  }
  if (!config.r0_flu) throw std::invalid_argument("expert search needs expert.r0_flu for flu");
  return {*config.r0_flu, 0.0, bounds.midpoint(i0_index)};
}

}  // namespace diffabm
