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

#include "diffabm/epi.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace diffabm {

double InfectiousnessCurve::operator()(int days) const {
  if (days <= 0) return 0.0;
  const double d = days;
  return amplitude * std::pow(d, shape - 1.0) * std::exp(-d / scale) /
         (std::tgamma(shape) * std::pow(scale, shape));
}

InfectiousnessCurve InfectiousnessCurve::Normalized(double shape, double scale,
                                                    int horizon) {
  if (!(shape > 0.0 && scale > 0.0) || horizon < 1) {
    throw std::invalid_argument("infectiousness curve needs positive shape, "
                                "scale and horizon");
  }
  InfectiousnessCurve c{shape, scale, 1.0};
  double total = 0.0;
  for (int d = 1; d <= horizon; ++d) total += c(d);
  c.amplitude = 1.0 / total;
  return c;
}

std::vector<double> TransmissionParams::WeeklyToSteps(
    const std::vector<double>& weekly, int steps) {
  if (weekly.empty()) throw std::invalid_argument("no weekly values");
  std::vector<double> out(static_cast<std::size_t>(steps));
  for (int t = 0; t < steps; ++t) {
    out[t] = weekly[std::min<std::size_t>(t / 7, weekly.size() - 1)];
  }
  return out;
}

void ProgressionParams::Validate() const {
  if (tau_ei < 1 || tau_ir < 1 || tau_im < 1) {
    throw std::invalid_argument("transition times must be at least one day");
  }
  if (!(mortality >= 0.0 && mortality <= 1.0)) {
    throw std::invalid_argument("mortality must lie in [0, 1]");
  }
}

Stage StageAfter(int days, bool will_expire, const ProgressionParams& p) {
  if (days < p.tau_ei) return Stage::kE;
  if (will_expire) return days < p.expire_day() ? Stage::kI : Stage::kM;
  return days < p.recover_day() ? Stage::kI : Stage::kR;
}

double EdgeRate(double r, double susceptibility, double transmissibility,
                double infectiousness, double mean_degree) {
  return (r / mean_degree) * susceptibility * transmissibility * infectiousness;
}

double InfectionProbability(double lambda) { return 1.0 - std::exp(-lambda); }

double GumbelSoftmaxSoft(double q, double g1, double g2, double temperature) {
  if (!(temperature > 0.0)) {
    throw std::invalid_argument("temperature must be positive");
  }
  q = std::clamp(q, kProbabilityClamp, 1.0 - kProbabilityClamp);
  const double a = (std::log(q) + g1) / temperature;
  const double b = (std::log(1.0 - q) + g2) / temperature;
  // softmax(a, b)[0]
  const double mx = std::max(a, b);
  const double ea = std::exp(a - mx);
  const double eb = std::exp(b - mx);
  return ea / (ea + eb);
}

bool GumbelHard(double q, double g1, double g2) {
  if (q <= 0.0) return false;
  if (q >= 1.0) return true;
  return std::log(q) + g1 > std::log1p(-q) + g2;
}

ad::Value GumbelSoftmaxBernoulli(ad::Value q, const ad::Tensor& g1,
                                 const ad::Tensor& g2, double temperature,
                                 bool straight_through) {
  if (!(temperature > 0.0)) {
    throw std::invalid_argument("temperature must be positive");
  }
  ad::Tape& tape = *q.tape();
  ad::Value qc = ad::Clamp(q, kProbabilityClamp, 1.0 - kProbabilityClamp);
  ad::Value a = (ad::Log(qc) + tape.Constant(g1)) * (1.0 / temperature);
  ad::Value b = (ad::Log(1.0 - qc) + tape.Constant(g2)) * (1.0 / temperature);
  const ad::Value both[] = {a, b};
  ad::Value soft = ad::SliceCols(ad::Softmax(ad::ConcatCols(both)), 0, 1);
  if (!straight_through) return soft;
  const ad::Tensor& qd = q.data();
  ad::Tensor hard(qd.shape());
  for (std::size_t i = 0; i < qd.size(); ++i) {
    hard[i] = GumbelHard(qd[i], g1[i], g2[i]) ? 1.0 : 0.0;
  }
  return ad::StraightThrough(soft, std::move(hard));
}

GumbelPair DrawGumbelPair(const CounterRng& rng, int step, std::size_t agent) {
  return {rng.Gumbel(streams::kGumbel, static_cast<std::uint64_t>(step), agent, 0),
          rng.Gumbel(streams::kGumbel, static_cast<std::uint64_t>(step), agent, 1)};
}

double MortalityDraw(const CounterRng& rng, std::size_t agent) {
  return rng.Uniform(streams::kMortality, agent);
}

// ---------------------------------------------------------------------------
// HardSimulator

namespace {

double Modifier(const std::vector<double>& v, std::size_t i) {
  return v.empty() ? 1.0 : v[i];
}

}  // namespace

HardSimulator::HardSimulator(Population agents, const ContactNetwork& network,
                             TransmissionParams transmission,
                             ProgressionParams progression,
                             InfectiousnessCurve curve, std::uint64_t seed)
    : agents_(std::move(agents)),
      network_(network),
      transmission_(std::move(transmission)),
      progression_(progression),
      curve_(curve),
      rng_(seed),
      will_expire_(agents_.size(), 0) {
  progression_.Validate();
  if (network_.n() != agents_.size()) {
    throw std::invalid_argument("network has " + std::to_string(network_.n()) +
                                " agents, population has " +
                                std::to_string(agents_.size()));
  }
  for (std::size_t i = 0; i < agents_.size(); ++i) {
    if (agents_[i].last_exposure >= 0) {
      will_expire_[i] = MortalityDraw(rng_, i) < progression_.mortality;
    }
  }
}

double HardSimulator::Infectiousness(std::size_t j) const {
  const AgentState& a = agents_[j];
  if (a.stage != Stage::kE && a.stage != Stage::kI) return 0.0;
  const int d = time_ - a.last_exposure;
  if (d < 1) return 0.0;
  const double t = a.stage == Stage::kE ? transmission_.transmissibility_e
                                        : transmission_.transmissibility_i;
  return t * curve_(d) * Modifier(modifiers_.transmission, j);
}

std::vector<double> HardSimulator::AccumulatedRates() const {
  const std::size_t n = agents_.size();
  std::vector<double> lambda(n, 0.0);
  if (network_.directed_count() == 0) return lambda;
  if (static_cast<std::size_t>(time_) >= transmission_.r.size()) {
    throw std::out_of_range("no reproduction rate for step " +
                            std::to_string(time_));
  }
  std::vector<double> inf(n);
  for (std::size_t j = 0; j < n; ++j) inf[j] = Infectiousness(j);
  const auto& src = *network_.src();
  const auto& dst = *network_.dst();
  for (std::size_t k = 0; k < src.size(); ++k) lambda[dst[k]] += inf[src[k]];
  const double scale = transmission_.r[time_] / network_.mean_degree();
  for (std::size_t i = 0; i < n; ++i) {
    if (agents_[i].stage != Stage::kS) {
      lambda[i] = 0.0;
      continue;
    }
    lambda[i] *= scale * transmission_.susceptibility[agents_[i].age_bin] *
                 Modifier(modifiers_.susceptibility, i);
  }
  return lambda;
}

void HardSimulator::Expose(std::int32_t agent) {
  AgentState& a = agents_[agent];
  a.stage = Stage::kE;
  a.last_exposure = time_;
  const double p =
      std::min(1.0, progression_.mortality * Modifier(modifiers_.mortality, agent));
  will_expire_[agent] = MortalityDraw(rng_, agent) < p;
}

std::vector<std::int32_t> HardSimulator::Transmit() {
  const std::vector<double> lambda = AccumulatedRates();
  std::vector<std::int32_t> exposed;
  for (std::size_t i = 0; i < agents_.size(); ++i) {
    if (lambda[i] <= 0.0) continue;
    const GumbelPair g = DrawGumbelPair(rng_, time_, i);
    if (GumbelHard(InfectionProbability(lambda[i]), g.g1, g.g2)) {
      exposed.push_back(static_cast<std::int32_t>(i));
    }
  }
  for (std::int32_t i : exposed) Expose(i);
  return exposed;
}

void HardSimulator::Progress() {
  const int next = time_ + 1;
  for (std::size_t i = 0; i < agents_.size(); ++i) {
    AgentState& a = agents_[i];
    if (a.stage == Stage::kE || a.stage == Stage::kI) {
      a.stage = StageAfter(next - a.last_exposure, will_expire_[i], progression_);
    }
  }
  time_ = next;
}

std::vector<std::int32_t> HardSimulator::Step() {
  auto exposed = Transmit();
  Progress();
  return exposed;
}

std::array<double, kStageCount> HardSimulator::Census() const {
  std::array<double, kStageCount> c{};
  for (const AgentState& a : agents_) c[static_cast<int>(a.stage)] += 1.0;
  return c;
}

std::vector<double> SimOutput::DailyTarget() const {
  std::vector<double> out;
  for (std::size_t t = 1; t < cumulative_target.size(); ++t) {
    out.push_back(cumulative_target[t] - cumulative_target[t - 1]);
  }
  return out;
}

std::vector<double> SimOutput::DailyIncidencePercent() const {
  double n = 0.0;
  for (double v : census.front()) n += v;
  std::vector<double> out;
  for (double v : new_infections) out.push_back(100.0 * v / n);
  return out;
}

SimOutput RunSimulation(const Population& agents, const ContactNetwork& network,
                        const TransmissionParams& transmission,
                        const ProgressionParams& progression,
                        const InfectiousnessCurve& curve,
                        const SimOptions& options) {
  if (options.steps < 1) throw std::invalid_argument("steps must be >= 1");
  HardSimulator sim(agents, network, transmission, progression, curve,
                    options.seed);
  SimOutput out;
  auto record = [&] {
    const auto c = sim.Census();
    out.census.push_back(c);
    const double rm = c[static_cast<int>(Stage::kR)] + c[static_cast<int>(Stage::kM)];
    out.cumulative_target.push_back(progression.mortality * rm);
    out.deaths.push_back(c[static_cast<int>(Stage::kM)]);
  };
  record();
  for (int t = 0; t < options.steps; ++t) {
    out.new_infections.push_back(static_cast<double>(sim.Step().size()));
    record();
  }
  return out;
}

double Aggregate(const Population& agents, double mortality) {
  std::size_t count = 0;
  for (const AgentState& a : agents) {
    count += a.stage == Stage::kR || a.stage == Stage::kM;
  }
  return mortality * static_cast<double>(count);
}

ad::Value Aggregate(ad::Value soft_count, ad::Value mortality) {
  return mortality * soft_count;
}

// ---------------------------------------------------------------------------
// Differentiable engine

DiffParams DiffParams::Constants(ad::Tape& tape, const TransmissionParams& t,
                                 const ProgressionParams& p) {
  DiffParams d;
  d.r_per_step = tape.Constant(ad::Tensor::Column(t.r));
  d.susceptibility = tape.Constant(ad::Tensor::Column(
      std::vector<double>(t.susceptibility.begin(), t.susceptibility.end())));
  d.mortality = tape.Constant(p.mortality);
  d.i0 = tape.Constant(t.i0);
  return d;
}

ad::Value DiffSimOutput::DailyTarget() const {
  std::vector<ad::Value> days;
  for (std::size_t t = 1; t < cumulative_target.size(); ++t) {
    days.push_back(cumulative_target[t] - cumulative_target[t - 1]);
  }
  return ad::ConcatRows(days);
}

ad::Value DiffSimOutput::DailyIncidencePercent(std::size_t n) const {
  return ad::ConcatRows(new_infections) * (100.0 / static_cast<double>(n));
}

namespace {

// Infectiousness weight of a source `d` days after exposure, split by the
// recovering and expiring I durations.
struct SourceWeights {
  std::vector<double> recovering;  // index d
  std::vector<double> expiring;
};

SourceWeights MakeSourceWeights(const TransmissionParams& tp,
                                const ProgressionParams& pp,
                                const InfectiousnessCurve& curve, int steps) {
  SourceWeights w;
  w.recovering.assign(static_cast<std::size_t>(steps) + 1, 0.0);
  w.expiring.assign(static_cast<std::size_t>(steps) + 1, 0.0);
  for (int d = 1; d <= steps; ++d) {
    if (d < pp.tau_ei) {
      w.recovering[d] = w.expiring[d] = tp.transmissibility_e * curve(d);
      continue;
    }
    const double inf = tp.transmissibility_i * curve(d);
    if (d < pp.recover_day()) w.recovering[d] = inf;
    if (d < pp.expire_day()) w.expiring[d] = inf;
  }
  return w;
}

}  // namespace

DiffSimOutput RunDifferentiable(ad::Tape& tape, const Population& agents,
                                const ContactNetwork& network,
                                const DiffParams& params,
                                const TransmissionParams& transmission,
                                const ProgressionParams& progression,
                                const InfectiousnessCurve& curve,
                                const DiffOptions& options) {
  progression.Validate();
  const int steps = options.steps;
  const std::size_t n = agents.size();
  if (steps < 1) throw std::invalid_argument("steps must be >= 1");
  if (!(options.temperature > 0.0)) {
    throw std::invalid_argument("temperature must be positive");
  }
  if (network.n() != n) {
    throw std::invalid_argument("network/population size mismatch");
  }
  if (params.r_per_step.shape().rows < static_cast<std::size_t>(steps)) {
    throw std::invalid_argument("reproduction rate series shorter than run");
  }
  const CounterRng rng(options.seed);
  const bool straight_through =
      options.relaxation == Relaxation::kStraightThrough;

  auto age_index = std::make_shared<ad::Index>(n);
  for (std::size_t i = 0; i < n; ++i) (*age_index)[i] = agents[i].age_bin;
  ad::Value agent_susceptibility = ad::Gather(params.susceptibility, age_index);
  const bool has_edges = network.directed_count() > 0;
  ad::Value target_susceptibility;
  if (has_edges) {
    target_susceptibility = ad::Gather(agent_susceptibility, network.dst());
  }
  const double inv_degree = has_edges ? 1.0 / network.mean_degree() : 0.0;

  // Expiry routing: hard tags in straight-through mode, the expected
  // fraction m otherwise.
  ad::Value route;
  const double m = params.mortality.item();
  if (straight_through) {
    ad::Tensor tags({n, 1});
    for (std::size_t i = 0; i < n; ++i) {
      tags[i] = MortalityDraw(rng, i) < m ? 1.0 : 0.0;
    }
    route = tape.Constant(std::move(tags));
  } else {
    route = params.mortality;
  }
  auto route_at = [&](std::size_t i) {
    const ad::Tensor& r = route.data();
    return r.size() == 1 ? r[0] : r[i];
  };

  // Initial exposure mass.
  ad::Value x0;
  if (options.seeding == Seeding::kMeanField) {
    for (const AgentState& a : agents) {
      if (a.stage != Stage::kS) {
        throw std::invalid_argument(
            "mean-field seeding expects an all-susceptible population");
      }
    }
    x0 = params.i0 * tape.Constant(ad::Tensor({n, 1}, 1.0));
  } else {
    ad::Tensor seeds({n, 1});
    for (std::size_t i = 0; i < n; ++i) {
      const AgentState& a = agents[i];
      if (a.stage == Stage::kS) continue;
      if (a.stage != Stage::kE || a.last_exposure != 0) {
        throw std::invalid_argument(
            "differentiable run supports initial exposures at step 0 only");
      }
      seeds[i] = 1.0;
    }
    x0 = tape.Constant(std::move(seeds));
  }
  ad::Value susceptible = 1.0 - x0;

  const SourceWeights weights =
      MakeSourceWeights(transmission, progression, curve, steps);
  const int recover_day = progression.recover_day();
  const int expire_day = progression.expire_day();

  DiffSimOutput out;
  std::vector<ad::Value> exposure{x0};    // by exposure step
  std::vector<ad::Value> cumulative{x0};  // prefix sums over exposure steps

  auto census_at = [&](int time) {
    std::array<double, kStageCount> c{};
    for (double v : susceptible.data().vec()) c[0] += v;
    for (int e = 0; e < static_cast<int>(exposure.size()); ++e) {
      const int d = time - e;
      const ad::Tensor& x = exposure[e].data();
      for (std::size_t i = 0; i < n; ++i) {
        const double mass = x[i];
        if (mass == 0.0) continue;
        if (d < progression.tau_ei) {
          c[1] += mass;
          continue;
        }
        const double r = route_at(i);
        c[d < recover_day ? 2 : 3] += mass * (1.0 - r);
        c[d < expire_day ? 2 : 4] += mass * r;
      }
    }
    return c;
  };
  auto removed_at = [&](int time) -> ad::Value {
    // Soft count of agents in {R, M} at `time`.
    const int ea = time - recover_day;
    const int eb = time - expire_day;
    const ad::Value zero = tape.Constant(ad::Tensor({n, 1}, 0.0));
    ad::Value ca = ea >= 0 ? cumulative[ea] : zero;
    ad::Value cb = eb >= 0 ? cumulative[eb] : zero;
    return ad::Sum(ca) + ad::Sum(route * (cb - ca));
  };

  out.census.push_back(census_at(0));
  out.cumulative_target.push_back(params.mortality * removed_at(0));

  for (int t = 0; t < steps; ++t) {
    // Infectiousness of every agent as a source at step t.
    ad::Value inf, inf_diff;
    for (int d = 1; d <= t; ++d) {
      const ad::Value& x = exposure[t - d];
      if (weights.recovering[d] != 0.0) {
        ad::Value term = x * weights.recovering[d];
        inf = inf.valid() ? inf + term : term;
      }
      const double diff = weights.expiring[d] - weights.recovering[d];
      if (diff != 0.0) {
        ad::Value term = x * diff;
        inf_diff = inf_diff.valid() ? inf_diff + term : term;
      }
    }
    if (inf_diff.valid()) {
      ad::Value routed = route * inf_diff;
      inf = inf.valid() ? inf + routed : routed;
    }

    ad::Value new_exposure;
    if (inf.valid() && has_edges) {
      ad::Value r_t = ad::SliceRows(params.r_per_step, t, t + 1);
      ad::Value incoming = ad::ScatterAdd(
          ad::Gather(inf, network.src()) * target_susceptibility, network.dst(), n);
      ad::Value lambda = incoming * (r_t * inv_degree);
      out.rates.push_back(lambda);
      ad::Value q = 1.0 - ad::Exp(-lambda);

      ad::Tensor g1({n, 1}), g2({n, 1}), mask({n, 1});
      for (std::size_t i = 0; i < n; ++i) {
        const GumbelPair g = DrawGumbelPair(rng, t, i);
        g1[i] = g.g1;
        g2[i] = g.g2;
        mask[i] = lambda.data()[i] > 0.0 ? 1.0 : 0.0;
      }
      ad::Value indicator =
          GumbelSoftmaxBernoulli(q, g1, g2, options.temperature, straight_through) *
          tape.Constant(std::move(mask));
      new_exposure = susceptible * indicator;
      susceptible = susceptible - new_exposure;
      out.new_infections.push_back(ad::Sum(new_exposure));
    } else {
      out.rates.push_back(tape.Constant(ad::Tensor({n, 1}, 0.0)));
      out.new_infections.push_back(tape.Constant(0.0));
    }

    if (t > 0) {
      ad::Value x = new_exposure.valid()
                        ? new_exposure
                        : tape.Constant(ad::Tensor({n, 1}, 0.0));
      exposure.push_back(x);
      cumulative.push_back(cumulative.back() + x);
    } else if (new_exposure.valid()) {
      exposure[0] = exposure[0] + new_exposure;
      cumulative[0] = exposure[0];
    }

    out.census.push_back(census_at(t + 1));
    out.cumulative_target.push_back(params.mortality * removed_at(t + 1));
  }
  return out;
}

}  // namespace diffabm
