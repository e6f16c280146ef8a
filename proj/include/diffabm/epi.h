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

// The agent-based transmission/progression model.
//
// Timeline: the state at time t (t = 0..K) is a function of each agent's
// exposure step e. With d = t - e, an exposed agent is E while d < tau_ei,
// then I until d reaches tau_ei + tau_ir (recovering) or tau_ei + tau_im
// (expiring), then R or M. Update t reads the state at time t, exposes new
// agents with e = t, and yields the state at time t + 1. Agents exposed at
// step t only become infectious sources from step t + 1 on.
//
// Two engines share these semantics:
//   * RunSimulation: fast hard-mode engine on plain arrays (benchmarks,
//     policy experiments, Monte Carlo, reporting).
//   * RunDifferentiable: records the run on an autodiff tape, either with
//     Gumbel-Softmax relaxed infection indicators or straight-through hard
//     samples. Per-agent state becomes a soft exposure mass per step.

#ifndef DIFFABM_EPI_H_
#define DIFFABM_EPI_H_

#include <array>
#include <cstdint>
#include <vector>

#include "diffabm/autodiff.h"
#include "diffabm/population.h"
#include "diffabm/rng.h"

namespace diffabm {

// Scaled gamma density used as infectiousness by days since exposure.
struct InfectiousnessCurve {
  double shape = 2.0;
  double scale = 2.5;
  double amplitude = 1.0;

  double operator()(int days) const;

  // Amplitude chosen so that the curve sums to 1 over days 1..horizon.
  static InfectiousnessCurve Normalized(double shape, double scale,
                                        int horizon = 14);
};

struct TransmissionParams {
  std::vector<double> r;  // per step; constant within each 7-step week
  std::array<double, kAgeBins> susceptibility{1, 1, 1, 1, 1, 1, 1, 1, 1};
  double transmissibility_e = 0.33;
  double transmissibility_i = 1.0;
  double i0 = 0.0;  // initial infected fraction

  // Expands weekly values to one value per step.
  static std::vector<double> WeeklyToSteps(const std::vector<double>& weekly,
                                           int steps);
};

struct ProgressionParams {
  int tau_ei = 3;
  int tau_ir = 7;
  int tau_im = 10;
  double mortality = 0.01;

  void Validate() const;
  int recover_day() const { return tau_ei + tau_ir; }
  int expire_day() const { return tau_ei + tau_im; }
};

// Stage of an agent `days` after exposure.
Stage StageAfter(int days, bool will_expire, const ProgressionParams& p);

// lambda_ij = (R / <k>) * S_{a_i} * T_{d_j} * f(t - e_j).
double EdgeRate(double r, double susceptibility, double transmissibility,
                double infectiousness, double mean_degree);

// Probability of a new infection from an accumulated rate: 1 - exp(-lambda).
double InfectionProbability(double lambda);

inline constexpr double kProbabilityClamp = 1e-6;

// Soft value of the relaxed Bernoulli(q): first component of
// softmax((log q + g1) / tau, (log(1 - q) + g2) / tau), with q clamped to
// [eps, 1 - eps].
double GumbelSoftmaxSoft(double q, double g1, double g2, double temperature);
// Exact Bernoulli(q) sample from the same noise (argmax of perturbed logits,
// without clamping so q = 0 never fires).
bool GumbelHard(double q, double g1, double g2);

// Tape version over a column of probabilities. In straight-through mode the
// forward value is the hard argmax and the gradient is the soft one.
ad::Value GumbelSoftmaxBernoulli(ad::Value q, const ad::Tensor& g1,
                                 const ad::Tensor& g2, double temperature,
                                 bool straight_through);

// Noise protocol: one Gumbel pair per (step, agent), addressed by counter
// from the run seed.
struct GumbelPair {
  double g1, g2;
};
GumbelPair DrawGumbelPair(const CounterRng& rng, int step, std::size_t agent);
// Uniform draw deciding whether agent i expires if ever exposed.
double MortalityDraw(const CounterRng& rng, std::size_t agent);

// ---------------------------------------------------------------------------
// Hard-mode engine.

// Per-agent modifiers used by interventions. Empty vectors mean 1.0.
struct AgentModifiers {
  std::vector<double> susceptibility;  // scales S_{a_i}
  std::vector<double> transmission;    // scales outgoing rates (quarantine)
  std::vector<double> mortality;       // scales the expiry probability
};

class HardSimulator {
 public:
  HardSimulator(Population agents, const ContactNetwork& network,
                TransmissionParams transmission, ProgressionParams progression,
                InfectiousnessCurve curve, std::uint64_t seed);

  // Accumulated rate lambda_A per agent at the current step (0 for
  // non-susceptible agents).
  std::vector<double> AccumulatedRates() const;
  // Transmit: returns the agents newly exposed at the current step.
  std::vector<std::int32_t> Transmit();
  // Progress: advances stages to time t + 1.
  void Progress();
  // Transmit then Progress; returns the newly exposed agents.
  std::vector<std::int32_t> Step();

  int time() const { return time_; }
  const Population& agents() const { return agents_; }
  const std::vector<std::uint8_t>& will_expire() const { return will_expire_; }
  std::array<double, kStageCount> Census() const;
  AgentModifiers& modifiers() { return modifiers_; }
  // Marks an agent as exposed now (used for explicit seeding).
  void Expose(std::int32_t agent);

 private:
  double Infectiousness(std::size_t agent) const;

  Population agents_;
  const ContactNetwork& network_;
  TransmissionParams transmission_;
  ProgressionParams progression_;
  InfectiousnessCurve curve_;
  CounterRng rng_;
  std::vector<std::uint8_t> will_expire_;
  AgentModifiers modifiers_;
  int time_ = 0;
};

struct SimOutput {
  std::vector<std::array<double, kStageCount>> census;  // times 0..K
  std::vector<double> new_infections;   // exposures made in update t, t < K
  std::vector<double> cumulative_target;  // m * #{R, M} at times 0..K
  std::vector<double> deaths;           // #{M} at times 0..K

  double final_target() const { return cumulative_target.back(); }
  // Daily increments of the cumulative target (length K).
  std::vector<double> DailyTarget() const;
  // 100 * new infections / n (length K).
  std::vector<double> DailyIncidencePercent() const;
};

struct SimOptions {
  int steps = 28;
  std::uint64_t seed = 0;
};

// `agents` carries the initial state (seed with SeedInfections).
SimOutput RunSimulation(const Population& agents, const ContactNetwork& network,
                        const TransmissionParams& transmission,
                        const ProgressionParams& progression,
                        const InfectiousnessCurve& curve,
                        const SimOptions& options);

// ŷ = m * count of agents in {R, M}.
double Aggregate(const Population& agents, double mortality);
ad::Value Aggregate(ad::Value soft_count, ad::Value mortality);

// ---------------------------------------------------------------------------
// Differentiable engine.

enum class Relaxation { kSoft, kStraightThrough };
enum class Seeding {
  kPopulation,  // exposures already present in the population (e = 0)
  kMeanField,   // every agent carries exposure mass i0 at t = 0
};

struct DiffParams {
  ad::Value r_per_step;      // [K, 1]
  ad::Value susceptibility;  // [9, 1]
  ad::Value mortality;       // scalar
  ad::Value i0;              // scalar fraction, used by kMeanField

  static DiffParams Constants(ad::Tape& tape, const TransmissionParams& t,
                              const ProgressionParams& p);
};

struct DiffOptions {
  int steps = 28;
  std::uint64_t seed = 0;
  Relaxation relaxation = Relaxation::kSoft;
  double temperature = 0.5;
  Seeding seeding = Seeding::kMeanField;
};

struct DiffSimOutput {
  std::vector<ad::Value> cumulative_target;  // times 0..K
  std::vector<ad::Value> new_infections;     // soft counts, updates 0..K-1
  std::vector<std::array<double, kStageCount>> census;  // times 0..K
  std::vector<ad::Value> rates;  // lambda_A per update (for inspection)

  ad::Value final_target() const { return cumulative_target.back(); }
  // [K, 1] column of daily increments of the cumulative target.
  ad::Value DailyTarget() const;
  // [K, 1] column of 100 * soft new infections / n.
  ad::Value DailyIncidencePercent(std::size_t n) const;
};

// The transmission parameters contribute T_E/T_I; R, S_a, m, i0 come from
// `params` and are differentiable. Progression times come from `progression`.
DiffSimOutput RunDifferentiable(ad::Tape& tape, const Population& agents,
                                const ContactNetwork& network,
                                const DiffParams& params,
                                const TransmissionParams& transmission,
                                const ProgressionParams& progression,
                                const InfectiousnessCurve& curve,
                                const DiffOptions& options);

// ---------------------------------------------------------------------------
// Brute-force expectation oracle for tiny instances: enumerates every
// infection and expiry outcome of K hard-mode updates and returns E[ŷ_K].
// Independent of both engines above. Requires n <= 10 and K <= 3.
double ExactExpectedTarget(const Population& agents,
                           const ContactNetwork& network,
                           const TransmissionParams& transmission,
                           const ProgressionParams& progression,
                           const InfectiousnessCurve& curve, int steps);

}  // namespace diffabm

#endif  // DIFFABM_EPI_H_
