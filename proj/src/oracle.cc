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

// Exhaustive enumeration of hard-mode outcomes. Written against the model
// definition directly; shares no code path with the two engines.

#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "diffabm/epi.h"

namespace diffabm {

namespace {

struct OracleAgent {
  int exposed_at = -1;
  bool expires = false;
};

class Enumerator {
 public:
  Enumerator(const Population& agents, const ContactNetwork& network,
             const TransmissionParams& tp, const ProgressionParams& pp,
             const InfectiousnessCurve& curve, int steps)
      : agents_(agents), tp_(tp), pp_(pp), curve_(curve), steps_(steps),
        neighbours_(agents.size()) {
    for (auto [a, b] : network.edges()) {
      neighbours_[a].push_back(b);
      neighbours_[b].push_back(a);
    }
    mean_degree_ = network.mean_degree();
  }

  double Run() {
    std::vector<OracleAgent> state(agents_.size());
    std::vector<int> seeded;
    for (std::size_t i = 0; i < agents_.size(); ++i) {
      if (agents_[i].stage == Stage::kS) continue;
      if (agents_[i].stage != Stage::kE || agents_[i].last_exposure != 0) {
        throw std::invalid_argument("oracle supports step-0 exposures only");
      }
      state[i].exposed_at = 0;
      seeded.push_back(static_cast<int>(i));
    }
    // Expiry tags of the seeded agents.
    double total = 0.0;
    const std::size_t combos = std::size_t{1} << seeded.size();
    for (std::size_t mask = 0; mask < combos; ++mask) {
      double p = 1.0;
      for (std::size_t k = 0; k < seeded.size(); ++k) {
        const bool tag = (mask >> k) & 1;
        state[seeded[k]].expires = tag;
        p *= tag ? pp_.mortality : 1.0 - pp_.mortality;
      }
      if (p == 0.0) continue;
      total += p * Expect(state, 0);
    }
    return total;
  }

 private:
  // Days of infectiousness remaining after exposure.
  int InfectiousUntil(const OracleAgent& a) const {
    return pp_.tau_ei + (a.expires ? pp_.tau_im : pp_.tau_ir);
  }

  double SourceRate(const OracleAgent& a, int t) const {
    if (a.exposed_at < 0) return 0.0;
    const int d = t - a.exposed_at;
    if (d < 1 || d >= InfectiousUntil(a)) return 0.0;
    const double stage_weight =
        d < pp_.tau_ei ? tp_.transmissibility_e : tp_.transmissibility_i;
    return stage_weight * curve_(d);
  }

  double Expect(std::vector<OracleAgent>& state, int t) {
    if (t == steps_) {
      int removed = 0;
      for (const OracleAgent& a : state) {
        if (a.exposed_at >= 0 && steps_ - a.exposed_at >= InfectiousUntil(a)) {
          ++removed;
        }
      }
      return pp_.mortality * removed;
    }
    // Susceptible agents with a positive infection probability.
    std::vector<int> at_risk;
    std::vector<double> prob;
    for (std::size_t i = 0; i < state.size(); ++i) {
      if (state[i].exposed_at >= 0) continue;
      double lambda = 0.0;
      for (int j : neighbours_[i]) {
        lambda += tp_.r[t] / mean_degree_ *
                  tp_.susceptibility[agents_[i].age_bin] * SourceRate(state[j], t);
      }
      if (lambda > 0.0) {
        at_risk.push_back(static_cast<int>(i));
        prob.push_back(1.0 - std::exp(-lambda));
      }
    }
    // Each at-risk agent: stays S, exposed and recovering, exposed and expiring.
    double total = 0.0;
    std::function<void(std::size_t, double)> branch = [&](std::size_t k,
                                                          double p) {
      if (p == 0.0) return;
      if (k == at_risk.size()) {
        total += p * Expect(state, t + 1);
        return;
      }
      OracleAgent& a = state[at_risk[k]];
      branch(k + 1, p * (1.0 - prob[k]));
      a.exposed_at = t;
      a.expires = false;
      branch(k + 1, p * prob[k] * (1.0 - pp_.mortality));
      a.expires = true;
      branch(k + 1, p * prob[k] * pp_.mortality);
      a.exposed_at = -1;
      a.expires = false;
    };
    branch(0, 1.0);
    return total;
  }

  const Population& agents_;
  const TransmissionParams& tp_;
  const ProgressionParams& pp_;
  const InfectiousnessCurve& curve_;
  int steps_;
  std::vector<std::vector<int>> neighbours_;
  double mean_degree_ = 0.0;
};

}  // namespace

double ExactExpectedTarget(const Population& agents,
                           const ContactNetwork& network,
                           const TransmissionParams& transmission,
                           const ProgressionParams& progression,
                           const InfectiousnessCurve& curve, int steps) {
  if (agents.size() > 10) {
    throw std::invalid_argument("oracle enumeration limited to n <= 10, got " +
                                std::to_string(agents.size()));
  }
  if (steps < 1 || steps > 3) {
    throw std::invalid_argument("oracle enumeration limited to 1 <= K <= 3, got " +
                                std::to_string(steps));
  }
  if (transmission.r.size() < static_cast<std::size_t>(steps)) {
    throw std::invalid_argument("reproduction rate series shorter than run");
  }
  progression.Validate();
  return Enumerator(agents, network, transmission, progression, curve, steps)
      .Run();
}

}  // namespace diffabm
