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

#ifndef DIFFABM_POPULATION_H_
#define DIFFABM_POPULATION_H_

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "diffabm/autodiff.h"

namespace diffabm {

inline constexpr int kAgeBins = 9;  // 0-10, 11-20, ..., 71-80, 80+

enum class Stage : std::uint8_t { kS = 0, kE = 1, kI = 2, kR = 3, kM = 4 };
inline constexpr int kStageCount = 5;

const char* StageName(Stage s);

struct AgentState {
  std::uint8_t age_bin = 0;
  Stage stage = Stage::kS;
  std::int32_t last_exposure = -1;  // step of exposure; -1 if never exposed

  bool operator==(const AgentState&) const = default;
};

using Population = std::vector<AgentState>;

struct PopulationConfig {
  std::size_t n = 1000;
  std::array<double, kAgeBins> age_distribution{
      1.0 / 9, 1.0 / 9, 1.0 / 9, 1.0 / 9, 1.0 / 9,
      1.0 / 9, 1.0 / 9, 1.0 / 9, 1.0 / 9};
  int mean_degree = 10;
  double rewire_probability = 0.01;
  std::uint64_t seed = 0;

  // Throws std::invalid_argument on violated invariants.
  void Validate() const;
};

// Sparse undirected contact graph. Stored twice: as canonical undirected
// pairs (i < j, sorted) and as a directed edge list holding both
// orientations, sorted by (dst, src). The directed order is canonical, so the
// scatter-add over incoming edges has a fixed summation order no matter how
// the input edges were ordered.
class ContactNetwork {
 public:
  ContactNetwork() = default;

  // Rejects self-loops, duplicate pairs and out-of-range ids.
  static ContactNetwork FromUndirected(
      std::size_t n, std::vector<std::pair<std::int32_t, std::int32_t>> edges);
  // Accepts a directed list that must contain each orientation exactly once.
  static ContactNetwork FromDirected(std::size_t n,
                                     const std::vector<std::int32_t>& src,
                                     const std::vector<std::int32_t>& dst);

  std::size_t n() const { return n_; }
  std::size_t undirected_count() const { return edges_.size(); }
  std::size_t directed_count() const { return src_->size(); }
  double mean_degree() const {
    return n_ == 0 ? 0.0 : 2.0 * static_cast<double>(edges_.size()) / n_;
  }
  const std::vector<std::pair<std::int32_t, std::int32_t>>& edges() const {
    return edges_;
  }
  const ad::SharedIndex& src() const { return src_; }
  const ad::SharedIndex& dst() const { return dst_; }
  std::vector<int> Degrees() const;

 private:
  std::size_t n_ = 0;
  std::vector<std::pair<std::int32_t, std::int32_t>> edges_;
  ad::SharedIndex src_ = std::make_shared<const ad::Index>();
  ad::SharedIndex dst_ = std::make_shared<const ad::Index>();
};

// n agents, all susceptible, age bins drawn from the configured distribution.
Population GeneratePopulation(const PopulationConfig& config);

// Watts-Strogatz: ring lattice with k nearest neighbours, each lattice edge
// rewired with probability p to a uniformly chosen new endpoint (avoiding
// self-loops and duplicates). Always n*k/2 edges; connectivity is not
// guaranteed.
ContactNetwork BuildContactNetwork(const PopulationConfig& config);

// Marks round(i0 * n) uniformly chosen agents as exposed at step 0.
void SeedInfections(Population& agents, double i0, std::uint64_t seed);

// CSV with header `src,dst`, one undirected edge per row, 0-based ids. When
// n is 0 it is inferred as max id + 1.
ContactNetwork LoadEdgeListCsv(std::istream& in, std::size_t n = 0);
ContactNetwork LoadEdgeListCsv(const std::string& path, std::size_t n = 0);
void WriteEdgeListCsv(std::ostream& out, const ContactNetwork& network);

}  // namespace diffabm

#endif  // DIFFABM_POPULATION_H_
