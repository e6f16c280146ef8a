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

#include "diffabm/population.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

#include "diffabm/rng.h"

namespace diffabm {

const char* StageName(Stage s) {
  switch (s) {
    case Stage::kS: return "S";
    case Stage::kE: return "E";
    case Stage::kI: return "I";
    case Stage::kR: return "R";
    case Stage::kM: return "M";
  }
  return "?";
}

void PopulationConfig::Validate() const {
  if (n == 0) throw std::invalid_argument("population size must be positive");
  double total = 0.0;
  for (double p : age_distribution) {
    if (!(p >= 0.0)) {
      throw std::invalid_argument("age distribution has a negative entry");
    }
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-12) {
    throw std::invalid_argument("age distribution sums to " +
                                std::to_string(total) + ", expected 1");
  }
  if (mean_degree < 2 || mean_degree % 2 != 0) {
    throw std::invalid_argument("mean degree must be an even integer >= 2, got " +
                                std::to_string(mean_degree));
  }
  if (static_cast<std::size_t>(mean_degree) >= n) {
    throw std::invalid_argument("mean degree " + std::to_string(mean_degree) +
                                " must be below n = " + std::to_string(n));
  }
  if (!(rewire_probability >= 0.0 && rewire_probability <= 1.0)) {
    throw std::invalid_argument("rewire probability must lie in [0, 1]");
  }
}

namespace {

using Pair = std::pair<std::int32_t, std::int32_t>;

Pair Ordered(std::int32_t a, std::int32_t b) {
  return a < b ? Pair{a, b} : Pair{b, a};
}

}  // namespace

ContactNetwork ContactNetwork::FromUndirected(std::size_t n,
                                              std::vector<Pair> edges) {
  for (std::size_t k = 0; k < edges.size(); ++k) {
    auto [a, b] = edges[k];
    if (a < 0 || b < 0 || static_cast<std::size_t>(a) >= n ||
        static_cast<std::size_t>(b) >= n) {
      throw std::invalid_argument("edge " + std::to_string(k) +
                                  " references an agent outside [0, " +
                                  std::to_string(n) + ")");
    }
    if (a == b) {
      throw std::invalid_argument("edge " + std::to_string(k) +
                                  " is a self-loop on agent " + std::to_string(a));
    }
    edges[k] = Ordered(a, b);
  }
  std::sort(edges.begin(), edges.end());
  if (auto dup = std::adjacent_find(edges.begin(), edges.end());
      dup != edges.end()) {
    throw std::invalid_argument("duplicate edge (" + std::to_string(dup->first) +
                                ", " + std::to_string(dup->second) + ")");
  }

  std::vector<Pair> directed;
  directed.reserve(2 * edges.size());
  for (auto [a, b] : edges) {
    directed.push_back({b, a});  // (dst, src)
    directed.push_back({a, b});
  }
  std::sort(directed.begin(), directed.end());
  ad::Index src(directed.size()), dst(directed.size());
  for (std::size_t k = 0; k < directed.size(); ++k) {
    dst[k] = directed[k].first;
    src[k] = directed[k].second;
  }

  ContactNetwork net;
  net.n_ = n;
  net.edges_ = std::move(edges);
  net.src_ = std::make_shared<const ad::Index>(std::move(src));
  net.dst_ = std::make_shared<const ad::Index>(std::move(dst));
  return net;
}

ContactNetwork ContactNetwork::FromDirected(std::size_t n,
                                            const std::vector<std::int32_t>& src,
                                            const std::vector<std::int32_t>& dst) {
  if (src.size() != dst.size()) {
    throw std::invalid_argument("directed edge arrays differ in length");
  }
  std::vector<Pair> forward, backward;
  for (std::size_t k = 0; k < src.size(); ++k) {
    if (src[k] < dst[k]) {
      forward.push_back({src[k], dst[k]});
    } else {
      backward.push_back(Ordered(src[k], dst[k]));
    }
  }
  std::sort(forward.begin(), forward.end());
  std::sort(backward.begin(), backward.end());
  if (forward != backward) {
    throw std::invalid_argument(
        "directed edge list is not symmetric (each pair needs both "
        "orientations exactly once)");
  }
  return FromUndirected(n, std::move(forward));
}

std::vector<int> ContactNetwork::Degrees() const {
  std::vector<int> deg(n_, 0);
  for (auto [a, b] : edges_) {
    ++deg[a];
    ++deg[b];
  }
  return deg;
}

Population GeneratePopulation(const PopulationConfig& config) {
  config.Validate();
  CounterRng rng(config.seed);
  std::array<double, kAgeBins> cdf{};
  std::partial_sum(config.age_distribution.begin(),
                   config.age_distribution.end(), cdf.begin());
  Population agents(config.n);
  for (std::size_t i = 0; i < config.n; ++i) {
    const double u = rng.Uniform(streams::kAge, i) * cdf.back();
    int bin = 0;
    while (bin < kAgeBins - 1 && u >= cdf[bin]) ++bin;
    agents[i].age_bin = static_cast<std::uint8_t>(bin);
  }
  return agents;
}

ContactNetwork BuildContactNetwork(const PopulationConfig& config) {
  config.Validate();
  const auto n = static_cast<std::int32_t>(config.n);
  const int half = config.mean_degree / 2;
  CounterRng rng(config.seed);

  std::vector<std::vector<std::int32_t>> adj(config.n);
  auto connected = [&](std::int32_t a, std::int32_t b) {
    const auto& nb = adj[a];
    return std::find(nb.begin(), nb.end(), b) != nb.end();
  };
  auto erase = [&](std::int32_t a, std::int32_t b) {
    auto& nb = adj[a];
    nb.erase(std::find(nb.begin(), nb.end(), b));
  };
  for (std::int32_t u = 0; u < n; ++u) {
    for (int j = 1; j <= half; ++j) {
      const std::int32_t v = (u + j) % n;
      adj[u].push_back(v);
      adj[v].push_back(u);
    }
  }
  if (config.rewire_probability > 0.0) {
    for (int j = 1; j <= half; ++j) {
      for (std::int32_t u = 0; u < n; ++u) {
        if (rng.Uniform(streams::kNetwork, u, j, 0) >= config.rewire_probability) {
          continue;
        }
        const std::int32_t v = (u + j) % n;
        if (!connected(u, v)) continue;  // already rewired away
        if (adj[u].size() >= config.n - 1) continue;
        std::int32_t w = u;
        for (std::uint64_t attempt = 1; w == u || connected(u, w); ++attempt) {
          w = static_cast<std::int32_t>(
              rng.Bits(streams::kNetwork, u, j, attempt) % config.n);
        }
        erase(u, v);
        erase(v, u);
        adj[u].push_back(w);
        adj[w].push_back(u);
      }
    }
  }
  std::vector<Pair> edges;
  edges.reserve(config.n * half);
  for (std::int32_t u = 0; u < n; ++u) {
    for (std::int32_t v : adj[u]) {
      if (u < v) edges.push_back({u, v});
    }
  }
  return ContactNetwork::FromUndirected(config.n, std::move(edges));
}

void SeedInfections(Population& agents, double i0, std::uint64_t seed) {
  if (!(i0 >= 0.0 && i0 <= 1.0)) {
    throw std::invalid_argument("initial infection fraction must lie in [0, 1]");
  }
  const std::size_t n = agents.size();
  const auto count = static_cast<std::size_t>(
      std::llround(i0 * static_cast<double>(n)));
  CounterRng rng(seed);
  std::vector<std::int32_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  // Partial Fisher-Yates.
  for (std::size_t k = 0; k < count; ++k) {
    const std::size_t pick = k + rng.Bits(streams::kSeeding, k) % (n - k);
    std::swap(order[k], order[pick]);
    AgentState& a = agents[order[k]];
    a.stage = Stage::kE;
    a.last_exposure = 0;
  }
}

namespace {

std::vector<std::string> SplitCsv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) {
    while (!field.empty() && (field.back() == '\r' || field.back() == ' ')) {
      field.pop_back();
    }
    while (!field.empty() && field.front() == ' ') field.erase(field.begin());
    out.push_back(field);
  }
  return out;
}

}  // namespace

ContactNetwork LoadEdgeListCsv(std::istream& in, std::size_t n) {
  std::string line;
  if (!std::getline(in, line) || SplitCsv(line) != std::vector<std::string>{"src", "dst"}) {
    throw std::invalid_argument("edge list: expected header `src,dst`");
  }
  std::vector<Pair> edges;
  std::set<Pair> seen;
  std::int32_t max_id = -1;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    const auto fields = SplitCsv(line);
    if (fields.size() != 2) {
      throw std::invalid_argument("edge list row " + std::to_string(row) +
                                  ": expected 2 fields");
    }
    std::int32_t a, b;
    try {
      std::size_t pa = 0, pb = 0;
      a = std::stoi(fields[0], &pa);
      b = std::stoi(fields[1], &pb);
      if (pa != fields[0].size() || pb != fields[1].size()) throw std::invalid_argument("");
    } catch (const std::exception&) {
      throw std::invalid_argument("edge list row " + std::to_string(row) +
                                  ": ids must be integers");
    }
    if (a < 0 || b < 0) {
      throw std::invalid_argument("edge list row " + std::to_string(row) +
                                  ": negative agent id");
    }
    if (a == b) {
      throw std::invalid_argument("edge list row " + std::to_string(row) +
                                  ": self-loop on agent " + std::to_string(a));
    }
    if (!seen.insert(Ordered(a, b)).second) {
      throw std::invalid_argument("edge list row " + std::to_string(row) +
                                  ": duplicate edge (" + std::to_string(a) + ", " +
                                  std::to_string(b) + ")");
    }
    max_id = std::max({max_id, a, b});
    edges.push_back({a, b});
  }
  if (n == 0) n = static_cast<std::size_t>(max_id + 1);
  return ContactNetwork::FromUndirected(n, std::move(edges));
}

ContactNetwork LoadEdgeListCsv(const std::string& path, std::size_t n) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open edge list " + path);
  return LoadEdgeListCsv(in, n);
}

void WriteEdgeListCsv(std::ostream& out, const ContactNetwork& network) {
  out << "src,dst\n";
  for (auto [a, b] : network.edges()) out << a << "," << b << "\n";
}

}  // namespace diffabm
