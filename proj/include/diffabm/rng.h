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

// Seeded randomness. Every consumer derives its own stream from the root seed
// by name, so adding a consumer never perturbs the draws seen by another.
// Draws are addressed by counters (e.g. step and agent) rather than consumed
// sequentially, which makes them independent of iteration order.

#ifndef DIFFABM_RNG_H_
#define DIFFABM_RNG_H_

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace diffabm {

// splitmix64 finalizer.
constexpr std::uint64_t Mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// FNV-1a over the stream name.
constexpr std::uint64_t StreamId(std::string_view name) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : name) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

class CounterRng {
 public:
  explicit CounterRng(std::uint64_t root) : root_(root) {}

  std::uint64_t root() const { return root_; }

  std::uint64_t Bits(std::uint64_t stream, std::uint64_t a,
                     std::uint64_t b = 0, std::uint64_t c = 0) const {
    std::uint64_t h = Mix64(root_ ^ Mix64(stream));
    h = Mix64(h ^ a);
    h = Mix64(h ^ (b + 0x632be59bd9b4e019ULL));
    return Mix64(h ^ (c + 0x8cb92ba72f3d8dd7ULL));
  }

  // Uniform on the open interval (0, 1).
  double Uniform(std::uint64_t stream, std::uint64_t a, std::uint64_t b = 0,
                 std::uint64_t c = 0) const {
    return (static_cast<double>(Bits(stream, a, b, c) >> 11) + 0.5) *
           0x1.0p-53;
  }

  // Standard Gumbel: -log(-log u).
  double Gumbel(std::uint64_t stream, std::uint64_t a, std::uint64_t b = 0,
                std::uint64_t c = 0) const {
    return -std::log(-std::log(Uniform(stream, a, b, c)));
  }

  // Sequential engine for bulk draws (population synthesis, noise series).
  std::mt19937_64 Engine(std::uint64_t stream, std::uint64_t a = 0) const {
    return std::mt19937_64(Bits(stream, a, 0x5eed));
  }

 private:
  std::uint64_t root_;
};

namespace streams {
inline constexpr std::uint64_t kAge = StreamId("age");
inline constexpr std::uint64_t kNetwork = StreamId("network");
inline constexpr std::uint64_t kSeeding = StreamId("seeding");
inline constexpr std::uint64_t kGumbel = StreamId("gumbel");
inline constexpr std::uint64_t kMortality = StreamId("mortality");
inline constexpr std::uint64_t kTesting = StreamId("testing");
inline constexpr std::uint64_t kNoise = StreamId("observation-noise");
inline constexpr std::uint64_t kInit = StreamId("init");
}  // namespace streams

}  // namespace diffabm

#endif  // DIFFABM_RNG_H_
