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

#include "diffabm/calibnet.h"

#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "gtest/gtest.h"

namespace diffabm {
namespace {

using ad::Tape;
using ad::Tensor;
using ad::Value;

Tensor RandomTensor(std::size_t rows, std::size_t cols, std::mt19937_64& gen, double a = 1.0) {
  std::uniform_real_distribution<double> u(-a, a);
  Tensor t({rows, cols});
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = u(gen);
  return t;
}

ParameterSet GruWeights(std::size_t in, std::size_t h, std::mt19937_64& gen, double a) {
  ParameterSet set;
  for (const char* n : {"wr", "wz", "wn"}) set.Add(std::string("g.") + n, RandomTensor(in, h, gen, a));
  for (const char* n : {"ur", "uz", "un"}) set.Add(std::string("g.") + n, RandomTensor(h, h, gen, a));
  for (const char* n : {"br", "bz", "bn", "bhn"}) set.Add(std::string("g.") + n, RandomTensor(1, h, gen, a));
  return set;
}

double Sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Plain loop GRU used as the reference.
std::vector<std::vector<double>> ReferenceGru(const ParameterSet& p, const Tensor& x, bool reverse) {
  const std::size_t T = x.rows(), in = x.cols(), H = p["g.ur"].rows();
  std::vector<std::vector<double>> out(T, std::vector<double>(H));
  std::vector<double> h(H, 0.0);
  for (std::size_t s = 0; s < T; ++s) {
    const std::size_t t = reverse ? T - 1 - s : s;
    std::vector<double> next(H);
    for (std::size_t j = 0; j < H; ++j) {
      double ar = p["g.br"][j], az = p["g.bz"][j], an = p["g.bn"][j], hn = p["g.bhn"][j];
      for (std::size_t i = 0; i < in; ++i) {
        ar += x.at(t, i) * p["g.wr"].at(i, j);
        az += x.at(t, i) * p["g.wz"].at(i, j);
        an += x.at(t, i) * p["g.wn"].at(i, j);
      }
      for (std::size_t i = 0; i < H; ++i) {
        ar += h[i] * p["g.ur"].at(i, j);
        az += h[i] * p["g.uz"].at(i, j);
        hn += h[i] * p["g.un"].at(i, j);
      }
      const double r = Sig(ar), z = Sig(az), c = std::tanh(an + r * hn);
      next[j] = (1.0 - z) * c + z * h[j];
    }
    h = next;
    out[t] = h;
  }
  return out;
}

TEST(Gru, ZeroWeightsKeepZeroState) {
  std::mt19937_64 gen(1);
  ParameterSet set = GruWeights(3, 4, gen, 0.0);
  Tape tape;
  BoundParameters w(tape, set);
  const Value out = GruLayer(w, "g.", tape.Constant(RandomTensor(6, 3, gen, 5.0)), false);
  for (double v : out.data().data()) EXPECT_EQ(v, 0.0);
}

TEST(Gru, MatchesReferenceInBothDirections) {
  std::mt19937_64 gen(2);
  const ParameterSet set = GruWeights(2, 3, gen, 0.8);
  const Tensor x = RandomTensor(5, 2, gen, 2.0);
  for (bool reverse : {false, true}) {
    Tape tape;
    BoundParameters w(tape, set);
    const Tensor got = GruLayer(w, "g.", tape.Constant(x), reverse).data();
    const auto want = ReferenceGru(set, x, reverse);
    for (std::size_t t = 0; t < 5; ++t) {
      for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(got.at(t, j), want[t][j], 1e-14);
    }
  }
}

TEST(Gru, RejectsWrongInputWidth) {
  std::mt19937_64 gen(3);
  const ParameterSet set = GruWeights(2, 3, gen, 0.5);
  Tape tape;
  BoundParameters w(tape, set);
  EXPECT_THROW(GruLayer(w, "g.", tape.Constant(Tensor({4, 3})), false), std::invalid_argument);
}

TEST(Attention, RowsAreDistributionsAndMatchReference) {
  std::mt19937_64 gen(4);
  const std::size_t T = 6, H = 3;
  ParameterSet set;
  set.Add("att.q", RandomTensor(2 * H, H, gen));
  set.Add("att.k", RandomTensor(2 * H, H, gen));
  set.Add("att.v", RandomTensor(2 * H, 2 * H, gen));
  const Tensor hidden = RandomTensor(T, 2 * H, gen);
  Tape tape;
  BoundParameters w(tape, set);
  const AttentionResult res = AttentionPool(w, tape.Constant(hidden));
  const Tensor& a = res.weights.data();
  ASSERT_EQ(a.shape(), (ad::Shape{T, T}));

  auto project = [&](const Tensor& m, std::size_t t, std::size_t j) {
    double s = 0.0;
    for (std::size_t i = 0; i < 2 * H; ++i) s += hidden.at(t, i) * m.at(i, j);
    return s;
  };
  std::vector<double> context(2 * H, 0.0);
  for (std::size_t t = 0; t < T; ++t) {
    std::vector<double> logits(T);
    double mx = -1e300, total = 0.0, row = 0.0;
    for (std::size_t u = 0; u < T; ++u) {
      double dot = 0.0;
      for (std::size_t j = 0; j < H; ++j) dot += project(set["att.q"], t, j) * project(set["att.k"], u, j);
      logits[u] = dot / std::sqrt(static_cast<double>(H));
      mx = std::max(mx, logits[u]);
    }
    for (double& l : logits) total += (l = std::exp(l - mx));
    for (std::size_t u = 0; u < T; ++u) {
      EXPECT_NEAR(a.at(t, u), logits[u] / total, 1e-14);
      EXPECT_GT(a.at(t, u), 0.0);
      row += a.at(t, u);
      for (std::size_t j = 0; j < 2 * H; ++j) context[j] += logits[u] / total * project(set["att.v"], u, j);
    }
    EXPECT_NEAR(row, 1.0, 1e-14);
  }
  for (std::size_t j = 0; j < 2 * H; ++j) EXPECT_NEAR(res.context.data()[j], context[j], 1e-12);
}

TEST(Bounds, ZeroRawGivesMidpoint) {
  Tape tape;
  const Tensor out = BoundOutputs(tape.Constant(Tensor({2, 3})), ParamBounds::Covid()).data();
  const double want[] = {4.5, 0.0105, 0.505};
  for (std::size_t r = 0; r < 2; ++r) {
    for (std::size_t c = 0; c < 3; ++c) EXPECT_NEAR(out.at(r, c), want[c], 1e-15);
  }
  EXPECT_DOUBLE_EQ(ParamBounds::Flu().midpoint(0), 1.825);
}

TEST(Bounds, RandomRawStaysInside) {
  std::mt19937_64 gen(5);
  std::normal_distribution<double> wide(0.0, 10.0);
  const ParamBounds b = ParamBounds::Covid();
  Tensor raw({1000, 3});
  for (std::size_t i = 0; i < raw.size(); ++i) raw[i] = wide(gen);
  Tape tape;
  const Tensor out = BoundOutputs(tape.Constant(raw), b).data();
  for (std::size_t r = 0; r < 1000; ++r) {
    for (std::size_t c = 0; c < 3; ++c) {
      EXPECT_GE(out.at(r, c), b.lower[c]);
      EXPECT_LE(out.at(r, c), b.upper[c]);
    }
  }
}

TEST(Bounds, RejectsWidthMismatchAndInvertedBounds) {
  Tape tape;
  EXPECT_THROW(BoundOutputs(tape.Constant(Tensor({1, 2})), ParamBounds::Covid()), std::invalid_argument);
  ParamBounds bad{{2.0}, {1.0}};
  EXPECT_THROW(bad.Validate(), std::invalid_argument);
}

CalibNetConfig SmallConfig(std::size_t input_dim) {
  CalibNetConfig c;
  c.input_dim = input_dim;
  c.hidden_dim = 4;
  return c;
}

TEST(CalibNet, OutputsOneBoundedRowPerWeek) {
  std::mt19937_64 gen(6);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    CalibNet net(SmallConfig(3), seed);
    const Tensor out = net.Predict(RandomTensor(5, 3, gen, 3.0), 9);
    ASSERT_EQ(out.shape(), (ad::Shape{9, 3}));
    const ParamBounds& b = net.config().bounds;
    for (std::size_t r = 0; r < 9; ++r) {
      for (std::size_t c = 0; c < 3; ++c) {
        EXPECT_GT(out.at(r, c), b.lower[c]);
        EXPECT_LT(out.at(r, c), b.upper[c]);
      }
    }
  }
}

TEST(CalibNet, InitializationIsSeededAndBiasesStartAtZero) {
  CalibNet a(SmallConfig(1), 7), b(SmallConfig(1), 7), c(SmallConfig(1), 8);
  const auto& names = a.weights().names();
  bool differs = false;
  for (std::size_t p = 0; p < names.size(); ++p) {
    const Tensor& t = a.weights().values()[p];
    EXPECT_EQ(t.vec(), b.weights().values()[p].vec()) << names[p];
    differs |= t.vec() != c.weights().values()[p].vec();
    const bool bias = names[p][names[p].rfind('.') + 1] == 'b';
    double norm = 0.0;
    for (double v : t.data()) norm += std::abs(v);
    if (bias) {
      EXPECT_EQ(norm, 0.0) << names[p];
    } else {
      // Single-row matrices (input width one) are initialized too.
      EXPECT_GT(norm, 0.0) << names[p];
      const double limit = std::sqrt(6.0 / static_cast<double>(t.rows() + t.cols()));
      for (double v : t.data()) EXPECT_LE(std::abs(v), limit);
    }
  }
  EXPECT_TRUE(differs);
}

TEST(CalibNet, WeightGradientsMatchFiniteDifferences) {
  std::mt19937_64 gen(9);
  CalibNet net(SmallConfig(2), 3);
  // Perturb the zero biases so that every weight carries gradient.
  for (std::size_t p = 0; p < net.weights().size(); ++p) {
    Tensor& t = net.weights().values()[p];
    for (std::size_t i = 0; i < t.size(); ++i) t[i] += 0.1 * std::uniform_real_distribution<double>(-1, 1)(gen);
  }
  const Tensor features = RandomTensor(4, 2, gen, 1.0);
  const Tensor readout = RandomTensor(6, 3, gen, 1.0);
  const ParameterSet& set = net.weights();
  // The checker owns the leaves; bind them under the network's names.
  auto f = [&](Tape& tape, std::span<const Value> p) {
    const CalibOutput out = net.Forward(BoundParameters(tape, set, p), features, 6);
    return ad::Sum(out.params * tape.Constant(readout));
  };
  // A 1e-5 step keeps roundoff well below the tolerance for outputs of order ten.
  const ad::GradReport report = ad::FiniteDifferenceCheck(f, set.values(), 1e-5);
  EXPECT_LT(report.max_relative_error, 1e-4);
}

TEST(CalibNet, ShortSequencesArePadded) {
  const Tensor x({2, 3}, 1.0);
  const Tensor padded = PadSequence(x, 5);
  ASSERT_EQ(padded.shape(), (ad::Shape{5, 3}));
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t r = 0; r < 3; ++r) EXPECT_EQ(padded.at(r, c), 0.0);
    for (std::size_t r = 3; r < 5; ++r) EXPECT_EQ(padded.at(r, c), 1.0);
  }
  EXPECT_EQ(PadSequence(x, 1).vec(), x.vec());
}

TEST(CalibNet, CheckpointRoundTripsExactly) {
  std::mt19937_64 gen(10);
  CalibNetConfig cfg = SmallConfig(3);
  cfg.bounds = ParamBounds::Flu();
  CalibNet net(cfg, 11);
  std::stringstream buf;
  net.Save(buf);
  const CalibNet back = CalibNet::Load(buf);
  EXPECT_EQ(back.config().hidden_dim, 4u);
  EXPECT_EQ(back.config().bounds.upper, cfg.bounds.upper);
  const Tensor x = RandomTensor(5, 3, gen);
  EXPECT_EQ(net.Predict(x, 7).vec(), back.Predict(x, 7).vec());
}

TEST(CalibNet, RejectsCorruptCheckpoints) {
  std::stringstream empty;
  EXPECT_THROW(CalibNet::Load(empty), std::runtime_error);
  CalibNet net(SmallConfig(2), 1);
  std::stringstream buf;
  net.Save(buf);
  std::string text = buf.str();
  text.resize(text.size() / 2);
  std::stringstream cut(text);
  EXPECT_THROW(CalibNet::Load(cut), std::runtime_error);
}

TEST(CalibNet, RejectsWrongFeatureWidth) {
  CalibNet net(SmallConfig(2), 1);
  EXPECT_THROW(net.Predict(Tensor({3, 5}), 4), std::invalid_argument);
  EXPECT_THROW(net.Predict(Tensor({0, 2}), 4), std::invalid_argument);
}

}  // namespace
}  // namespace diffabm
