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

// Sequence-model calibrator: a bidirectional GRU encoder over weekly feature
// vectors, single-head self-attention pooling into a context vector, a
// bidirectional GRU decoder over forecast positions and a two-layer head whose
// output is squashed into the parameter bounds.

#ifndef DIFFABM_CALIBNET_H_
#define DIFFABM_CALIBNET_H_

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "diffabm/autodiff.h"

namespace diffabm {

struct ParamBounds {
  std::vector<double> lower;
  std::vector<double> upper;

  std::size_t size() const { return lower.size(); }
  double midpoint(std::size_t k) const { return 0.5 * (lower[k] + upper[k]); }
  void Validate() const;

  // (R, mortality, initial infected %).
  static ParamBounds Covid();
  // (R, initial infected %).
  static ParamBounds Flu();
};

struct CalibNetConfig {
  std::size_t input_dim = 1;
  std::size_t hidden_dim = 32;
  int encoder_layers = 2;
  int decoder_layers = 1;
  std::size_t head_hidden = 16;
  // Shorter feature sequences are front-padded with zero rows.
  std::size_t min_sequence_length = 1;
  ParamBounds bounds = ParamBounds::Covid();

  std::size_t output_dim() const { return bounds.size(); }
  void Validate() const;
};

// Ordered collection of named tensors.
class ParameterSet {
 public:
  void Add(std::string name, ad::Tensor value);
  std::size_t size() const { return values_.size(); }
  std::size_t scalar_count() const;
  std::size_t IndexOf(const std::string& name) const;
  bool Contains(const std::string& name) const { return index_.count(name) > 0; }

  const std::vector<std::string>& names() const { return names_; }
  std::vector<ad::Tensor>& values() { return values_; }
  const std::vector<ad::Tensor>& values() const { return values_; }
  ad::Tensor& operator[](const std::string& name) { return values_[IndexOf(name)]; }
  const ad::Tensor& operator[](const std::string& name) const {
    return values_[IndexOf(name)];
  }

 private:
  std::vector<std::string> names_;
  std::vector<ad::Tensor> values_;
  std::unordered_map<std::string, std::size_t> index_;
};

// A ParameterSet recorded on a tape as leaves.
class BoundParameters {
 public:
  BoundParameters(ad::Tape& tape, const ParameterSet& set);
  // Uses existing leaves, one per entry of `set` in order.
  BoundParameters(ad::Tape& tape, const ParameterSet& set, std::span<const ad::Value> leaves);
  ad::Value operator[](const std::string& name) const {
    return leaves_[set_->IndexOf(name)];
  }
  const std::vector<ad::Value>& leaves() const { return leaves_; }
  ad::Tape& tape() const { return *tape_; }

 private:
  ad::Tape* tape_;
  const ParameterSet* set_;
  std::vector<ad::Value> leaves_;
};

// Standard GRU over the rows of `inputs` ([T, in]); returns [T, hidden].
//   r = sigmoid(x Wr + h Ur + br), z = sigmoid(x Wz + h Uz + bz)
//   c = tanh(x Wn + bn + r * (h Un + bhn)),  h' = (1 - z) * c + z * h
// Weights are looked up as `prefix` + {wr, wz, wn, ur, uz, un, br, bz, bn, bhn}.
ad::Value GruLayer(const BoundParameters& w, const std::string& prefix,
                   ad::Value inputs, bool reverse);

// Stacked bidirectional encoder; returns [T, 2 * hidden].
ad::Value Encode(const BoundParameters& w, const CalibNetConfig& config,
                 ad::Value inputs);

struct AttentionResult {
  ad::Value weights;  // [T, T], rows sum to one
  ad::Value pooled;   // [T, 2H] = weights * V
  ad::Value context;  // [1, 2H], sum of the pooled rows
};
AttentionResult AttentionPool(const BoundParameters& w, ad::Value hidden);

// Decoder over positions k / positions (k = 1..positions) fed with the
// context; returns [positions, D] strictly inside the bounds.
ad::Value DecodeAndBound(const BoundParameters& w, const CalibNetConfig& config,
                         ad::Value context, std::size_t positions);

// theta = lower + (upper - lower) * sigmoid(raw), row-wise over [K, D].
ad::Value BoundOutputs(ad::Value raw, const ParamBounds& bounds);

struct CalibOutput {
  ad::Value params;     // [weeks, D]
  ad::Value attention;  // [T, T]
};

class CalibNet {
 public:
  CalibNet() = default;
  // Xavier-uniform weights, zero biases.
  CalibNet(CalibNetConfig config, std::uint64_t seed);

  const CalibNetConfig& config() const { return config_; }
  ParameterSet& weights() { return weights_; }
  const ParameterSet& weights() const { return weights_; }

  // features: [T, input_dim] normalized rows (one per week). Returns one
  // parameter row per simulation week.
  CalibOutput Forward(const BoundParameters& w, const ad::Tensor& features,
                      std::size_t weeks) const;
  // Convenience: evaluates with the current weights on a scratch tape.
  ad::Tensor Predict(const ad::Tensor& features, std::size_t weeks) const;

  void Save(std::ostream& out) const;
  void Save(const std::string& path) const;
  static CalibNet Load(std::istream& in);
  static CalibNet Load(const std::string& path);

 private:
  CalibNetConfig config_;
  ParameterSet weights_;
};

// Front-pads with zero rows up to `min_rows`.
ad::Tensor PadSequence(const ad::Tensor& features, std::size_t min_rows);

}  // namespace diffabm

#endif  // DIFFABM_CALIBNET_H_
