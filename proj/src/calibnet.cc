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
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "diffabm/rng.h"

namespace diffabm {

using ad::Tensor;
using ad::Value;

void ParamBounds::Validate() const {
  if (lower.empty() || lower.size() != upper.size()) {
    throw std::invalid_argument("bounds need matching nonempty lower/upper");
  }
  for (std::size_t k = 0; k < lower.size(); ++k) {
    if (!std::isfinite(lower[k]) || !std::isfinite(upper[k]) ||
        !(lower[k] < upper[k])) {
      throw std::invalid_argument("bound " + std::to_string(k) +
                                  " must satisfy finite lower < upper");
    }
  }
}

ParamBounds ParamBounds::Covid() { return {{1.0, 0.001, 0.01}, {8.0, 0.02, 1.0}}; }
ParamBounds ParamBounds::Flu() { return {{1.05, 0.1}, {2.6, 5.0}}; }

void CalibNetConfig::Validate() const {
  bounds.Validate();
  if (input_dim == 0 || hidden_dim == 0 || head_hidden == 0) {
    throw std::invalid_argument("calibnet dimensions must be positive");
  }
  if (encoder_layers < 1 || decoder_layers < 1) {
    throw std::invalid_argument("calibnet needs at least one layer each");
  }
}

void ParameterSet::Add(std::string name, Tensor value) {
  if (index_.count(name)) throw std::invalid_argument("duplicate tensor " + name);
  index_[name] = values_.size();
  names_.push_back(std::move(name));
  values_.push_back(std::move(value));
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t total = 0;
  for (const Tensor& t : values_) total += t.size();
  return total;
}

std::size_t ParameterSet::IndexOf(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("no tensor named " + name);
  return it->second;
}

BoundParameters::BoundParameters(ad::Tape& tape, const ParameterSet& set)
    : tape_(&tape), set_(&set) {
  leaves_.reserve(set.size());
  for (const Tensor& t : set.values()) leaves_.push_back(tape.Leaf(t));
}

BoundParameters::BoundParameters(ad::Tape& tape, const ParameterSet& set,
                                 std::span<const Value> leaves)
    : tape_(&tape), set_(&set), leaves_(leaves.begin(), leaves.end()) {
  if (leaves.size() != set.size()) {
    throw std::invalid_argument("bound parameters: " + std::to_string(leaves.size()) +
                                " leaves for " + std::to_string(set.size()) + " tensors");
  }
  for (std::size_t i = 0; i < leaves.size(); ++i) {
    if (leaves[i].shape() != set.values()[i].shape()) {
      throw std::invalid_argument("bound parameters: shape mismatch for " + set.names()[i]);
    }
  }
}

namespace {

Value RowBroadcast(Value row, std::size_t rows) {
  if (rows == 1) return row;
  return ad::MatMul(row.tape()->Constant(Tensor({rows, 1}, 1.0)), row);
}

void AddGru(ParameterSet& set, const std::string& prefix, std::size_t in,
            std::size_t hidden) {
  for (const char* g : {"wr", "wz", "wn"}) set.Add(prefix + g, Tensor({in, hidden}));
  for (const char* g : {"ur", "uz", "un"}) {
    set.Add(prefix + g, Tensor({hidden, hidden}));
  }
  for (const char* g : {"br", "bz", "bn", "bhn"}) set.Add(prefix + g, Tensor({1, hidden}));
}

std::string Layer(const char* part, int layer, const char* dir) {
  return std::string(part) + std::to_string(layer) + "." + dir + ".";
}

}  // namespace

Value GruLayer(const BoundParameters& w, const std::string& prefix, Value inputs,
               bool reverse) {
  const std::size_t steps = inputs.shape().rows;
  if (steps == 0) throw std::invalid_argument("gru: empty sequence");
  const Value ur = w[prefix + "ur"], uz = w[prefix + "uz"], un = w[prefix + "un"];
  const std::size_t hidden = ur.shape().rows;
  if (inputs.shape().cols != w[prefix + "wr"].shape().rows) {
    throw std::invalid_argument("gru " + prefix + ": input width " +
                                std::to_string(inputs.shape().cols) + " expected " +
                                std::to_string(w[prefix + "wr"].shape().rows));
  }
  const Value xr = ad::MatMul(inputs, w[prefix + "wr"]) + RowBroadcast(w[prefix + "br"], steps);
  const Value xz = ad::MatMul(inputs, w[prefix + "wz"]) + RowBroadcast(w[prefix + "bz"], steps);
  const Value xn = ad::MatMul(inputs, w[prefix + "wn"]) + RowBroadcast(w[prefix + "bn"], steps);
  const Value bhn = w[prefix + "bhn"];

  std::vector<Value> out(steps);
  Value h = w.tape().Constant(Tensor({1, hidden}, 0.0));
  for (std::size_t s = 0; s < steps; ++s) {
    const std::size_t t = reverse ? steps - 1 - s : s;
    const Value r = ad::Sigmoid(ad::SliceRows(xr, t, t + 1) + ad::MatMul(h, ur));
    const Value z = ad::Sigmoid(ad::SliceRows(xz, t, t + 1) + ad::MatMul(h, uz));
    const Value c =
        ad::Tanh(ad::SliceRows(xn, t, t + 1) + r * (ad::MatMul(h, un) + bhn));
    h = c + z * (h - c);
    out[t] = h;
  }
  return ad::ConcatRows(out);
}

Value Encode(const BoundParameters& w, const CalibNetConfig& config, Value inputs) {
  if (inputs.shape().cols != config.input_dim) {
    throw std::invalid_argument("encoder expects " + std::to_string(config.input_dim) +
                                " features per step, got " +
                                std::to_string(inputs.shape().cols));
  }
  Value x = inputs;
  for (int l = 0; l < config.encoder_layers; ++l) {
    const Value both[] = {GruLayer(w, Layer("enc", l, "f"), x, false),
                          GruLayer(w, Layer("enc", l, "b"), x, true)};
    x = ad::ConcatCols(both);
  }
  return x;
}

AttentionResult AttentionPool(const BoundParameters& w, Value hidden) {
  const std::size_t steps = hidden.shape().rows;
  if (steps == 0) throw std::invalid_argument("attention: no hidden states");
  const Value q = ad::MatMul(hidden, w["att.q"]);
  const Value k = ad::MatMul(hidden, w["att.k"]);
  const Value v = ad::MatMul(hidden, w["att.v"]);
  const double scale = 1.0 / std::sqrt(static_cast<double>(q.shape().cols));
  AttentionResult res;
  res.weights = ad::Softmax(ad::MatMul(q, ad::Transpose(k)) * scale);
  res.pooled = ad::MatMul(res.weights, v);
  res.context =
      ad::MatMul(hidden.tape()->Constant(Tensor({1, steps}, 1.0)), res.pooled);
  return res;
}

Value BoundOutputs(Value raw, const ParamBounds& bounds) {
  const ad::Shape& s = raw.shape();
  if (s.cols != bounds.size()) {
    throw std::invalid_argument("bounding: output width " + std::to_string(s.cols) +
                                " vs " + std::to_string(bounds.size()) + " bounds");
  }
  Tensor lo(s), span(s);
  for (std::size_t r = 0; r < s.rows; ++r) {
    for (std::size_t c = 0; c < s.cols; ++c) {
      lo.at(r, c) = bounds.lower[c];
      span.at(r, c) = bounds.upper[c] - bounds.lower[c];
    }
  }
  ad::Tape& tape = *raw.tape();
  return tape.Constant(std::move(lo)) + tape.Constant(std::move(span)) * ad::Sigmoid(raw);
}

Value DecodeAndBound(const BoundParameters& w, const CalibNetConfig& config,
                     Value context, std::size_t positions) {
  if (positions == 0) throw std::invalid_argument("decoder: empty horizon");
  ad::Tape& tape = w.tape();
  Tensor tau({positions, 1});
  for (std::size_t k = 0; k < positions; ++k) {
    tau[k] = static_cast<double>(k + 1) / static_cast<double>(positions);
  }
  const Value cols[] = {tape.Constant(std::move(tau)), RowBroadcast(context, positions)};
  Value x = ad::ConcatCols(cols);
  for (int l = 0; l < config.decoder_layers; ++l) {
    const Value both[] = {GruLayer(w, Layer("dec", l, "f"), x, false),
                          GruLayer(w, Layer("dec", l, "b"), x, true)};
    x = ad::ConcatCols(both);
  }
  const Value hid = ad::Relu(ad::MatMul(x, w["head.w1"]) +
                             RowBroadcast(w["head.b1"], positions));
  const Value raw = ad::MatMul(hid, w["head.w2"]) + RowBroadcast(w["head.b2"], positions);
  return BoundOutputs(raw, config.bounds);
}

CalibNet::CalibNet(CalibNetConfig config, std::uint64_t seed)
    : config_(std::move(config)) {
  config_.Validate();
  const std::size_t h = config_.hidden_dim;
  for (int l = 0; l < config_.encoder_layers; ++l) {
    const std::size_t in = l == 0 ? config_.input_dim : 2 * h;
    AddGru(weights_, Layer("enc", l, "f"), in, h);
    AddGru(weights_, Layer("enc", l, "b"), in, h);
  }
  weights_.Add("att.q", Tensor({2 * h, h}));
  weights_.Add("att.k", Tensor({2 * h, h}));
  weights_.Add("att.v", Tensor({2 * h, 2 * h}));
  for (int l = 0; l < config_.decoder_layers; ++l) {
    const std::size_t in = l == 0 ? 1 + 2 * h : 2 * h;
    AddGru(weights_, Layer("dec", l, "f"), in, h);
    AddGru(weights_, Layer("dec", l, "b"), in, h);
  }
  weights_.Add("head.w1", Tensor({2 * h, config_.head_hidden}));
  weights_.Add("head.b1", Tensor({1, config_.head_hidden}));
  weights_.Add("head.w2", Tensor({config_.head_hidden, config_.output_dim()}));
  weights_.Add("head.b2", Tensor({1, config_.output_dim()}));

  // Xavier-uniform for matrices; biases stay zero.
  const CounterRng rng(seed);
  for (std::size_t p = 0; p < weights_.size(); ++p) {
    Tensor& t = weights_.values()[p];
    const std::string& name = weights_.names()[p];
    if (name[name.rfind('.') + 1] == 'b') continue;
    const double a = std::sqrt(6.0 / static_cast<double>(t.rows() + t.cols()));
    for (std::size_t i = 0; i < t.size(); ++i) {
      t[i] = a * (2.0 * rng.Uniform(streams::kInit, p, i) - 1.0);
    }
  }
}

CalibOutput CalibNet::Forward(const BoundParameters& w, const Tensor& features,
                              std::size_t weeks) const {
  if (features.rows() == 0) throw std::invalid_argument("empty feature sequence");
  const Tensor padded = PadSequence(features, config_.min_sequence_length);
  const Value hidden = Encode(w, config_, w.tape().Constant(padded));
  const AttentionResult att = AttentionPool(w, hidden);
  return {DecodeAndBound(w, config_, att.context, weeks), att.weights};
}

Tensor CalibNet::Predict(const Tensor& features, std::size_t weeks) const {
  ad::Tape tape;
  const BoundParameters w(tape, weights_);
  return Forward(w, features, weeks).params.data();
}

Tensor PadSequence(const Tensor& features, std::size_t min_rows) {
  if (features.rows() >= min_rows) return features;
  Tensor out({min_rows, features.cols()});
  const std::size_t shift = min_rows - features.rows();
  for (std::size_t r = 0; r < features.rows(); ++r) {
    for (std::size_t c = 0; c < features.cols(); ++c) {
      out.at(r + shift, c) = features.at(r, c);
    }
  }
  return out;
}

// Checkpoint text format:
//   diffabm-checkpoint v1
//   config <input> <hidden> <enc layers> <dec layers> <head hidden> <min len>
//   bounds <D> <lo_1> <hi_1> ... <lo_D> <hi_D>
//   tensors <count>
//   <name> <rows> <cols> <values in row-major order>   (one line per tensor)
void CalibNet::Save(std::ostream& out) const {
  out << "diffabm-checkpoint v1\n";
  out << "config " << config_.input_dim << ' ' << config_.hidden_dim << ' '
      << config_.encoder_layers << ' ' << config_.decoder_layers << ' '
      << config_.head_hidden << ' ' << config_.min_sequence_length << '\n';
  out << std::setprecision(17) << "bounds " << config_.bounds.size();
  for (std::size_t k = 0; k < config_.bounds.size(); ++k) {
    out << ' ' << config_.bounds.lower[k] << ' ' << config_.bounds.upper[k];
  }
  out << "\ntensors " << weights_.size() << '\n';
  for (std::size_t p = 0; p < weights_.size(); ++p) {
    const Tensor& t = weights_.values()[p];
    out << weights_.names()[p] << ' ' << t.rows() << ' ' << t.cols();
    for (double v : t.vec()) out << ' ' << v;
    out << '\n';
  }
}

void CalibNet::Save(const std::string& path) const {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write checkpoint " + path);
  Save(f);
}

CalibNet CalibNet::Load(std::istream& in) {
  auto fail = [](const std::string& what) {
    throw std::runtime_error("bad checkpoint: " + what);
  };
  std::string magic, version, word;
  if (!(in >> magic >> version) || magic != "diffabm-checkpoint" || version != "v1") {
    fail("missing 'diffabm-checkpoint v1' header");
  }
  CalibNetConfig c;
  if (!(in >> word) || word != "config" ||
      !(in >> c.input_dim >> c.hidden_dim >> c.encoder_layers >> c.decoder_layers >>
        c.head_hidden >> c.min_sequence_length)) {
    fail("config line");
  }
  std::size_t d = 0;
  if (!(in >> word >> d) || word != "bounds") fail("bounds line");
  c.bounds.lower.resize(d);
  c.bounds.upper.resize(d);
  for (std::size_t k = 0; k < d; ++k) {
    if (!(in >> c.bounds.lower[k] >> c.bounds.upper[k])) fail("bounds values");
  }
  CalibNet net(c, 0);
  std::size_t count = 0;
  if (!(in >> word >> count) || word != "tensors") fail("tensors line");
  if (count != net.weights_.size()) fail("tensor count does not match config");
  for (std::size_t p = 0; p < count; ++p) {
    std::string name;
    std::size_t rows = 0, cols = 0;
    if (!(in >> name >> rows >> cols)) fail("tensor header " + std::to_string(p));
    Tensor& t = net.weights_[name];
    if (t.rows() != rows || t.cols() != cols) fail("shape of " + name);
    for (double& v : t.vec()) {
      if (!(in >> v)) fail("values of " + name);
    }
  }
  return net;
}

CalibNet CalibNet::Load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read checkpoint " + path);
  return Load(f);
}

}  // namespace diffabm
