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

#include "diffabm/autodiff.h"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <utility>

namespace diffabm::ad {

std::string Shape::ToString() const {
  std::ostringstream os;
  os << "[" << rows << ", " << cols << "]";
  return os.str();
}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(shape), data_(std::move(data)) {
  if (data_.size() != shape_.size()) {
    throw std::invalid_argument("tensor data size " +
                                std::to_string(data_.size()) +
                                " does not match shape " + shape_.ToString());
  }
}

Tensor Tensor::Column(std::vector<double> v) {
  const std::size_t n = v.size();
  return Tensor({n, 1}, std::move(v));
}

double Tensor::item() const {
  if (data_.size() != 1) {
    throw std::invalid_argument("item() on non-scalar tensor of shape " +
                                shape_.ToString());
  }
  return data_[0];
}

const char* OpName(Op op) {
  switch (op) {
    case Op::kLeaf: return "leaf";
    case Op::kConstant: return "constant";
    case Op::kAdd: return "add";
    case Op::kSub: return "sub";
    case Op::kMul: return "mul";
    case Op::kDiv: return "div";
    case Op::kNeg: return "neg";
    case Op::kExp: return "exp";
    case Op::kLog: return "log";
    case Op::kSigmoid: return "sigmoid";
    case Op::kTanh: return "tanh";
    case Op::kRelu: return "relu";
    case Op::kSoftmax: return "softmax";
    case Op::kMatMul: return "matmul";
    case Op::kTranspose: return "transpose";
    case Op::kConcatRows: return "concat_rows";
    case Op::kConcatCols: return "concat_cols";
    case Op::kSliceRows: return "slice_rows";
    case Op::kSliceCols: return "slice_cols";
    case Op::kSum: return "sum";
    case Op::kGather: return "gather";
    case Op::kScatterAdd: return "scatter_add";
    case Op::kClamp: return "clamp";
    case Op::kStraightThrough: return "straight_through";
  }
  return "?";
}

const Tensor& Value::data() const {
  if (tape_ == nullptr) throw std::logic_error("use of an empty Value");
  return tape_->node(id_).value;
}

bool Value::requires_grad() const {
  return tape_ != nullptr && tape_->node(id_).requires_grad;
}

Value Tape::Leaf(Tensor t) {
  Node n;
  n.op = Op::kLeaf;
  n.requires_grad = true;
  n.value = std::move(t);
  return Push(std::move(n));
}

Value Tape::Constant(Tensor t) {
  Node n;
  n.op = Op::kConstant;
  n.value = std::move(t);
  return Push(std::move(n));
}

Value Tape::Push(Node node) {
  nodes_.push_back(std::move(node));
  return Value(this, static_cast<std::int32_t>(nodes_.size() - 1));
}

// Builds nodes for the primitive functions below.
struct OpRecorder {
  using Node = Tape::Node;
  static Tape& TapeOf(Value a) {
    if (!a.valid()) throw std::invalid_argument("empty Value passed to op");
    return *a.tape();
  }
  static Tape& TapeOf(Value a, Value b) {
    Tape& t = TapeOf(a);
    if (b.tape() != &t) {
      throw std::invalid_argument("Values from different tapes");
    }
    return t;
  }
  static Value Unary(Op op, Value a, Tensor out) {
    Tape& t = TapeOf(a);
    Tape::Node n;
    n.op = op;
    n.lhs = a.id();
    n.requires_grad = a.requires_grad();
    n.value = std::move(out);
    return t.Push(std::move(n));
  }
  static Value Binary(Op op, Value a, Value b, Tensor out) {
    Tape& t = TapeOf(a, b);
    Tape::Node n;
    n.op = op;
    n.lhs = a.id();
    n.rhs = b.id();
    n.requires_grad = a.requires_grad() || b.requires_grad();
    n.value = std::move(out);
    return t.Push(std::move(n));
  }
  static Value Push(Tape& t, Tape::Node n) { return t.Push(std::move(n)); }
  static bool RequiresGrad(const Tape& t, std::int32_t id) {
    return t.node(id).requires_grad;
  }
};

namespace {

[[noreturn]] void ShapeError(const char* op, const Shape& a, const Shape& b) {
  throw std::invalid_argument(std::string(op) + ": incompatible shapes " +
                              a.ToString() + " and " + b.ToString());
}

Shape BroadcastShape(const char* op, const Shape& a, const Shape& b) {
  if (a == b) return a;
  if (a.is_scalar()) return b;
  if (b.is_scalar()) return a;
  ShapeError(op, a, b);
}

template <typename F>
Tensor ZipWith(const char* op, const Tensor& a, const Tensor& b, F f) {
  const Shape s = BroadcastShape(op, a.shape(), b.shape());
  Tensor out(s);
  const std::size_t n = s.size();
  const bool as = a.size() == 1 && n != 1;
  const bool bs = b.size() == 1 && n != 1;
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = f(as ? a[0] : a[i], bs ? b[0] : b[i]);
  }
  return out;
}

template <typename F>
Tensor Map(const Tensor& a, F f) {
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i]);
  return out;
}

double StableSigmoid(double x) {
  if (x >= 0) {
    const double z = std::exp(-x);
    return 1.0 / (1.0 + z);
  }
  const double z = std::exp(x);
  return z / (1.0 + z);
}

void CheckIndex(const Index& index, std::size_t bound, const char* op) {
  for (std::int32_t i : index) {
    if (i < 0 || static_cast<std::size_t>(i) >= bound) {
      throw std::out_of_range(std::string(op) + ": index " + std::to_string(i) +
                              " outside [0, " + std::to_string(bound) + ")");
    }
  }
}

}  // namespace

Value Add(Value a, Value b) {
  return OpRecorder::Binary(
      Op::kAdd, a, b,
      ZipWith("add", a.data(), b.data(), [](double x, double y) { return x + y; }));
}

Value Sub(Value a, Value b) {
  return OpRecorder::Binary(
      Op::kSub, a, b,
      ZipWith("sub", a.data(), b.data(), [](double x, double y) { return x - y; }));
}

Value Mul(Value a, Value b) {
  return OpRecorder::Binary(
      Op::kMul, a, b,
      ZipWith("mul", a.data(), b.data(), [](double x, double y) { return x * y; }));
}

Value Div(Value a, Value b) {
  for (double v : b.data().vec()) {
    if (v == 0.0) throw std::domain_error("div: zero divisor");
  }
  return OpRecorder::Binary(
      Op::kDiv, a, b,
      ZipWith("div", a.data(), b.data(), [](double x, double y) { return x / y; }));
}

Value Neg(Value a) {
  return OpRecorder::Unary(Op::kNeg, a, Map(a.data(), [](double x) { return -x; }));
}

Value Exp(Value a) {
  return OpRecorder::Unary(Op::kExp, a,
                           Map(a.data(), [](double x) { return std::exp(x); }));
}

Value Log(Value a) {
  for (double v : a.data().vec()) {
    if (!(v > 0.0)) {
      throw std::domain_error("log: nonpositive argument " + std::to_string(v));
    }
  }
  return OpRecorder::Unary(Op::kLog, a,
                           Map(a.data(), [](double x) { return std::log(x); }));
}

Value Sigmoid(Value a) {
  return OpRecorder::Unary(Op::kSigmoid, a, Map(a.data(), StableSigmoid));
}

Value Tanh(Value a) {
  return OpRecorder::Unary(Op::kTanh, a,
                           Map(a.data(), [](double x) { return std::tanh(x); }));
}

Value Relu(Value a) {
  return OpRecorder::Unary(
      Op::kRelu, a, Map(a.data(), [](double x) { return x > 0.0 ? x : 0.0; }));
}

Value Softmax(Value a) {
  const Tensor& x = a.data();
  Tensor out(x.shape());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    double mx = -INFINITY;
    for (std::size_t c = 0; c < x.cols(); ++c) mx = std::max(mx, x.at(r, c));
    double total = 0.0;
    for (std::size_t c = 0; c < x.cols(); ++c) {
      out.at(r, c) = std::exp(x.at(r, c) - mx);
      total += out.at(r, c);
    }
    for (std::size_t c = 0; c < x.cols(); ++c) out.at(r, c) /= total;
  }
  return OpRecorder::Unary(Op::kSoftmax, a, std::move(out));
}

namespace {

// out += a * b with optional transposes; shapes already validated.
void Gemm(const Tensor& a, bool ta, const Tensor& b, bool tb, Tensor& out) {
  const std::size_t m = out.rows(), n = out.cols();
  const std::size_t k = ta ? a.rows() : a.cols();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ta ? a.at(p, i) : a.at(i, p);
      if (av == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j) {
        out.at(i, j) += av * (tb ? b.at(j, p) : b.at(p, j));
      }
    }
  }
}

}  // namespace

Value MatMul(Value a, Value b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa.cols != sb.rows) ShapeError("matmul", sa, sb);
  Tensor out({sa.rows, sb.cols});
  Gemm(a.data(), false, b.data(), false, out);
  return OpRecorder::Binary(Op::kMatMul, a, b, std::move(out));
}

Value Transpose(Value a) {
  const Tensor& x = a.data();
  Tensor out({x.cols(), x.rows()});
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (std::size_t c = 0; c < x.cols(); ++c) out.at(c, r) = x.at(r, c);
  }
  return OpRecorder::Unary(Op::kTranspose, a, std::move(out));
}

namespace {

Value Concat(std::span<const Value> parts, bool rows) {
  if (parts.empty()) throw std::invalid_argument("concat: no inputs");
  Tape& tape = OpRecorder::TapeOf(parts[0]);
  const Shape first = parts[0].shape();
  std::size_t total = 0;
  bool rg = false;
  for (const Value& p : parts) {
    OpRecorder::TapeOf(parts[0], p);
    const Shape& s = p.shape();
    if (rows ? s.cols != first.cols : s.rows != first.rows) {
      ShapeError(rows ? "concat_rows" : "concat_cols", first, s);
    }
    total += rows ? s.rows : s.cols;
    rg = rg || p.requires_grad();
  }
  Tensor out(rows ? Shape{total, first.cols} : Shape{first.rows, total});
  std::size_t at = 0;
  for (const Value& p : parts) {
    const Tensor& x = p.data();
    for (std::size_t r = 0; r < x.rows(); ++r) {
      for (std::size_t c = 0; c < x.cols(); ++c) {
        if (rows) {
          out.at(at + r, c) = x.at(r, c);
        } else {
          out.at(r, at + c) = x.at(r, c);
        }
      }
    }
    at += rows ? x.rows() : x.cols();
  }
  OpRecorder::Node n;
  n.op = rows ? Op::kConcatRows : Op::kConcatCols;
  n.requires_grad = rg;
  for (const Value& p : parts) n.extra.push_back(p.id());
  n.value = std::move(out);
  return OpRecorder::Push(tape, std::move(n));
}

Value Slice(Value a, std::size_t begin, std::size_t end, bool rows) {
  const Shape& s = a.shape();
  const std::size_t extent = rows ? s.rows : s.cols;
  if (begin >= end || end > extent) {
    throw std::out_of_range("slice [" + std::to_string(begin) + ", " +
                            std::to_string(end) + ") outside " + s.ToString());
  }
  const Tensor& x = a.data();
  Tensor out(rows ? Shape{end - begin, s.cols} : Shape{s.rows, end - begin});
  for (std::size_t r = 0; r < out.rows(); ++r) {
    for (std::size_t c = 0; c < out.cols(); ++c) {
      out.at(r, c) = rows ? x.at(begin + r, c) : x.at(r, begin + c);
    }
  }
  OpRecorder::Node n;
  n.op = rows ? Op::kSliceRows : Op::kSliceCols;
  n.lhs = a.id();
  n.requires_grad = a.requires_grad();
  n.offset = begin;
  n.value = std::move(out);
  return OpRecorder::Push(OpRecorder::TapeOf(a), std::move(n));
}

}  // namespace

Value ConcatRows(std::span<const Value> parts) { return Concat(parts, true); }
Value ConcatCols(std::span<const Value> parts) { return Concat(parts, false); }

Value SliceRows(Value a, std::size_t begin, std::size_t end) {
  return Slice(a, begin, end, true);
}
Value SliceCols(Value a, std::size_t begin, std::size_t end) {
  return Slice(a, begin, end, false);
}

Value Sum(Value a) {
  double total = 0.0;
  for (double v : a.data().vec()) total += v;
  return OpRecorder::Unary(Op::kSum, a, Tensor::Scalar(total));
}

Value Mean(Value a) {
  return Sum(a) * (1.0 / static_cast<double>(a.data().size()));
}

Value Gather(Value a, SharedIndex index) {
  const Tensor& x = a.data();
  CheckIndex(*index, x.rows(), "gather");
  const std::size_t cols = x.cols();
  Tensor out({index->size(), cols});
  for (std::size_t k = 0; k < index->size(); ++k) {
    const std::size_t src = static_cast<std::size_t>((*index)[k]);
    for (std::size_t c = 0; c < cols; ++c) out.at(k, c) = x.at(src, c);
  }
  OpRecorder::Node n;
  n.op = Op::kGather;
  n.lhs = a.id();
  n.requires_grad = a.requires_grad();
  n.index = std::move(index);
  n.value = std::move(out);
  return OpRecorder::Push(OpRecorder::TapeOf(a), std::move(n));
}

Value ScatterAdd(Value a, SharedIndex index, std::size_t rows) {
  const Tensor& x = a.data();
  if (index->size() != x.rows()) {
    throw std::invalid_argument(
        "scatter_add: index length " + std::to_string(index->size()) +
        " does not match source shape " + x.shape().ToString());
  }
  CheckIndex(*index, rows, "scatter_add");
  const std::size_t cols = x.cols();
  Tensor out({rows, cols});
  for (std::size_t k = 0; k < index->size(); ++k) {
    const std::size_t dst = static_cast<std::size_t>((*index)[k]);
    for (std::size_t c = 0; c < cols; ++c) out.at(dst, c) += x.at(k, c);
  }
  OpRecorder::Node n;
  n.op = Op::kScatterAdd;
  n.lhs = a.id();
  n.requires_grad = a.requires_grad();
  n.index = std::move(index);
  n.value = std::move(out);
  return OpRecorder::Push(OpRecorder::TapeOf(a), std::move(n));
}

Value Clamp(Value a, double lo, double hi) {
  if (!(lo <= hi)) throw std::invalid_argument("clamp: lo > hi");
  OpRecorder::Node n;
  n.op = Op::kClamp;
  n.lhs = a.id();
  n.requires_grad = a.requires_grad();
  n.lo = lo;
  n.hi = hi;
  n.value = Map(a.data(), [lo, hi](double x) { return std::clamp(x, lo, hi); });
  return OpRecorder::Push(OpRecorder::TapeOf(a), std::move(n));
}

Value StraightThrough(Value soft, Tensor hard) {
  if (!(hard.shape() == soft.shape())) {
    ShapeError("straight_through", soft.shape(), hard.shape());
  }
  return OpRecorder::Unary(Op::kStraightThrough, soft, std::move(hard));
}

Value operator+(Value a, Value b) { return Add(a, b); }
Value operator-(Value a, Value b) { return Sub(a, b); }
Value operator*(Value a, Value b) { return Mul(a, b); }
Value operator/(Value a, Value b) { return Div(a, b); }
Value operator-(Value a) { return Neg(a); }
Value operator+(Value a, double b) { return Add(a, OpRecorder::TapeOf(a).Constant(b)); }
Value operator+(double a, Value b) { return Add(OpRecorder::TapeOf(b).Constant(a), b); }
Value operator-(Value a, double b) { return Sub(a, OpRecorder::TapeOf(a).Constant(b)); }
Value operator-(double a, Value b) { return Sub(OpRecorder::TapeOf(b).Constant(a), b); }
Value operator*(Value a, double b) { return Mul(a, OpRecorder::TapeOf(a).Constant(b)); }
Value operator*(double a, Value b) { return Mul(OpRecorder::TapeOf(b).Constant(a), b); }
Value operator/(Value a, double b) { return Div(a, OpRecorder::TapeOf(a).Constant(b)); }
Value operator/(double a, Value b) { return Div(OpRecorder::TapeOf(b).Constant(a), b); }

// ---------------------------------------------------------------------------
// Backward

Tensor Gradients::operator[](Value v) const {
  const auto id = static_cast<std::size_t>(v.id());
  if (id >= grads_.size()) throw std::out_of_range("Value not on this tape");
  if (grads_[id].size() == 0) return Tensor(shapes_[id]);
  return grads_[id];
}

namespace {

// Accumulates `g` (shaped like the consumer output) into a parent gradient,
// summing when the parent was broadcast from a scalar.
void Accumulate(Tensor& dst, const Shape& parent, const Tensor& g,
                double scale = 1.0) {
  if (dst.size() == 0) dst = Tensor(parent);
  if (parent.size() == g.size()) {
    for (std::size_t i = 0; i < g.size(); ++i) dst[i] += scale * g[i];
  } else {
    double total = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) total += g[i];
    dst[0] += scale * total;
  }
}

// Same as Accumulate but with an elementwise factor f(i) on the output grid.
template <typename F>
void AccumulateWith(Tensor& dst, const Shape& parent, const Tensor& g, F f) {
  if (dst.size() == 0) dst = Tensor(parent);
  if (parent.size() == g.size()) {
    for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i] * f(i);
  } else {
    double total = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) total += g[i] * f(i);
    dst[0] += total;
  }
}

inline double Bcast(const Tensor& t, std::size_t i) {
  return t.size() == 1 ? t[0] : t[i];
}

}  // namespace

Gradients Backward(Value root) {
  if (!root.valid()) throw std::invalid_argument("backward: empty root");
  if (!root.shape().is_scalar()) {
    throw std::invalid_argument("backward: root must be scalar, got " +
                                root.shape().ToString());
  }
  const Tape& tape = *root.tape();
  Gradients out;
  const std::size_t count = static_cast<std::size_t>(root.id()) + 1;
  out.grads_.resize(tape.size());
  out.shapes_.resize(tape.size());
  for (std::size_t i = 0; i < tape.size(); ++i) {
    out.shapes_[i] = tape.nodes_[i].value.shape();
  }
  auto& grads = out.grads_;
  grads[root.id()] = Tensor::Scalar(1.0);

  for (std::size_t step = count; step-- > 0;) {
    const Tape::Node& n = tape.nodes_[step];
    if (!n.requires_grad || grads[step].size() == 0) continue;
    ++out.visits_;
    const Tensor& g = grads[step];
    const Tensor& y = n.value;
    auto needs = [&](std::int32_t id) { return tape.nodes_[id].requires_grad; };
    auto shape_of = [&](std::int32_t id) -> const Shape& {
      return tape.nodes_[id].value.shape();
    };
    auto val = [&](std::int32_t id) -> const Tensor& {
      return tape.nodes_[id].value;
    };

    switch (n.op) {
      case Op::kLeaf:
      case Op::kConstant:
        break;
      case Op::kAdd:
        if (needs(n.lhs)) Accumulate(grads[n.lhs], shape_of(n.lhs), g);
        if (needs(n.rhs)) Accumulate(grads[n.rhs], shape_of(n.rhs), g);
        break;
      case Op::kSub:
        if (needs(n.lhs)) Accumulate(grads[n.lhs], shape_of(n.lhs), g);
        if (needs(n.rhs)) Accumulate(grads[n.rhs], shape_of(n.rhs), g, -1.0);
        break;
      case Op::kMul: {
        const Tensor& a = val(n.lhs);
        const Tensor& b = val(n.rhs);
        if (needs(n.lhs)) {
          AccumulateWith(grads[n.lhs], a.shape(), g,
                         [&](std::size_t i) { return Bcast(b, i); });
        }
        if (needs(n.rhs)) {
          AccumulateWith(grads[n.rhs], b.shape(), g,
                         [&](std::size_t i) { return Bcast(a, i); });
        }
        break;
      }
      case Op::kDiv: {
        const Tensor& a = val(n.lhs);
        const Tensor& b = val(n.rhs);
        if (needs(n.lhs)) {
          AccumulateWith(grads[n.lhs], a.shape(), g,
                         [&](std::size_t i) { return 1.0 / Bcast(b, i); });
        }
        if (needs(n.rhs)) {
          AccumulateWith(grads[n.rhs], b.shape(), g, [&](std::size_t i) {
            const double bv = Bcast(b, i);
            return -Bcast(a, i) / (bv * bv);
          });
        }
        break;
      }
      case Op::kNeg:
        Accumulate(grads[n.lhs], shape_of(n.lhs), g, -1.0);
        break;
      case Op::kExp:
        AccumulateWith(grads[n.lhs], shape_of(n.lhs), g,
                       [&](std::size_t i) { return y[i]; });
        break;
      case Op::kLog: {
        const Tensor& x = val(n.lhs);
        AccumulateWith(grads[n.lhs], x.shape(), g,
                       [&](std::size_t i) { return 1.0 / x[i]; });
        break;
      }
      case Op::kSigmoid:
        AccumulateWith(grads[n.lhs], shape_of(n.lhs), g,
                       [&](std::size_t i) { return y[i] * (1.0 - y[i]); });
        break;
      case Op::kTanh:
        AccumulateWith(grads[n.lhs], shape_of(n.lhs), g,
                       [&](std::size_t i) { return 1.0 - y[i] * y[i]; });
        break;
      case Op::kRelu: {
        const Tensor& x = val(n.lhs);
        AccumulateWith(grads[n.lhs], x.shape(), g,
                       [&](std::size_t i) { return x[i] > 0.0 ? 1.0 : 0.0; });
        break;
      }
      case Op::kSoftmax: {
        Tensor gx(y.shape());
        for (std::size_t r = 0; r < y.rows(); ++r) {
          double dot = 0.0;
          for (std::size_t c = 0; c < y.cols(); ++c) dot += g.at(r, c) * y.at(r, c);
          for (std::size_t c = 0; c < y.cols(); ++c) {
            gx.at(r, c) = y.at(r, c) * (g.at(r, c) - dot);
          }
        }
        Accumulate(grads[n.lhs], shape_of(n.lhs), gx);
        break;
      }
      case Op::kMatMul: {
        const Tensor& a = val(n.lhs);
        const Tensor& b = val(n.rhs);
        if (needs(n.lhs)) {
          if (grads[n.lhs].size() == 0) grads[n.lhs] = Tensor(a.shape());
          Gemm(g, false, b, true, grads[n.lhs]);
        }
        if (needs(n.rhs)) {
          if (grads[n.rhs].size() == 0) grads[n.rhs] = Tensor(b.shape());
          Gemm(a, true, g, false, grads[n.rhs]);
        }
        break;
      }
      case Op::kTranspose: {
        Tensor gx({g.cols(), g.rows()});
        for (std::size_t r = 0; r < g.rows(); ++r) {
          for (std::size_t c = 0; c < g.cols(); ++c) gx.at(c, r) = g.at(r, c);
        }
        Accumulate(grads[n.lhs], shape_of(n.lhs), gx);
        break;
      }
      case Op::kConcatRows:
      case Op::kConcatCols: {
        const bool rows = n.op == Op::kConcatRows;
        std::size_t at = 0;
        for (std::int32_t pid : n.extra) {
          const Shape& s = shape_of(pid);
          if (needs(pid)) {
            Tensor& dst = grads[pid];
            if (dst.size() == 0) dst = Tensor(s);
            for (std::size_t r = 0; r < s.rows; ++r) {
              for (std::size_t c = 0; c < s.cols; ++c) {
                dst.at(r, c) += rows ? g.at(at + r, c) : g.at(r, at + c);
              }
            }
          }
          at += rows ? s.rows : s.cols;
        }
        break;
      }
      case Op::kSliceRows:
      case Op::kSliceCols: {
        const bool rows = n.op == Op::kSliceRows;
        Tensor& dst = grads[n.lhs];
        if (dst.size() == 0) dst = Tensor(shape_of(n.lhs));
        for (std::size_t r = 0; r < g.rows(); ++r) {
          for (std::size_t c = 0; c < g.cols(); ++c) {
            if (rows) {
              dst.at(n.offset + r, c) += g.at(r, c);
            } else {
              dst.at(r, n.offset + c) += g.at(r, c);
            }
          }
        }
        break;
      }
      case Op::kSum: {
        Tensor& dst = grads[n.lhs];
        if (dst.size() == 0) dst = Tensor(shape_of(n.lhs));
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += g[0];
        break;
      }
      case Op::kGather: {
        // Adjoint of gather is scatter-add.
        Tensor& dst = grads[n.lhs];
        if (dst.size() == 0) dst = Tensor(shape_of(n.lhs));
        const Index& idx = *n.index;
        for (std::size_t k = 0; k < idx.size(); ++k) {
          for (std::size_t c = 0; c < g.cols(); ++c) {
            dst.at(static_cast<std::size_t>(idx[k]), c) += g.at(k, c);
          }
        }
        break;
      }
      case Op::kScatterAdd: {
        // Adjoint of scatter-add is gather.
        Tensor& dst = grads[n.lhs];
        if (dst.size() == 0) dst = Tensor(shape_of(n.lhs));
        const Index& idx = *n.index;
        for (std::size_t k = 0; k < idx.size(); ++k) {
          for (std::size_t c = 0; c < g.cols(); ++c) {
            dst.at(k, c) += g.at(static_cast<std::size_t>(idx[k]), c);
          }
        }
        break;
      }
      case Op::kClamp: {
        const Tensor& x = val(n.lhs);
        AccumulateWith(grads[n.lhs], x.shape(), g, [&](std::size_t i) {
          return (x[i] >= n.lo && x[i] <= n.hi) ? 1.0 : 0.0;
        });
        break;
      }
      case Op::kStraightThrough:
        Accumulate(grads[n.lhs], shape_of(n.lhs), g);
        break;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Finite differences

double MaxRelativeError(std::span<const double> analytic,
                        std::span<const double> numeric) {
  if (analytic.size() != numeric.size()) {
    throw std::invalid_argument("relative error: length mismatch");
  }
  constexpr double kEps = 1e-8;
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double err =
        std::abs(analytic[i] - numeric[i]) / std::max(std::abs(numeric[i]), kEps);
    worst = std::max(worst, err);
  }
  return worst;
}

GradReport FiniteDifferenceCheck(const ScalarFunction& f,
                                 std::span<const Tensor> params, double step) {
  if (!(step > 0.0)) {
    throw std::invalid_argument("finite difference step must be positive");
  }
  GradReport report;
  {
    Tape tape;
    std::vector<Value> leaves;
    for (const Tensor& p : params) leaves.push_back(tape.Leaf(p));
    Value root = f(tape, leaves);
    Gradients g = Backward(root);
    for (const Value& leaf : leaves) {
      const Tensor gt = g[leaf];
      report.analytic.insert(report.analytic.end(), gt.vec().begin(),
                             gt.vec().end());
    }
  }
  auto eval = [&](const std::vector<Tensor>& ps) {
    Tape tape;
    std::vector<Value> leaves;
    for (const Tensor& p : ps) leaves.push_back(tape.Constant(p));
    return f(tape, leaves).item();
  };
  std::vector<Tensor> work(params.begin(), params.end());
  for (std::size_t p = 0; p < work.size(); ++p) {
    for (std::size_t i = 0; i < work[p].size(); ++i) {
      const double orig = work[p][i];
      work[p][i] = orig + step;
      const double up = eval(work);
      work[p][i] = orig - step;
      const double down = eval(work);
      work[p][i] = orig;
      report.numeric.push_back((up - down) / (2.0 * step));
    }
  }
  report.max_relative_error = MaxRelativeError(report.analytic, report.numeric);
  return report;
}

}  // namespace diffabm::ad
