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

// Define-by-run reverse-mode automatic differentiation over dense row-major
// matrices. A Tape records every primitive applied to Values created on it;
// Backward() walks the tape once in reverse and returns adjoints for every
// node. Tapes are rebuilt for each forward pass.
//
// Broadcasting is limited to scalar-with-tensor and equal shapes. Vectors are
// column matrices of shape [n, 1].

#ifndef DIFFABM_AUTODIFF_H_
#define DIFFABM_AUTODIFF_H_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace diffabm::ad {

struct Shape {
  std::size_t rows = 1;
  std::size_t cols = 1;

  std::size_t size() const { return rows * cols; }
  bool is_scalar() const { return rows == 1 && cols == 1; }
  bool operator==(const Shape&) const = default;
  std::string ToString() const;
};

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0)
      : shape_(shape), data_(shape.size(), fill) {}
  Tensor(Shape shape, std::vector<double> data);

  static Tensor Scalar(double v) { return Tensor({1, 1}, v); }
  // Column vector [n, 1].
  static Tensor Column(std::vector<double> v);

  const Shape& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }
  std::size_t rows() const { return shape_.rows; }
  std::size_t cols() const { return shape_.cols; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& at(std::size_t r, std::size_t c) { return data_[r * shape_.cols + c]; }
  double at(std::size_t r, std::size_t c) const {
    return data_[r * shape_.cols + c];
  }
  double item() const;

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  std::vector<double>& vec() { return data_; }
  const std::vector<double>& vec() const { return data_; }

 private:
  Shape shape_{0, 0};
  std::vector<double> data_;
};

using Index = std::vector<std::int32_t>;
using SharedIndex = std::shared_ptr<const Index>;

enum class Op : std::uint8_t {
  kLeaf,
  kConstant,
  kAdd,
  kSub,
  kMul,
  kDiv,
  kNeg,
  kExp,
  kLog,
  kSigmoid,
  kTanh,
  kRelu,
  kSoftmax,
  kMatMul,
  kTranspose,
  kConcatRows,
  kConcatCols,
  kSliceRows,
  kSliceCols,
  kSum,
  kGather,
  kScatterAdd,
  kClamp,
  kStraightThrough,
};

const char* OpName(Op op);

class Tape;

// Handle to a node on a Tape. Cheap to copy; valid while the Tape lives.
class Value {
 public:
  Value() = default;

  bool valid() const { return tape_ != nullptr; }
  Tape* tape() const { return tape_; }
  std::int32_t id() const { return id_; }

  const Tensor& data() const;
  const Shape& shape() const { return data().shape(); }
  double item() const { return data().item(); }
  bool requires_grad() const;

 private:
  friend class Tape;
  Value(Tape* tape, std::int32_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::int32_t id_ = -1;
};

class Gradients;

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Differentiable input.
  Value Leaf(Tensor t);
  // Input that never receives a gradient.
  Value Constant(Tensor t);
  Value Constant(double v) { return Constant(Tensor::Scalar(v)); }

  std::size_t size() const { return nodes_.size(); }
  void Clear() { nodes_.clear(); }

 private:
  friend class Value;
  friend class Gradients;
  friend Gradients Backward(Value root);
  friend struct OpRecorder;

  struct Node {
    Op op = Op::kConstant;
    bool requires_grad = false;
    std::int32_t lhs = -1;
    std::int32_t rhs = -1;
    std::vector<std::int32_t> extra;  // concat parents
    Tensor value;
    SharedIndex index;                // gather / scatter
    std::size_t offset = 0;           // slice start
    double lo = 0.0, hi = 0.0;        // clamp bounds
  };

  Value Push(Node node);
  const Node& node(std::int32_t id) const { return nodes_[id]; }

  std::vector<Node> nodes_;
};

// Adjoints from one backward sweep. Indexed by Value.
class Gradients {
 public:
  // Gradient of the root with respect to v; zeros if v does not influence it.
  Tensor operator[](Value v) const;
  std::size_t visits() const { return visits_; }

 private:
  friend Gradients Backward(Value root);
  std::vector<Tensor> grads_;
  std::vector<Shape> shapes_;
  std::size_t visits_ = 0;
};

// Root must be a scalar. The tape is left untouched.
Gradients Backward(Value root);

// Primitives.
Value Add(Value a, Value b);
Value Sub(Value a, Value b);
Value Mul(Value a, Value b);
Value Div(Value a, Value b);
Value Neg(Value a);
Value Exp(Value a);
Value Log(Value a);
Value Sigmoid(Value a);
Value Tanh(Value a);
Value Relu(Value a);
Value Softmax(Value a);  // over the last axis (per row)
Value MatMul(Value a, Value b);
Value Transpose(Value a);
Value ConcatRows(std::span<const Value> parts);
Value ConcatCols(std::span<const Value> parts);
Value SliceRows(Value a, std::size_t begin, std::size_t end);
Value SliceCols(Value a, std::size_t begin, std::size_t end);
Value Sum(Value a);
Value Mean(Value a);
// out[k, :] = a[index[k], :]
Value Gather(Value a, SharedIndex index);
// out[index[k], :] += a[k, :] over `rows` output rows.
Value ScatterAdd(Value a, SharedIndex index, std::size_t rows);
// Gradient passes only where lo <= a <= hi.
Value Clamp(Value a, double lo, double hi);
// Forward value is `hard`, gradient flows to `soft` unchanged.
Value StraightThrough(Value soft, Tensor hard);

Value operator+(Value a, Value b);
Value operator-(Value a, Value b);
Value operator*(Value a, Value b);
Value operator/(Value a, Value b);
Value operator-(Value a);
Value operator+(Value a, double b);
Value operator+(double a, Value b);
Value operator-(Value a, double b);
Value operator-(double a, Value b);
Value operator*(Value a, double b);
Value operator*(double a, Value b);
Value operator/(Value a, double b);
Value operator/(double a, Value b);

// Central finite-difference validation of a scalar function of several
// tensor parameters. `f` must be deterministic (fixed random draws).
struct GradReport {
  std::vector<double> analytic;
  std::vector<double> numeric;
  double max_relative_error = 0.0;
};

using ScalarFunction =
    std::function<Value(Tape& tape, std::span<const Value> params)>;

GradReport FiniteDifferenceCheck(const ScalarFunction& f,
                                 std::span<const Tensor> params, double step);

// max |a - n| / max(|n|, eps) with eps = 1e-8.
double MaxRelativeError(std::span<const double> analytic,
                        std::span<const double> numeric);

}  // namespace diffabm::ad

#endif  // DIFFABM_AUTODIFF_H_
