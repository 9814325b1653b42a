// Copyright 2026 The antforge Authors.
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

#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "antforge/tensor.hpp"

namespace antforge {

template <typename T>
class Tape;

// Handle to a node recorded on a Tape.
template <typename T>
struct Var {
  Tape<T>* tape = nullptr;
  int id = -1;

  const Tensor<T>& value() const;
  const Shape& shape() const { return value().shape(); }
};

// Reverse-mode tape. Nodes are appended in evaluation order, so the reverse
// of insertion order is a valid topological order for backward. A tape is
// single-use: backward() consumes it.
template <typename T>
class Tape {
 public:
  // A non-recording tape computes values only (evaluation, replay sampling).
  explicit Tape(bool record = true) : record_(record) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return record_; }
  bool consumed() const { return consumed_; }

  // Input that never receives a gradient.
  Var<T> constant(Tensor<T> value);
  // Input whose gradient is kept on the tape (read back with grad()).
  Var<T> input(Tensor<T> value);
  // Parameter leaf. The tensor is referenced, not copied, and must outlive the
  // tape. If track is set and the tensor requires_grad, backward accumulates
  // into tensor.mutable_grad().
  Var<T> parameter(Tensor<T>& tensor, bool track = true);

  const Tensor<T>& value(Var<T> v) const;
  // Gradient of the last backward() w.r.t. a node (empty if none flowed).
  std::span<const T> grad(Var<T> v) const;

  void backward(Var<T> loss);

  // Used by op implementations.
  bool needs_grad(Var<T> v) const { return nodes_[check(v)].needs_grad; }
  Var<T> record(Tensor<T> value, bool needs_grad, std::function<void(std::span<const T>)> backward);
  std::span<T> grad_buffer(Var<T> v);
  size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor<T> own;
    const Tensor<T>* external = nullptr;
    Tensor<T>* sink = nullptr;
    bool needs_grad = false;
    AlignedVector<T> grad;
    std::function<void(std::span<const T>)> backward;
  };

  int check(Var<T> v) const;

  bool record_;
  bool consumed_ = false;
  std::vector<Node> nodes_;
};

template <typename T>
const Tensor<T>& Var<T>::value() const {
  return tape->value(*this);
}

// ---- operators ---------------------------------------------------------

template <typename T>
Var<T> add(Var<T> a, Var<T> b);
template <typename T>
Var<T> mul(Var<T> a, Var<T> b);
template <typename T>
Var<T> scale(Var<T> a, T factor);
// Multiplies row i of the leading dimension by factors[i].
template <typename T>
Var<T> scale_rows(Var<T> a, std::vector<T> factors);
// Same forward as scale_rows, but each factor is differentiated as
// gamma_r = c_r / sqrt(sum_{i in active_r} a_ri^2) with the active set frozen,
// i.e. the gradient of a renormalization onto a fixed-radius sphere. `active`
// has the shape of a (nonzero = active).
template <typename T>
Var<T> scale_rows_renorm(Var<T> a, std::vector<T> factors, std::vector<uint8_t> active);
template <typename T>
Var<T> relu(Var<T> a);
// Clamp to [0,1]; gradient 1 strictly inside, 0 elsewhere.
template <typename T>
Var<T> clip01(Var<T> a);
template <typename T>
Var<T> sum(Var<T> a);
template <typename T>
Var<T> reshape(Var<T> a, Shape shape);
// [B, ...] -> [B, prod(...)]
template <typename T>
Var<T> flatten(Var<T> a);
// x [B,in], w [out,in], b [out] -> [B,out]
template <typename T>
Var<T> linear(Var<T> x, Var<T> w, Var<T> b);
// x [B,Cin,H,W], w [Cout,Cin,k,k], b [Cout]; zero padding, cross-correlation.
template <typename T>
Var<T> conv2d(Var<T> x, Var<T> w, Var<T> b, int stride, int pad);
template <typename T>
Var<T> maxpool2d(Var<T> x, int kernel, int stride);
// Mean over the batch of -log softmax(logits)[label].
template <typename T>
Var<T> softmax_cross_entropy(Var<T> logits, std::span<const int> labels);

// Output extent of a strided window.
inline int64_t window_out(int64_t in, int k, int stride, int pad) {
  return (in + 2 * pad - k) / stride + 1;
}

}  // namespace antforge
