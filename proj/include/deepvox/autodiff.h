// Copyright 2026 The DeepVOX Toolkit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Tape-based reverse-mode differentiation over dense tensors.
//
// A Graph records every operation applied to its variables. Calling
// Backward() walks the tape in reverse creation order, which is a valid
// topological order because operations can only consume existing variables.
// The graph is single-use and single-threaded; parallel work builds one
// graph per worker.

#ifndef DEEPVOX_AUTODIFF_H_
#define DEEPVOX_AUTODIFF_H_

#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "deepvox/tensor.h"

namespace deepvox::nd {

// Standard self-normalizing constants.
inline constexpr double kSeluLambda = 1.0507009873554804934193349852946;
inline constexpr double kSeluAlpha = 1.6732632423543772848170429916717;

struct Var {
  static constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
  std::size_t id = kNone;
  bool valid() const { return id != kNone; }
};

enum class ConvAlgo {
  kAuto,    // direct loops for double, GEMM for float
  kDirect,  // naive sum in (c, k) order, bias added last
  kGemm,    // im2col + Eigen matrix product
};

template <typename T>
class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, const Tensor<T>& out_grad)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var Input(Tensor<T> value, bool requires_grad = false);

  const Tensor<T>& value(Var v) const { return nodes_.at(v.id).value; }
  bool requires_grad(Var v) const { return nodes_.at(v.id).needs_grad; }
  // Gradient accumulated by the last Backward(); zeros if nothing reached v.
  Tensor<T> grad(Var v) const;

  // Seeds d(root)/d(root) = 1; root must hold a single element.
  void Backward(Var root);
  void Backward(Var root, const Tensor<T>& seed);

  // Guided mode changes SELU backward to pass gradient only where the
  // forward pre-activation and the incoming gradient are both positive.
  void set_guided(bool guided) { guided_ = guided; }
  bool guided() const { return guided_; }

  std::size_t size() const { return nodes_.size(); }

  // Low-level hooks for op implementations.
  Var Record(Tensor<T> value, bool needs_grad, BackwardFn backward);
  void AccumulateGrad(Var v, const Tensor<T>& g);
  Tensor<T>& GradBuffer(Var v);  // allocates zeros on first use

 private:
  struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    bool needs_grad = false;
    BackwardFn backward;
  };
  std::vector<Node> nodes_;
  bool guided_ = false;
};

// ---------------------------------------------------------------------------
// Operations. Shapes use [N, C, L] for sequences and [N, D] for matrices.

template <typename T>
Var Conv1d(Graph<T>& g, Var x, Var weight, Var bias, const ConvSpec& spec,
           ConvAlgo algo = ConvAlgo::kAuto);

template <typename T>
Var Selu(Graph<T>& g, Var x);

// Alpha dropout. Masks are drawn from a generator seeded with `seed`; the
// caller folds (layer index, step) into it.
template <typename T>
Var AlphaDropout(Graph<T>& g, Var x, double p, bool training,
                 std::uint64_t seed);

template <typename T>
Var AvgPool1d(Graph<T>& g, Var x, std::size_t window, std::size_t stride);

template <typename T>
Var MaxPool1d(Graph<T>& g, Var x, std::size_t window, std::size_t stride);

// y[N, out] = x[N, in] * W[out, in]^T + b[out]
template <typename T>
Var Linear(Graph<T>& g, Var x, Var weight, Var bias);

// Mean over rows of -log softmax(logits[n])[labels[n]].
template <typename T>
Var SoftmaxCrossEntropy(Graph<T>& g, Var logits,
                        std::span<const std::size_t> labels);

// Cosine similarity of two equal-size tensors (flattened). Throws kNumeric
// "degenerate embedding" on a zero-norm input.
template <typename T>
Var Cosine(Graph<T>& g, Var u, Var v);

template <typename T>
Var Add(Graph<T>& g, Var a, Var b);
template <typename T>
Var Sub(Graph<T>& g, Var a, Var b);
template <typename T>
Var Scale(Graph<T>& g, Var a, T factor);
template <typename T>
Var AddScalar(Graph<T>& g, Var a, T offset);
template <typename T>
Var Hinge(Graph<T>& g, Var a);  // max(a, 0)
template <typename T>
Var Sum(Graph<T>& g, Var a);
template <typename T>
Var Mean(Graph<T>& g, Var a);
template <typename T>
Var Reshape(Graph<T>& g, Var a, Shape shape);
template <typename T>
Var Transpose(Graph<T>& g, Var a);  // rank-2 only
template <typename T>
Var Row(Graph<T>& g, Var a, std::size_t row);  // [N, D] -> [D]
template <typename T>
Var StackRows(Graph<T>& g, std::span<const Var> rows);  // k x [D] -> [k, D]

// ---------------------------------------------------------------------------
// Finite-difference gradient check.

template <typename T>
using ScalarFn = std::function<Var(Graph<T>&, std::span<const Var>)>;

struct GradCheckOptions {
  double eps = 1e-6;
  // Coordinates probed per input; 0 probes every coordinate. Larger inputs
  // are sampled deterministically from `seed`.
  std::size_t max_coords_per_input = 0;
  std::uint64_t seed = 1;
};

struct GradCheckResult {
  // max_i |analytic_i - numeric_i| / max(max_i |analytic_i|, max_i |numeric_i|)
  // over the probed coordinates; 0 when both gradients vanish.
  double max_rel_error = 0.0;
  std::size_t coords_checked = 0;
  std::vector<double> analytic;
  std::vector<double> numeric;
};

// Compares reverse-mode gradients of a scalar-valued function against
// central differences, per coordinate of every input.
GradCheckResult GradCheck(const ScalarFn<double>& fn,
                          const std::vector<Tensor<double>>& inputs,
                          const GradCheckOptions& options = {});

}  // namespace deepvox::nd

#endif  // DEEPVOX_AUTODIFF_H_
