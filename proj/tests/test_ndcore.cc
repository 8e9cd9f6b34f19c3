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

#include <doctest.h>

#include <cmath>
#include <random>

#include "deepvox/autodiff.h"
#include "deepvox/common.h"
#include "deepvox/model.h"
#include "fd_oracle.h"
#include "test_util.h"

namespace deepvox::nd {
namespace {

using testing::FiniteDifferenceCheck;
using testing::RandomTensor;
using testing::WeightedSum;

constexpr double kSmooth = 1e-4;  // relative error bound, smooth ops
constexpr double kAffine = 1e-7;  // relative error bound, affine ops

// Reference cross-correlation: y[n,o,t] = b[o] + sum_c,k w[o,c,k] x[n,c,t*s + k*d].
Tensor<double> NaiveConv(const Tensor<double>& x, const Tensor<double>& w,
                         const Tensor<double>& b, const ConvSpec& s) {
  const std::size_t n = x.dim(0), cin = x.dim(1), len = x.dim(2);
  const std::size_t lout = s.OutputLength(len);
  Tensor<double> y(Shape{n, s.out_channels, lout});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t o = 0; o < s.out_channels; ++o)
      for (std::size_t t = 0; t < lout; ++t) {
        double acc = 0.0;
        for (std::size_t c = 0; c < cin; ++c)
          for (std::size_t k = 0; k < s.kernel_size; ++k)
            acc += w[(o * cin + c) * s.kernel_size + k] *
                   x[(i * cin + c) * len + t * s.stride + k * s.dilation];
        y[(i * s.out_channels + o) * lout + t] = acc + b[o];
      }
  return y;
}

TEST_CASE("conv1d forward matches the reference loop for both algorithms") {
  std::mt19937_64 gen(1);
  const ConvSpec specs[] = {{3, 5, 3, 1}, {2, 4, 5, 3}, {1, 2, 7, 1}, {4, 3, 2, 4, 2}};
  for (const auto& s : specs) {
    const auto x = RandomTensor<double>({2, s.in_channels, 23}, gen);
    const auto w = RandomTensor<double>({s.out_channels, s.in_channels, s.kernel_size}, gen);
    const auto b = RandomTensor<double>({s.out_channels}, gen);
    const auto want = NaiveConv(x, w, b, s);
    for (auto algo : {ConvAlgo::kDirect, ConvAlgo::kGemm}) {
      Graph<double> g;
      const Var y = Conv1d(g, g.Input(x), g.Input(w), g.Input(b), s, algo);
      REQUIRE(g.value(y).shape() == want.shape());
      for (std::size_t i = 0; i < want.size(); ++i)
        REQUIRE(g.value(y)[i] == doctest::Approx(want[i]).epsilon(1e-13));
    }
  }
}

TEST_CASE("conv1d rejects kernels longer than the input") {
  Graph<double> g;
  const Var x = g.Input(Tensor<double>({1, 1, 5}));
  const Var w = g.Input(Tensor<double>({1, 1, 3}));
  const Var b = g.Input(Tensor<double>({1}));
  CHECK_THROWS_AS(Conv1d(g, x, w, b, ConvSpec{1, 1, 3, 3}), Error);
  CHECK_THROWS_AS(Conv1d(g, x, w, b, ConvSpec{2, 1, 3, 1}), Error);
}

TEST_CASE("gradient: conv1d with dilation") {
  std::mt19937_64 gen(2);
  for (auto algo : {ConvAlgo::kDirect, ConvAlgo::kGemm}) {
    const ConvSpec s{3, 4, 3, 2};
    const auto r = FiniteDifferenceCheck(
        [&](Graph<double>& g, const std::vector<Var>& v) {
          return WeightedSum(g, Conv1d(g, v[0], v[1], v[2], s, algo));
        },
        {RandomTensor<double>({2, 3, 12}, gen), RandomTensor<double>({4, 3, 3}, gen),
         RandomTensor<double>({4}, gen)});
    CHECK(r.rel_error < kAffine);
  }
}

TEST_CASE("selu forward and gradient") {
  Graph<double> g;
  const Var x = g.Input(Tensor<double>({4}, std::vector<double>{-2.0, -0.1, 0.3, 5.0}));
  const Var y = Selu(g, x);
  for (std::size_t i = 0; i < 4; ++i) {
    const double v = g.value(x)[i];
    const double want = v > 0 ? kSeluLambda * v : kSeluLambda * kSeluAlpha * (std::exp(v) - 1);
    CHECK(g.value(y)[i] == doctest::Approx(want).epsilon(1e-15));
  }
  std::mt19937_64 gen(3);
  auto in = RandomTensor<double>({3, 2, 7}, gen, -2.0, 2.0);
  for (auto& v : in.values())
    if (std::abs(v) < 1e-3) v = 0.5;  // stay away from the kink
  const auto r = FiniteDifferenceCheck(
      [](Graph<double>& g, const std::vector<Var>& v) { return WeightedSum(g, Selu(g, v[0])); },
      {in});
  CHECK(r.rel_error < kSmooth);
}

TEST_CASE("average and max pooling: values and gradients") {
  std::mt19937_64 gen(4);
  const auto x = RandomTensor<double>({2, 3, 10}, gen);
  Graph<double> g;
  const Var xv = g.Input(x);
  const Var a = AvgPool1d(g, xv, 3, 2);
  const Var m = MaxPool1d(g, xv, 3, 2);
  REQUIRE(g.value(a).shape() == Shape{2, 3, 4});
  for (std::size_t r = 0; r < 6; ++r)
    for (std::size_t t = 0; t < 4; ++t) {
      const double* s = x.data() + r * 10 + 2 * t;
      CHECK(g.value(a)[r * 4 + t] == doctest::Approx((s[0] + s[1] + s[2]) / 3.0));
      CHECK(g.value(m)[r * 4 + t] == std::max({s[0], s[1], s[2]}));
    }
  CHECK(FiniteDifferenceCheck(
            [](Graph<double>& g, const std::vector<Var>& v) {
              return WeightedSum(g, AvgPool1d(g, v[0], 3, 2));
            },
            {x})
            .rel_error < kAffine);
  CHECK(FiniteDifferenceCheck(
            [](Graph<double>& g, const std::vector<Var>& v) {
              return WeightedSum(g, MaxPool1d(g, v[0], 3, 2));
            },
            {x})
            .rel_error < kSmooth);
}

TEST_CASE("linear: values and gradients") {
  std::mt19937_64 gen(5);
  const auto x = RandomTensor<double>({3, 4}, gen);
  const auto w = RandomTensor<double>({2, 4}, gen);
  const auto b = RandomTensor<double>({2}, gen);
  Graph<double> g;
  const Var y = Linear(g, g.Input(x), g.Input(w), g.Input(b));
  for (std::size_t n = 0; n < 3; ++n)
    for (std::size_t o = 0; o < 2; ++o) {
      double want = b[o];
      for (std::size_t i = 0; i < 4; ++i) want += x[n * 4 + i] * w[o * 4 + i];
      CHECK(g.value(y)[n * 2 + o] == doctest::Approx(want).epsilon(1e-14));
    }
  CHECK(FiniteDifferenceCheck(
            [](Graph<double>& g, const std::vector<Var>& v) {
              return WeightedSum(g, Linear(g, v[0], v[1], v[2]));
            },
            {x, w, b})
            .rel_error < kAffine);
}

TEST_CASE("softmax cross-entropy: value and gradient") {
  std::mt19937_64 gen(6);
  const auto logits = RandomTensor<double>({4, 5}, gen, -3.0, 3.0);
  const std::vector<std::size_t> labels{0, 4, 2, 2};
  Graph<double> g;
  const Var loss = SoftmaxCrossEntropy<double>(g, g.Input(logits), labels);
  double want = 0.0;
  for (std::size_t r = 0; r < 4; ++r) {
    double z = 0.0;
    for (std::size_t k = 0; k < 5; ++k) z += std::exp(logits[r * 5 + k]);
    want += std::log(z) - logits[r * 5 + labels[r]];
  }
  want /= 4.0;
  CHECK(g.value(loss).item() == doctest::Approx(want).epsilon(1e-13));
  CHECK(FiniteDifferenceCheck(
            [&](Graph<double>& g, const std::vector<Var>& v) {
              return SoftmaxCrossEntropy<double>(g, v[0], labels);
            },
            {logits})
            .rel_error < kSmooth);
  const std::vector<std::size_t> bad{0, 5, 0, 0};
  Graph<double> g2;
  CHECK_THROWS_AS(SoftmaxCrossEntropy<double>(g2, g2.Input(logits), bad), Error);
}

TEST_CASE("softmax cross-entropy is stable for large logits") {
  Graph<double> g;
  const Var l = g.Input(Tensor<double>({1, 3}, std::vector<double>{1000.0, 0.0, -1000.0}));
  const std::vector<std::size_t> label{0};
  CHECK(g.value(SoftmaxCrossEntropy<double>(g, l, label)).item() ==
        doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("cosine: value, gradient and degenerate input") {
  std::mt19937_64 gen(7);
  const auto u = RandomTensor<double>({6}, gen);
  const auto v = RandomTensor<double>({6}, gen);
  Graph<double> g;
  const Var c = Cosine(g, g.Input(u), g.Input(v));
  double dot = 0, nu = 0, nv = 0;
  for (std::size_t i = 0; i < 6; ++i) {
    dot += u[i] * v[i];
    nu += u[i] * u[i];
    nv += v[i] * v[i];
  }
  CHECK(g.value(c).item() == doctest::Approx(dot / std::sqrt(nu * nv)).epsilon(1e-14));
  CHECK(FiniteDifferenceCheck(
            [](Graph<double>& g, const std::vector<Var>& x) { return Cosine(g, x[0], x[1]); },
            {u, v})
            .rel_error < kSmooth);
  Graph<double> g2;
  CHECK_THROWS_AS(Cosine(g2, g2.Input(Tensor<double>({6})), g2.Input(v)), Error);
}

TEST_CASE("elementwise and shape ops: gradients") {
  std::mt19937_64 gen(8);
  const auto a = RandomTensor<double>({3, 4}, gen);
  const auto b = RandomTensor<double>({3, 4}, gen);
  CHECK(FiniteDifferenceCheck(
            [](Graph<double>& g, const std::vector<Var>& v) {
              const Var s = Sub(g, Add(g, v[0], Scale(g, v[1], 2.5)), v[1]);
              return Mean(g, AddScalar(g, Transpose(g, s), 0.75));
            },
            {a, b})
            .rel_error < kAffine);
  CHECK(FiniteDifferenceCheck(
            [](Graph<double>& g, const std::vector<Var>& v) {
              const Var r1 = Row(g, v[0], 2);
              const Var r0 = Row(g, v[0], 0);
              const Var rows[] = {r1, r0, r1};
              return WeightedSum(g, StackRows<double>(g, rows));
            },
            {a})
            .rel_error < kAffine);
  auto shifted = a;
  for (auto& v : shifted.values())
    if (std::abs(v) < 1e-3) v = 0.25;
  CHECK(FiniteDifferenceCheck(
            [](Graph<double>& g, const std::vector<Var>& v) {
              return Sum(g, Hinge(g, v[0]));
            },
            {shifted})
            .rel_error < kAffine);
}

TEST_CASE("alpha dropout: identity in eval mode, moment preserving in training") {
  std::mt19937_64 gen(9);
  std::normal_distribution<double> n(0.0, 1.0);
  Tensor<double> x({200000});
  for (auto& v : x.values()) v = n(gen);
  Graph<double> g;
  const Var xv = g.Input(x);
  CHECK(AlphaDropout(g, xv, 0.1, false, 1).id == xv.id);
  const Var y = AlphaDropout(g, xv, 0.1, true, 1);
  double mean = 0, sq = 0;
  for (double v : g.value(y).values()) {
    mean += v;
    sq += v * v;
  }
  mean /= double(x.size());
  const double var = sq / double(x.size()) - mean * mean;
  CHECK(std::abs(mean) < 0.01);
  CHECK(std::abs(var - 1.0) < 0.02);
  const Var y2 = AlphaDropout(g, xv, 0.1, true, 1);
  CHECK(g.value(y2) == g.value(y));
  const Var y3 = AlphaDropout(g, xv, 0.1, true, 2);
  CHECK(!(g.value(y3) == g.value(y)));
  CHECK_THROWS_AS(AlphaDropout(g, xv, 1.0, true, 1), Error);
}

TEST_CASE("gradient: alpha dropout with a fixed mask") {
  std::mt19937_64 gen(10);
  CHECK(FiniteDifferenceCheck(
            [](Graph<double>& g, const std::vector<Var>& v) {
              return WeightedSum(g, AlphaDropout(g, v[0], 0.3, true, 77));
            },
            {RandomTensor<double>({2, 3, 5}, gen)})
            .rel_error < kAffine);
}

TEST_CASE("backward can be replayed with different seeds") {
  Graph<double> g;
  const Var x = g.Input(Tensor<double>({3}, std::vector<double>{1.0, -2.0, 3.0}), true);
  const Var y = Scale(g, x, 2.0);
  g.Backward(y, Tensor<double>({3}, std::vector<double>{1.0, 0.0, 0.0}));
  CHECK(g.grad(x).storage() == std::vector<double>{2.0, 0.0, 0.0});
  g.Backward(y, Tensor<double>({3}, std::vector<double>{0.0, 0.0, 1.0}));
  CHECK(g.grad(x).storage() == std::vector<double>{0.0, 0.0, 2.0});
  // Scalar roots only for the implicit seed.
  CHECK_THROWS_AS(g.Backward(y), Error);
}

TEST_CASE("guided backward gates selu by activation and gradient sign") {
  Graph<double> g;
  const Var x = g.Input(Tensor<double>({4}, std::vector<double>{1.0, -1.0, 2.0, 0.5}), true);
  const Var y = Selu(g, x);
  const Tensor<double> seed({4}, std::vector<double>{1.0, 1.0, -1.0, 0.5});
  g.Backward(y, seed);
  const auto plain = g.grad(x).storage();
  CHECK(plain[0] == doctest::Approx(kSeluLambda));
  CHECK(plain[1] == doctest::Approx(kSeluLambda * kSeluAlpha * std::exp(-1.0)));
  g.set_guided(true);
  g.Backward(y, seed);
  const auto guided = g.grad(x).storage();
  CHECK(guided[0] == doctest::Approx(kSeluLambda));
  CHECK(guided[1] == 0.0);  // negative activation
  CHECK(guided[2] == 0.0);  // negative incoming gradient
  CHECK(guided[3] == doctest::Approx(0.5 * kSeluLambda));
}

TEST_CASE("gradient: full stacked network on a 40 x 8 input") {
  // Filterbank over 8 units, then a reduced embedding stack and a triplet
  // style cosine score, all in double precision.
  model::DeepVoxConfig dcfg;
  dcfg.layers = {{1, 3, 5, 1}, {3, 40, 3, 2}};
  dcfg.unit_length = 20;
  const model::DeepVoxNet dvx(dcfg);
  model::EmbedConfig ecfg;
  ecfg.layers = {{40, 6, 3, 1}, {6, 5, 3, 1}, {5, 4, 2, 2}};
  ecfg.embedding_dim = 3;
  ecfg.dropout_p = 0.05;
  const model::EmbedNet emb(ecfg);
  const auto pd = dvx.Init<double>(1);
  const auto pe = emb.Init<double>(2);
  std::mt19937_64 gen(11);
  std::vector<Tensor<double>> inputs{RandomTensor<double>({8, 1, 20}, gen)};
  for (const auto& p : pd) inputs.push_back(p.value);
  for (const auto& p : pe) inputs.push_back(p.value);
  for (std::size_t i = 1 + 2 * dcfg.layers.size(); i < inputs.size(); ++i)
    if (inputs[i].rank() == 1)
      for (auto& v : inputs[i].values()) v = 0.1;  // nonzero biases
  auto fn = [&](Graph<double>& g, const std::vector<Var>& v) {
    const std::vector<Var> dv(v.begin() + 1, v.begin() + 1 + pd.size());
    const std::vector<Var> ev(v.begin() + 1 + pd.size(), v.end());
    const Var feats = dvx.Forward(g, v[0], dv);                       // [8, 40]
    const Var seq = Reshape(g, Transpose(g, feats), Shape{1, 40, 8});  // [1, 40, 8]
    const Var e = emb.Forward(g, seq, ev, true, 5);                    // [1, 3]
    const Var anchor = g.Input(Tensor<double>({1, 3}, std::vector<double>{0.3, -0.2, 0.9}));
    return Cosine(g, e, anchor);
  };
  const auto r = FiniteDifferenceCheck(fn, inputs);
  INFO("coords " << r.coords << " scale " << r.scale);
  CHECK(r.rel_error < kSmooth);
}

TEST_CASE("the library gradient checker agrees with the reference") {
  std::mt19937_64 gen(12);
  const auto x = RandomTensor<double>({2, 5}, gen);
  ScalarFn<double> fn = [](Graph<double>& g, std::span<const Var> v) {
    return Sum(g, Selu(g, v[0]));
  };
  const auto lib = GradCheck(fn, {x});
  const auto ref = FiniteDifferenceCheck(
      [](Graph<double>& g, const std::vector<Var>& v) { return Sum(g, Selu(g, v[0])); }, {x});
  CHECK(lib.coords_checked == ref.coords);
  CHECK(lib.max_rel_error < kSmooth);
  GradCheckOptions sampled;
  sampled.max_coords_per_input = 3;
  CHECK(GradCheck(fn, {x}, sampled).coords_checked == 3);
}

}  // namespace
}  // namespace deepvox::nd
