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

#include "deepvox/autodiff.h"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace deepvox::nd {

std::size_t NumElements(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string ShapeString(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

void ConvSpec::Validate(std::size_t input_length) const {
  Check(in_channels > 0 && out_channels > 0 && kernel_size > 0 &&
            dilation > 0 && stride > 0,
        ErrorCode::kUsage, "conv spec sizes must be positive");
  Check(Extent() <= input_length, ErrorCode::kUsage,
        "conv kernel extent " + std::to_string(Extent()) +
            " exceeds input length " + std::to_string(input_length));
}

// ---------------------------------------------------------------------------
// Graph

template <typename T>
Var Graph<T>::Input(Tensor<T> value, bool requires_grad) {
  return Record(std::move(value), requires_grad, nullptr);
}

template <typename T>
Var Graph<T>::Record(Tensor<T> value, bool needs_grad, BackwardFn backward) {
  Check(value.AllFinite(), ErrorCode::kNumeric,
        "non-finite value produced for tensor " + ShapeString(value.shape()));
  nodes_.push_back(Node{std::move(value), Tensor<T>(), needs_grad,
                        needs_grad ? std::move(backward) : nullptr});
  return Var{nodes_.size() - 1};
}

template <typename T>
Tensor<T> Graph<T>::grad(Var v) const {
  const Node& n = nodes_.at(v.id);
  if (n.grad.empty() && !n.value.empty()) return Tensor<T>(n.value.shape());
  return n.grad;
}

template <typename T>
Tensor<T>& Graph<T>::GradBuffer(Var v) {
  Node& n = nodes_.at(v.id);
  if (n.grad.size() != n.value.size()) n.grad = Tensor<T>(n.value.shape());
  return n.grad;
}

template <typename T>
void Graph<T>::AccumulateGrad(Var v, const Tensor<T>& g) {
  if (!v.valid() || !nodes_.at(v.id).needs_grad) return;
  Tensor<T>& buf = GradBuffer(v);
  Check(buf.size() == g.size(), ErrorCode::kInternal,
        "gradient shape " + ShapeString(g.shape()) + " vs value " +
            ShapeString(buf.shape()));
  for (std::size_t i = 0; i < g.size(); ++i) buf[i] += g[i];
}

template <typename T>
void Graph<T>::Backward(Var root) {
  Check(value(root).size() == 1, ErrorCode::kUsage,
        "Backward() without seed needs a scalar root, got " +
            ShapeString(value(root).shape()));
  Backward(root, Tensor<T>(value(root).shape(), T(1)));
}

template <typename T>
void Graph<T>::Backward(Var root, const Tensor<T>& seed) {
  Check(seed.size() == value(root).size(), ErrorCode::kUsage,
        "seed shape " + ShapeString(seed.shape()) + " vs root " +
            ShapeString(value(root).shape()));
  for (auto& n : nodes_) n.grad = Tensor<T>();
  if (!nodes_[root.id].needs_grad) return;
  GradBuffer(root) = Tensor<T>(value(root).shape(), seed.storage());
  for (std::size_t i = root.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.backward || n.grad.empty()) continue;
    // Interior gradients are released once consumed; leaves keep theirs.
    const Tensor<T> out_grad = std::move(n.grad);
    n.grad = Tensor<T>();
    n.backward(*this, out_grad);
  }
}

template class Graph<float>;
template class Graph<double>;

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using RowMap = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstRowMap = Eigen::Map<const RowMat<T>>;

template <typename T>
bool AnyGrad(const Graph<T>& g, std::initializer_list<Var> vars) {
  for (Var v : vars)
    if (v.valid() && g.requires_grad(v)) return true;
  return false;
}

struct ConvGeom {
  std::size_t n, cin, len, cout, k, dil, stride, lout;
};

template <typename T>
void ConvForwardDirect(const ConvGeom& s, const T* x, const T* w, const T* b,
                       T* y) {
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t o = 0; o < s.cout; ++o) {
      for (std::size_t t = 0; t < s.lout; ++t) {
        T acc = T(0);
        for (std::size_t c = 0; c < s.cin; ++c) {
          const T* xr = x + (n * s.cin + c) * s.len + t * s.stride;
          const T* wr = w + (o * s.cin + c) * s.k;
          for (std::size_t kk = 0; kk < s.k; ++kk) acc += wr[kk] * xr[kk * s.dil];
        }
        y[(n * s.cout + o) * s.lout + t] = b ? acc + b[o] : acc;
      }
    }
  }
}

template <typename T>
void ConvBackwardDirect(const ConvGeom& s, const T* x, const T* w,
                        const T* gy, T* gx, T* gw, T* gb) {
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t o = 0; o < s.cout; ++o) {
      for (std::size_t t = 0; t < s.lout; ++t) {
        const T go = gy[(n * s.cout + o) * s.lout + t];
        if (gb) gb[o] += go;
        for (std::size_t c = 0; c < s.cin; ++c) {
          const std::size_t xoff = (n * s.cin + c) * s.len + t * s.stride;
          const std::size_t woff = (o * s.cin + c) * s.k;
          for (std::size_t kk = 0; kk < s.k; ++kk) {
            if (gw) gw[woff + kk] += go * x[xoff + kk * s.dil];
            if (gx) gx[xoff + kk * s.dil] += go * w[woff + kk];
          }
        }
      }
    }
  }
}

// Samples per im2col block; keeps the column buffer near 2 MB of floats.
std::size_t GemmChunk(const ConvGeom& s) {
  const std::size_t per = s.cin * s.k * s.lout;
  return std::clamp<std::size_t>((std::size_t{1} << 19) / std::max<std::size_t>(per, 1),
                                 1, s.n);
}

template <typename T>
void Im2Col(const ConvGeom& s, const T* x, std::size_t n0, std::size_t nb,
            T* cols) {
  const std::size_t width = nb * s.lout;
  for (std::size_t c = 0; c < s.cin; ++c) {
    for (std::size_t kk = 0; kk < s.k; ++kk) {
      T* row = cols + (c * s.k + kk) * width;
      for (std::size_t j = 0; j < nb; ++j) {
        const T* src = x + ((n0 + j) * s.cin + c) * s.len + kk * s.dil;
        T* dst = row + j * s.lout;
        if (s.stride == 1) {
          std::copy(src, src + s.lout, dst);
        } else {
          for (std::size_t t = 0; t < s.lout; ++t) dst[t] = src[t * s.stride];
        }
      }
    }
  }
}

template <typename T>
void ConvForwardGemm(const ConvGeom& s, const T* x, const T* w, const T* b,
                     T* y) {
  const std::size_t kdim = s.cin * s.k;
  const std::size_t chunk = GemmChunk(s);
  std::vector<T> cols(kdim * chunk * s.lout);
  RowMat<T> out(s.cout, chunk * s.lout);
  ConstRowMap<T> wm(w, s.cout, kdim);
  for (std::size_t n0 = 0; n0 < s.n; n0 += chunk) {
    const std::size_t nb = std::min(chunk, s.n - n0);
    const std::size_t width = nb * s.lout;
    Im2Col(s, x, n0, nb, cols.data());
    ConstRowMap<T> cm(cols.data(), kdim, width);
    out.leftCols(width).noalias() = wm * cm;
    for (std::size_t j = 0; j < nb; ++j) {
      for (std::size_t o = 0; o < s.cout; ++o) {
        const T* src = out.data() + o * out.cols() + j * s.lout;
        T* dst = y + ((n0 + j) * s.cout + o) * s.lout;
        const T bias = b ? b[o] : T(0);
        for (std::size_t t = 0; t < s.lout; ++t) dst[t] = src[t] + bias;
      }
    }
  }
}

template <typename T>
void ConvBackwardGemm(const ConvGeom& s, const T* x, const T* w, const T* gy,
                      T* gx, T* gw, T* gb) {
  const std::size_t kdim = s.cin * s.k;
  const std::size_t chunk = GemmChunk(s);
  std::vector<T> cols(kdim * chunk * s.lout);
  RowMat<T> gyc(s.cout, chunk * s.lout);
  RowMat<T> gcols(kdim, chunk * s.lout);
  ConstRowMap<T> wm(w, s.cout, kdim);
  RowMat<T> gw_acc;
  if (gw) gw_acc = RowMat<T>::Zero(s.cout, kdim);
  for (std::size_t n0 = 0; n0 < s.n; n0 += chunk) {
    const std::size_t nb = std::min(chunk, s.n - n0);
    const std::size_t width = nb * s.lout;
    for (std::size_t j = 0; j < nb; ++j) {
      for (std::size_t o = 0; o < s.cout; ++o) {
        const T* src = gy + ((n0 + j) * s.cout + o) * s.lout;
        std::copy(src, src + s.lout, gyc.data() + o * gyc.cols() + j * s.lout);
      }
    }
    auto gyw = gyc.leftCols(width);
    if (gb) {
      for (std::size_t o = 0; o < s.cout; ++o) gb[o] += gyw.row(o).sum();
    }
    if (gw) {
      Im2Col(s, x, n0, nb, cols.data());
      ConstRowMap<T> cm(cols.data(), kdim, width);
      gw_acc.noalias() += gyw * cm.transpose();
    }
    if (gx) {
      auto gcw = gcols.leftCols(width);
      gcw.noalias() = wm.transpose() * gyw;
      for (std::size_t c = 0; c < s.cin; ++c) {
        for (std::size_t kk = 0; kk < s.k; ++kk) {
          const T* row = gcols.data() + (c * s.k + kk) * gcols.cols();
          for (std::size_t j = 0; j < nb; ++j) {
            T* dst = gx + ((n0 + j) * s.cin + c) * s.len + kk * s.dil;
            const T* src = row + j * s.lout;
            for (std::size_t t = 0; t < s.lout; ++t) dst[t * s.stride] += src[t];
          }
        }
      }
    }
  }
  if (gw) {
    for (std::size_t i = 0; i < s.cout * kdim; ++i) gw[i] += gw_acc.data()[i];
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Conv1d

template <typename T>
Var Conv1d(Graph<T>& g, Var x, Var weight, Var bias, const ConvSpec& spec,
           ConvAlgo algo) {
  const Tensor<T>& xv = g.value(x);
  const Tensor<T>& wv = g.value(weight);
  Check(xv.rank() == 3 && xv.dim(1) == spec.in_channels, ErrorCode::kUsage,
        "conv1d input " + ShapeString(xv.shape()) + " does not match " +
            std::to_string(spec.in_channels) + " input channels");
  const Shape wshape{spec.out_channels, spec.in_channels, spec.kernel_size};
  Check(wv.shape() == wshape, ErrorCode::kUsage,
        "conv1d weights " + ShapeString(wv.shape()) + " vs expected " +
            ShapeString(wshape));
  Check(bias.valid() == spec.bias, ErrorCode::kUsage,
        "conv1d bias presence does not match spec");
  if (bias.valid()) {
    Check(g.value(bias).shape() == Shape{spec.out_channels}, ErrorCode::kUsage,
          "conv1d bias " + ShapeString(g.value(bias).shape()) +
              " vs expected " + ShapeString(Shape{spec.out_channels}));
  }
  spec.Validate(xv.dim(2));
  const ConvGeom s{xv.dim(0),      spec.in_channels, xv.dim(2),
                   spec.out_channels, spec.kernel_size, spec.dilation,
                   spec.stride,    spec.OutputLength(xv.dim(2))};
  if (algo == ConvAlgo::kAuto)
    algo = std::is_same_v<T, double> ? ConvAlgo::kDirect : ConvAlgo::kGemm;

  Tensor<T> y(Shape{s.n, s.cout, s.lout});
  const T* bptr = bias.valid() ? g.value(bias).data() : nullptr;
  if (algo == ConvAlgo::kDirect)
    ConvForwardDirect(s, xv.data(), wv.data(), bptr, y.data());
  else
    ConvForwardGemm(s, xv.data(), wv.data(), bptr, y.data());

  const bool needs = AnyGrad(g, {x, weight, bias});
  return g.Record(std::move(y), needs,
                  [x, weight, bias, s, algo](Graph<T>& gr, const Tensor<T>& gy) {
                    T* gx = gr.requires_grad(x) ? gr.GradBuffer(x).data() : nullptr;
                    T* gw = gr.requires_grad(weight)
                                ? gr.GradBuffer(weight).data()
                                : nullptr;
                    T* gb = bias.valid() && gr.requires_grad(bias)
                                ? gr.GradBuffer(bias).data()
                                : nullptr;
                    const T* xd = gr.value(x).data();
                    const T* wd = gr.value(weight).data();
                    if (algo == ConvAlgo::kDirect)
                      ConvBackwardDirect(s, xd, wd, gy.data(), gx, gw, gb);
                    else
                      ConvBackwardGemm(s, xd, wd, gy.data(), gx, gw, gb);
                  });
}

// ---------------------------------------------------------------------------
// Elementwise nonlinearities

template <typename T>
Var Selu(Graph<T>& g, Var x) {
  using Arr = Eigen::Array<T, Eigen::Dynamic, 1>;
  const Tensor<T>& xv = g.value(x);
  Tensor<T> y(xv.shape());
  const T lambda = T(kSeluLambda);
  const T la = T(kSeluLambda * kSeluAlpha);
  Eigen::Map<const Arr> xa(xv.data(), xv.size());
  // Eigen's vectorized exp; glibc's scalar expm1f is legacy-SSE code and
  // stalls badly on the AVX state left behind by the GEMM kernels.
  Eigen::Map<Arr>(y.data(), y.size()) =
      (xa > T(0)).select(lambda * xa, la * (xa.exp() - T(1)));
  return g.Record(std::move(y), g.requires_grad(x),
                  [x, lambda, la](Graph<T>& gr, const Tensor<T>& gy) {
                    const Tensor<T>& xv = gr.value(x);
                    Tensor<T>& gx = gr.GradBuffer(x);
                    if (gr.guided()) {
                      for (std::size_t i = 0; i < xv.size(); ++i) {
                        if (xv[i] > T(0) && gy[i] > T(0)) gx[i] += lambda * gy[i];
                      }
                      return;
                    }
                    Eigen::Map<const Arr> xa(xv.data(), xv.size());
                    Eigen::Map<const Arr> ga(gy.data(), gy.size());
                    Eigen::Map<Arr>(gx.data(), gx.size()) +=
                        ga * (xa > T(0)).select(Arr::Constant(xa.size(), lambda),
                                                la * xa.exp());
                  });
}

template <typename T>
Var AlphaDropout(Graph<T>& g, Var x, double p, bool training,
                 std::uint64_t seed) {
  Check(p >= 0.0 && p < 1.0, ErrorCode::kUsage,
        "alpha dropout probability must be in [0, 1), got " + std::to_string(p));
  if (!training || p == 0.0) return x;
  const double saturation = -kSeluLambda * kSeluAlpha;
  const double keep = 1.0 - p;
  const double a = 1.0 / std::sqrt(keep * (1.0 + p * saturation * saturation));
  const double b = -a * saturation * p;
  const Tensor<T>& xv = g.value(x);
  std::vector<std::uint8_t> mask(xv.size());
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (auto& m : mask) m = unif(gen) < keep ? 1 : 0;
  Tensor<T> y(xv.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) {
    const double v = mask[i] ? static_cast<double>(xv[i]) : saturation;
    y[i] = static_cast<T>(a * v + b);
  }
  return g.Record(std::move(y), g.requires_grad(x),
                  [x, mask = std::move(mask), a](Graph<T>& gr,
                                                 const Tensor<T>& gy) {
                    Tensor<T>& gx = gr.GradBuffer(x);
                    const T at = static_cast<T>(a);
                    for (std::size_t i = 0; i < gy.size(); ++i)
                      if (mask[i]) gx[i] += at * gy[i];
                  });
}

// ---------------------------------------------------------------------------
// Pooling over the last axis of [N, C, L]

template <typename T>
Var AvgPool1d(Graph<T>& g, Var x, std::size_t window, std::size_t stride) {
  const Tensor<T>& xv = g.value(x);
  Check(xv.rank() == 3, ErrorCode::kUsage,
        "avg_pool1d expects [N, C, L], got " + ShapeString(xv.shape()));
  const std::size_t len = xv.dim(2);
  Check(window >= 1 && stride >= 1 && window <= len, ErrorCode::kUsage,
        "pool window " + std::to_string(window) + " exceeds length " +
            std::to_string(len));
  const std::size_t rows = xv.dim(0) * xv.dim(1);
  const std::size_t lout = (len - window) / stride + 1;
  Tensor<T> y(Shape{xv.dim(0), xv.dim(1), lout});
  const T inv = T(1) / static_cast<T>(window);
  for (std::size_t r = 0; r < rows; ++r) {
    const T* src = xv.data() + r * len;
    for (std::size_t t = 0; t < lout; ++t) {
      T acc = T(0);
      for (std::size_t k = 0; k < window; ++k) acc += src[t * stride + k];
      y[r * lout + t] = acc * inv;
    }
  }
  return g.Record(std::move(y), g.requires_grad(x),
                  [x, rows, len, lout, window, stride, inv](
                      Graph<T>& gr, const Tensor<T>& gy) {
                    Tensor<T>& gx = gr.GradBuffer(x);
                    for (std::size_t r = 0; r < rows; ++r)
                      for (std::size_t t = 0; t < lout; ++t) {
                        const T v = gy[r * lout + t] * inv;
                        for (std::size_t k = 0; k < window; ++k)
                          gx[r * len + t * stride + k] += v;
                      }
                  });
}

template <typename T>
Var MaxPool1d(Graph<T>& g, Var x, std::size_t window, std::size_t stride) {
  const Tensor<T>& xv = g.value(x);
  Check(xv.rank() == 3, ErrorCode::kUsage,
        "max_pool1d expects [N, C, L], got " + ShapeString(xv.shape()));
  const std::size_t len = xv.dim(2);
  Check(window >= 1 && stride >= 1 && window <= len, ErrorCode::kUsage,
        "pool window " + std::to_string(window) + " exceeds length " +
            std::to_string(len));
  const std::size_t rows = xv.dim(0) * xv.dim(1);
  const std::size_t lout = (len - window) / stride + 1;
  Tensor<T> y(Shape{xv.dim(0), xv.dim(1), lout});
  std::vector<std::size_t> argmax(rows * lout);
  for (std::size_t r = 0; r < rows; ++r) {
    const T* src = xv.data() + r * len;
    for (std::size_t t = 0; t < lout; ++t) {
      std::size_t best = t * stride;
      for (std::size_t k = 1; k < window; ++k)
        if (src[t * stride + k] > src[best]) best = t * stride + k;
      y[r * lout + t] = src[best];
      argmax[r * lout + t] = r * len + best;
    }
  }
  return g.Record(std::move(y), g.requires_grad(x),
                  [x, argmax = std::move(argmax)](Graph<T>& gr,
                                                  const Tensor<T>& gy) {
                    Tensor<T>& gx = gr.GradBuffer(x);
                    for (std::size_t i = 0; i < gy.size(); ++i)
                      gx[argmax[i]] += gy[i];
                  });
}

// ---------------------------------------------------------------------------
// Dense layers and losses

template <typename T>
Var Linear(Graph<T>& g, Var x, Var weight, Var bias) {
  const Tensor<T>& xv = g.value(x);
  const Tensor<T>& wv = g.value(weight);
  Check(xv.rank() == 2 && wv.rank() == 2 && xv.dim(1) == wv.dim(1),
        ErrorCode::kUsage,
        "linear input " + ShapeString(xv.shape()) + " vs weights " +
            ShapeString(wv.shape()));
  const std::size_t n = xv.dim(0), in = xv.dim(1), out = wv.dim(0);
  if (bias.valid()) {
    Check(g.value(bias).shape() == Shape{out}, ErrorCode::kUsage,
          "linear bias " + ShapeString(g.value(bias).shape()) +
              " vs weights " + ShapeString(wv.shape()));
  }
  Tensor<T> y(Shape{n, out});
  RowMap<T> ym(y.data(), n, out);
  ym.noalias() = ConstRowMap<T>(xv.data(), n, in) *
                 ConstRowMap<T>(wv.data(), out, in).transpose();
  if (bias.valid()) {
    const T* b = g.value(bias).data();
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t o = 0; o < out; ++o) ym(r, o) += b[o];
  }
  return g.Record(
      std::move(y), AnyGrad(g, {x, weight, bias}),
      [x, weight, bias, n, in, out](Graph<T>& gr, const Tensor<T>& gy) {
        ConstRowMap<T> gym(gy.data(), n, out);
        if (gr.requires_grad(x)) {
          RowMap<T> gx(gr.GradBuffer(x).data(), n, in);
          gx.noalias() += gym * ConstRowMap<T>(gr.value(weight).data(), out, in);
        }
        if (gr.requires_grad(weight)) {
          RowMap<T> gw(gr.GradBuffer(weight).data(), out, in);
          gw.noalias() +=
              gym.transpose() * ConstRowMap<T>(gr.value(x).data(), n, in);
        }
        if (bias.valid() && gr.requires_grad(bias)) {
          T* gb = gr.GradBuffer(bias).data();
          for (std::size_t r = 0; r < n; ++r)
            for (std::size_t o = 0; o < out; ++o) gb[o] += gym(r, o);
        }
      });
}

template <typename T>
Var SoftmaxCrossEntropy(Graph<T>& g, Var logits,
                        std::span<const std::size_t> labels) {
  const Tensor<T>& lv = g.value(logits);
  Check(lv.rank() == 2 && lv.dim(0) == labels.size(), ErrorCode::kUsage,
        "softmax_cross_entropy logits " + ShapeString(lv.shape()) + " vs " +
            std::to_string(labels.size()) + " labels");
  const std::size_t n = lv.dim(0), c = lv.dim(1);
  Tensor<T> probs(lv.shape());
  double loss = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    Check(labels[r] < c, ErrorCode::kUsage,
          "label " + std::to_string(labels[r]) + " out of range for " +
              std::to_string(c) + " classes");
    const T* row = lv.data() + r * c;
    const T mx = *std::max_element(row, row + c);
    double z = 0.0;
    for (std::size_t k = 0; k < c; ++k) z += std::exp(double(row[k] - mx));
    const double log_z = std::log(z) + double(mx);
    loss += log_z - double(row[labels[r]]);
    for (std::size_t k = 0; k < c; ++k)
      probs[r * c + k] = static_cast<T>(std::exp(double(row[k]) - log_z));
  }
  std::vector<std::size_t> lab(labels.begin(), labels.end());
  return g.Record(Tensor<T>::Scalar(static_cast<T>(loss / double(n))),
                  g.requires_grad(logits),
                  [logits, probs = std::move(probs), lab = std::move(lab), n,
                   c](Graph<T>& gr, const Tensor<T>& gy) {
                    Tensor<T>& gl = gr.GradBuffer(logits);
                    const T scale = gy[0] / static_cast<T>(n);
                    for (std::size_t r = 0; r < n; ++r)
                      for (std::size_t k = 0; k < c; ++k) {
                        const T target = k == lab[r] ? T(1) : T(0);
                        gl[r * c + k] += scale * (probs[r * c + k] - target);
                      }
                  });
}

template <typename T>
Var Cosine(Graph<T>& g, Var u, Var v) {
  const Tensor<T>& uv = g.value(u);
  const Tensor<T>& vv = g.value(v);
  Check(uv.size() == vv.size(), ErrorCode::kUsage,
        "cosine operands " + ShapeString(uv.shape()) + " and " +
            ShapeString(vv.shape()));
  double dot = 0.0, nu = 0.0, nv = 0.0;
  for (std::size_t i = 0; i < uv.size(); ++i) {
    dot += double(uv[i]) * double(vv[i]);
    nu += double(uv[i]) * double(uv[i]);
    nv += double(vv[i]) * double(vv[i]);
  }
  Check(nu > 0.0 && nv > 0.0, ErrorCode::kNumeric, "degenerate embedding");
  const double norm_u = std::sqrt(nu), norm_v = std::sqrt(nv);
  const double cos = std::clamp(dot / (norm_u * norm_v), -1.0, 1.0);
  return g.Record(Tensor<T>::Scalar(static_cast<T>(cos)), AnyGrad(g, {u, v}),
                  [u, v, cos, norm_u, norm_v](Graph<T>& gr,
                                              const Tensor<T>& gy) {
                    const Tensor<T>& uv = gr.value(u);
                    const Tensor<T>& vv = gr.value(v);
                    const double go = gy[0];
                    const double inv = 1.0 / (norm_u * norm_v);
                    if (gr.requires_grad(u)) {
                      Tensor<T>& gu = gr.GradBuffer(u);
                      const double su = cos / (norm_u * norm_u);
                      for (std::size_t i = 0; i < uv.size(); ++i)
                        gu[i] += static_cast<T>(go * (vv[i] * inv - uv[i] * su));
                    }
                    if (gr.requires_grad(v)) {
                      Tensor<T>& gv = gr.GradBuffer(v);
                      const double sv = cos / (norm_v * norm_v);
                      for (std::size_t i = 0; i < vv.size(); ++i)
                        gv[i] += static_cast<T>(go * (uv[i] * inv - vv[i] * sv));
                    }
                  });
}

// ---------------------------------------------------------------------------
// Structural and arithmetic helpers

template <typename T>
Var Add(Graph<T>& g, Var a, Var b) {
  const Tensor<T>& av = g.value(a);
  const Tensor<T>& bv = g.value(b);
  Check(av.shape() == bv.shape(), ErrorCode::kUsage,
        "add operands " + ShapeString(av.shape()) + " and " +
            ShapeString(bv.shape()));
  Tensor<T> y(av.shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = av[i] + bv[i];
  return g.Record(std::move(y), AnyGrad(g, {a, b}),
                  [a, b](Graph<T>& gr, const Tensor<T>& gy) {
                    gr.AccumulateGrad(a, gy);
                    gr.AccumulateGrad(b, gy);
                  });
}

template <typename T>
Var Sub(Graph<T>& g, Var a, Var b) {
  const Tensor<T>& av = g.value(a);
  const Tensor<T>& bv = g.value(b);
  Check(av.shape() == bv.shape(), ErrorCode::kUsage,
        "sub operands " + ShapeString(av.shape()) + " and " +
            ShapeString(bv.shape()));
  Tensor<T> y(av.shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = av[i] - bv[i];
  return g.Record(std::move(y), AnyGrad(g, {a, b}),
                  [a, b](Graph<T>& gr, const Tensor<T>& gy) {
                    gr.AccumulateGrad(a, gy);
                    if (gr.requires_grad(b)) {
                      Tensor<T>& gb = gr.GradBuffer(b);
                      for (std::size_t i = 0; i < gy.size(); ++i) gb[i] -= gy[i];
                    }
                  });
}

template <typename T>
Var Scale(Graph<T>& g, Var a, T factor) {
  Tensor<T> y = g.value(a);
  for (auto& v : y.values()) v *= factor;
  return g.Record(std::move(y), g.requires_grad(a),
                  [a, factor](Graph<T>& gr, const Tensor<T>& gy) {
                    Tensor<T>& ga = gr.GradBuffer(a);
                    for (std::size_t i = 0; i < gy.size(); ++i)
                      ga[i] += factor * gy[i];
                  });
}

template <typename T>
Var AddScalar(Graph<T>& g, Var a, T offset) {
  Tensor<T> y = g.value(a);
  for (auto& v : y.values()) v += offset;
  return g.Record(std::move(y), g.requires_grad(a),
                  [a](Graph<T>& gr, const Tensor<T>& gy) {
                    gr.AccumulateGrad(a, gy);
                  });
}

template <typename T>
Var Hinge(Graph<T>& g, Var a) {
  Tensor<T> y = g.value(a);
  for (auto& v : y.values()) v = std::max(v, T(0));
  return g.Record(std::move(y), g.requires_grad(a),
                  [a](Graph<T>& gr, const Tensor<T>& gy) {
                    const Tensor<T>& av = gr.value(a);
                    Tensor<T>& ga = gr.GradBuffer(a);
                    for (std::size_t i = 0; i < gy.size(); ++i)
                      if (av[i] > T(0)) ga[i] += gy[i];
                  });
}

template <typename T>
Var Sum(Graph<T>& g, Var a) {
  const Tensor<T>& av = g.value(a);
  double acc = 0.0;
  for (T v : av.values()) acc += v;
  return g.Record(Tensor<T>::Scalar(static_cast<T>(acc)), g.requires_grad(a),
                  [a](Graph<T>& gr, const Tensor<T>& gy) {
                    Tensor<T>& ga = gr.GradBuffer(a);
                    for (auto& v : ga.values()) v += gy[0];
                  });
}

template <typename T>
Var Mean(Graph<T>& g, Var a) {
  const std::size_t n = g.value(a).size();
  Check(n > 0, ErrorCode::kUsage, "mean of empty tensor");
  return Scale(g, Sum(g, a), T(1) / static_cast<T>(n));
}

template <typename T>
Var Reshape(Graph<T>& g, Var a, Shape shape) {
  Tensor<T> y = g.value(a).Reshaped(std::move(shape));
  return g.Record(std::move(y), g.requires_grad(a),
                  [a](Graph<T>& gr, const Tensor<T>& gy) {
                    Tensor<T>& ga = gr.GradBuffer(a);
                    for (std::size_t i = 0; i < gy.size(); ++i) ga[i] += gy[i];
                  });
}

template <typename T>
Var Transpose(Graph<T>& g, Var a) {
  const Tensor<T>& av = g.value(a);
  Check(av.rank() == 2, ErrorCode::kUsage,
        "transpose expects rank 2, got " + ShapeString(av.shape()));
  const std::size_t r = av.dim(0), c = av.dim(1);
  Tensor<T> y(Shape{c, r});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) y[j * r + i] = av[i * c + j];
  return g.Record(std::move(y), g.requires_grad(a),
                  [a, r, c](Graph<T>& gr, const Tensor<T>& gy) {
                    Tensor<T>& ga = gr.GradBuffer(a);
                    for (std::size_t i = 0; i < r; ++i)
                      for (std::size_t j = 0; j < c; ++j)
                        ga[i * c + j] += gy[j * r + i];
                  });
}

template <typename T>
Var Row(Graph<T>& g, Var a, std::size_t row) {
  const Tensor<T>& av = g.value(a);
  Check(av.rank() == 2 && row < av.dim(0), ErrorCode::kUsage,
        "row " + std::to_string(row) + " out of range for " +
            ShapeString(av.shape()));
  const std::size_t d = av.dim(1);
  Tensor<T> y(Shape{d},
              std::vector<T>(av.data() + row * d, av.data() + (row + 1) * d));
  return g.Record(std::move(y), g.requires_grad(a),
                  [a, row, d](Graph<T>& gr, const Tensor<T>& gy) {
                    Tensor<T>& ga = gr.GradBuffer(a);
                    for (std::size_t i = 0; i < d; ++i) ga[row * d + i] += gy[i];
                  });
}

template <typename T>
Var StackRows(Graph<T>& g, std::span<const Var> rows) {
  Check(!rows.empty(), ErrorCode::kUsage, "stack of zero rows");
  const std::size_t d = g.value(rows[0]).size();
  Tensor<T> y(Shape{rows.size(), d});
  bool needs = false;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const Tensor<T>& rv = g.value(rows[r]);
    Check(rv.size() == d, ErrorCode::kUsage, "stack rows differ in size");
    std::copy(rv.data(), rv.data() + d, y.data() + r * d);
    needs = needs || g.requires_grad(rows[r]);
  }
  std::vector<Var> ids(rows.begin(), rows.end());
  return g.Record(std::move(y), needs,
                  [ids = std::move(ids), d](Graph<T>& gr, const Tensor<T>& gy) {
                    for (std::size_t r = 0; r < ids.size(); ++r) {
                      if (!gr.requires_grad(ids[r])) continue;
                      Tensor<T>& gr_row = gr.GradBuffer(ids[r]);
                      for (std::size_t i = 0; i < d; ++i)
                        gr_row[i] += gy[r * d + i];
                    }
                  });
}

#define DEEPVOX_INSTANTIATE_OPS(T)                                            \
  template Var Conv1d<T>(Graph<T>&, Var, Var, Var, const ConvSpec&, ConvAlgo); \
  template Var Selu<T>(Graph<T>&, Var);                                       \
  template Var AlphaDropout<T>(Graph<T>&, Var, double, bool, std::uint64_t);  \
  template Var AvgPool1d<T>(Graph<T>&, Var, std::size_t, std::size_t);        \
  template Var MaxPool1d<T>(Graph<T>&, Var, std::size_t, std::size_t);        \
  template Var Linear<T>(Graph<T>&, Var, Var, Var);                           \
  template Var SoftmaxCrossEntropy<T>(Graph<T>&, Var,                         \
                                      std::span<const std::size_t>);          \
  template Var Cosine<T>(Graph<T>&, Var, Var);                                \
  template Var Add<T>(Graph<T>&, Var, Var);                                   \
  template Var Sub<T>(Graph<T>&, Var, Var);                                   \
  template Var Scale<T>(Graph<T>&, Var, T);                                   \
  template Var AddScalar<T>(Graph<T>&, Var, T);                               \
  template Var Hinge<T>(Graph<T>&, Var);                                      \
  template Var Sum<T>(Graph<T>&, Var);                                        \
  template Var Mean<T>(Graph<T>&, Var);                                       \
  template Var Reshape<T>(Graph<T>&, Var, Shape);                             \
  template Var Transpose<T>(Graph<T>&, Var);                                  \
  template Var Row<T>(Graph<T>&, Var, std::size_t);                           \
  template Var StackRows<T>(Graph<T>&, std::span<const Var>);

DEEPVOX_INSTANTIATE_OPS(float)
DEEPVOX_INSTANTIATE_OPS(double)

#undef DEEPVOX_INSTANTIATE_OPS

// ---------------------------------------------------------------------------
// Gradient check

GradCheckResult GradCheck(const ScalarFn<double>& fn,
                          const std::vector<Tensor<double>>& inputs,
                          const GradCheckOptions& options) {
  GradCheckResult result;
  std::vector<Tensor<double>> analytic;
  {
    Graph<double> g;
    std::vector<Var> vars;
    for (const auto& t : inputs) vars.push_back(g.Input(t, true));
    Var out = fn(g, vars);
    Check(g.value(out).size() == 1, ErrorCode::kUsage,
          "grad_check needs a scalar-valued function");
    g.Backward(out);
    for (Var v : vars) analytic.push_back(g.grad(v));
  }
  auto eval = [&](const std::vector<Tensor<double>>& at) {
    Graph<double> g;
    std::vector<Var> vars;
    for (const auto& t : at) vars.push_back(g.Input(t, false));
    return g.value(fn(g, vars)).item();
  };

  std::vector<Tensor<double>> probe = inputs;
  double scale = 0.0, worst = 0.0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    std::vector<std::size_t> coords(inputs[i].size());
    std::iota(coords.begin(), coords.end(), 0);
    if (options.max_coords_per_input > 0 &&
        coords.size() > options.max_coords_per_input) {
      std::mt19937_64 gen(DeriveSeed(options.seed, i));
      std::shuffle(coords.begin(), coords.end(), gen);
      coords.resize(options.max_coords_per_input);
      std::sort(coords.begin(), coords.end());
    }
    for (std::size_t c : coords) {
      const double x0 = probe[i][c];
      probe[i][c] = x0 + options.eps;
      const double up = eval(probe);
      probe[i][c] = x0 - options.eps;
      const double down = eval(probe);
      probe[i][c] = x0;
      const double num = (up - down) / (2.0 * options.eps);
      const double ana = analytic[i][c];
      result.analytic.push_back(ana);
      result.numeric.push_back(num);
      scale = std::max({scale, std::abs(num), std::abs(ana)});
      worst = std::max(worst, std::abs(num - ana));
    }
  }
  result.coords_checked = result.analytic.size();
  result.max_rel_error = scale > 0.0 ? worst / scale : 0.0;
  return result;
}

}  // namespace deepvox::nd
