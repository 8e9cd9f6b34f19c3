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

#include "deepvox/objective.h"

#include <cmath>

#include "deepvox/common.h"

namespace deepvox::objective {

using nd::Graph;
using nd::Shape;
using nd::Tensor;
using nd::Var;

Reduction ParseReduction(const std::string& name) {
  if (name == "mean") return Reduction::kMean;
  if (name == "sum") return Reduction::kSum;
  Fail(ErrorCode::kUsage, "unknown loss reduction '" + name + "' (mean|sum)");
}

std::string ReductionName(Reduction r) {
  return r == Reduction::kMean ? "mean" : "sum";
}

void TripletLossConfig::Validate() const {
  Check(margin_alpha >= 0.0 && margin_alpha <= 2.0, ErrorCode::kUsage,
        "triplet margin must be in [0, 2], got " + std::to_string(margin_alpha));
}

template <typename T>
Var TripletTerm(Graph<T>& g, Var a, Var p, Var n, const TripletLossConfig& cfg) {
  Var d = nd::Sub(g, nd::Cosine(g, a, n), nd::Cosine(g, a, p));
  d = nd::AddScalar(g, d, static_cast<T>(cfg.margin_alpha));
  return cfg.hinge ? nd::Hinge(g, d) : d;
}

template <typename T>
Var BatchTripletLoss(Graph<T>& g, Var embeddings,
                     std::span<const TripletIndex> triplets,
                     const TripletLossConfig& cfg) {
  cfg.Validate();
  Check(!triplets.empty(), ErrorCode::kData, "triplet loss over an empty batch");
  const Tensor<T>& e = g.value(embeddings);
  Check(e.rank() == 2, ErrorCode::kUsage,
        "embeddings must be [B, D], got " + nd::ShapeString(e.shape()));
  std::vector<Var> rows(e.dim(0));
  auto row = [&](std::size_t i) {
    Check(i < rows.size(), ErrorCode::kUsage, "triplet index out of range");
    if (!rows[i].valid()) rows[i] = nd::Row(g, embeddings, i);
    return rows[i];
  };
  std::vector<Var> terms;
  terms.reserve(triplets.size());
  for (const auto& t : triplets)
    terms.push_back(TripletTerm(g, row(t.anchor), row(t.positive),
                                row(t.negative), cfg));
  Var stacked = nd::StackRows<T>(g, terms);
  return cfg.reduction == Reduction::kMean ? nd::Mean(g, stacked)
                                           : nd::Sum(g, stacked);
}

double TripletTermValue(std::span<const double> a, std::span<const double> p,
                        std::span<const double> n, const TripletLossConfig& cfg) {
  Graph<double> g;
  auto in = [&](std::span<const double> v) {
    return g.Input(Tensor<double>(Shape{v.size()},
                                  std::vector<double>(v.begin(), v.end())));
  };
  return g.value(TripletTerm(g, in(a), in(p), in(n), cfg)).item();
}

LossAndGrad TripletLossWithGrad(std::span<const std::vector<float>> embeddings,
                                std::span<const TripletIndex> triplets,
                                const TripletLossConfig& cfg) {
  Check(!embeddings.empty(), ErrorCode::kData, "no embeddings");
  const std::size_t d = embeddings[0].size();
  Tensor<float> e(Shape{embeddings.size(), d});
  for (std::size_t i = 0; i < embeddings.size(); ++i) {
    Check(embeddings[i].size() == d, ErrorCode::kUsage,
          "embeddings differ in dimension");
    std::copy(embeddings[i].begin(), embeddings[i].end(), e.data() + i * d);
  }
  Graph<float> g;
  Var ev = g.Input(std::move(e), true);
  Var loss = BatchTripletLoss(g, ev, triplets, cfg);
  g.Backward(loss);
  return {static_cast<double>(g.value(loss).item()), g.grad(ev).storage()};
}

template Var TripletTerm<float>(Graph<float>&, Var, Var, Var,
                                const TripletLossConfig&);
template Var TripletTerm<double>(Graph<double>&, Var, Var, Var,
                                 const TripletLossConfig&);
template Var BatchTripletLoss<float>(Graph<float>&, Var,
                                     std::span<const TripletIndex>,
                                     const TripletLossConfig&);
template Var BatchTripletLoss<double>(Graph<double>&, Var,
                                      std::span<const TripletIndex>,
                                      const TripletLossConfig&);

}  // namespace deepvox::objective
