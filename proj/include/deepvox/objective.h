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

// Cosine triplet embedding loss:
//   term = cos(a, n) - cos(a, p) + margin, optionally clamped at zero,
// reduced over the batch by mean (default) or sum.

#ifndef DEEPVOX_OBJECTIVE_H_
#define DEEPVOX_OBJECTIVE_H_

#include <span>
#include <string>
#include <vector>

#include "deepvox/autodiff.h"

namespace deepvox::objective {

enum class Reduction { kMean, kSum };

Reduction ParseReduction(const std::string& name);
std::string ReductionName(Reduction r);

struct TripletLossConfig {
  double margin_alpha = 0.2;
  bool hinge = true;
  Reduction reduction = Reduction::kMean;

  void Validate() const;  // margin in [0, 2]
};

struct TripletIndex {
  std::size_t anchor = 0, positive = 0, negative = 0;
};

// Single triplet term on graph variables of any (equal) shape.
template <typename T>
nd::Var TripletTerm(nd::Graph<T>& g, nd::Var a, nd::Var p, nd::Var n,
                    const TripletLossConfig& cfg);

// Batch loss over rows of embeddings [B, D].
template <typename T>
nd::Var BatchTripletLoss(nd::Graph<T>& g, nd::Var embeddings,
                         std::span<const TripletIndex> triplets,
                         const TripletLossConfig& cfg);

// Plain evaluation of one term, in double.
double TripletTermValue(std::span<const double> a, std::span<const double> p,
                        std::span<const double> n, const TripletLossConfig& cfg);

struct LossAndGrad {
  double loss = 0.0;
  std::vector<float> grad;  // d loss / d embeddings, [B, D] row-major
};

// Loss and its gradient with respect to float embeddings [B, D].
LossAndGrad TripletLossWithGrad(std::span<const std::vector<float>> embeddings,
                                std::span<const TripletIndex> triplets,
                                const TripletLossConfig& cfg);

}  // namespace deepvox::objective

#endif  // DEEPVOX_OBJECTIVE_H_
