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

// Batch construction and curriculum negative mining. Difficulty tau selects
// a negative by rank quantile in the similarity-sorted candidate list:
// tau = 0 picks the least similar (easiest) negative, tau = 1 the most
// similar (hardest).

#ifndef DEEPVOX_MINING_H_
#define DEEPVOX_MINING_H_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "deepvox/objective.h"

namespace deepvox::mining {

struct MiningConfig {
  std::size_t subjects_per_batch = 25;
  std::size_t samples_per_subject = 6;
  double tau_start = 0.4;
  double tau_end = 1.0;
  std::size_t ramp_epochs = 800;
  double margin_alpha = 0.2;

  void Validate() const;
};

// Linear from tau_start at epoch 0 to tau_end at ramp_epochs, then flat.
double TauSchedule(std::size_t epoch, const MiningConfig& cfg);

struct Batch {
  std::vector<std::size_t> items;      // indices into the frame pool
  std::vector<std::size_t> labels;     // per item; equal labels = same subject
  std::vector<std::string> subjects;   // per item
};

// Picks subjects_per_batch subjects that own at least samples_per_subject
// frames, then samples_per_subject frames of each without replacement, and
// shuffles the result. `subjects` holds the subject id of every pool frame.
// Throws kData naming the deficient subjects when too few qualify.
Batch BuildBatch(std::span<const std::string> subjects, const MiningConfig& cfg,
                 std::uint64_t seed);

struct MinedTriplet {
  std::size_t anchor_idx = 0, positive_idx = 0, negative_idx = 0;
  double difficulty = 0.0;      // achieved rank quantile in [0, 1]
  double neg_similarity = 0.0;  // cos(anchor, negative)
  double pos_similarity = 0.0;  // cos(anchor, positive)
};

// Rank of the tau-quantile among `count` sorted candidates:
// round(tau * (count - 1)), halves rounded up.
std::size_t QuantileRank(double tau, std::size_t count);

// All ordered (anchor, positive) pairs within every label with at least two
// members; each gets the negative at rank QuantileRank(tau, M) of its M
// cross-label candidates sorted by (similarity, batch index) ascending.
std::vector<MinedTriplet> MineTriplets(
    std::span<const std::vector<float>> embeddings,
    std::span<const std::size_t> labels, double tau, double margin_alpha);

struct MiningStats {
  std::size_t triplets = 0;
  double mean_neg_similarity = 0.0;
  double mean_pos_similarity = 0.0;
  // Fraction of triplets that already satisfy cos(a,p) >= cos(a,n) + margin.
  double satisfied_fraction = 0.0;
};

MiningStats Summarize(std::span<const MinedTriplet> triplets,
                      double margin_alpha);

std::vector<objective::TripletIndex> ToIndices(
    std::span<const MinedTriplet> triplets);

}  // namespace deepvox::mining

#endif  // DEEPVOX_MINING_H_
