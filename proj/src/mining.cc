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

#include "deepvox/mining.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include "deepvox/common.h"

namespace deepvox::mining {

void MiningConfig::Validate() const {
  Check(subjects_per_batch >= 2, ErrorCode::kUsage,
        "a batch needs at least two subjects");
  Check(samples_per_subject >= 2, ErrorCode::kUsage,
        "a batch needs at least two samples per subject");
  Check(0.0 <= tau_start && tau_start <= tau_end && tau_end <= 1.0,
        ErrorCode::kUsage, "tau must satisfy 0 <= start <= end <= 1");
  Check(margin_alpha >= 0.0 && margin_alpha <= 2.0, ErrorCode::kUsage,
        "margin must be in [0, 2]");
}

double TauSchedule(std::size_t epoch, const MiningConfig& cfg) {
  if (cfg.ramp_epochs == 0 || epoch >= cfg.ramp_epochs) return cfg.tau_end;
  const double frac = static_cast<double>(epoch) / static_cast<double>(cfg.ramp_epochs);
  return cfg.tau_start + (cfg.tau_end - cfg.tau_start) * frac;
}

Batch BuildBatch(std::span<const std::string> subjects, const MiningConfig& cfg,
                 std::uint64_t seed) {
  cfg.Validate();
  std::map<std::string, std::vector<std::size_t>> by_subject;
  for (std::size_t i = 0; i < subjects.size(); ++i)
    by_subject[subjects[i]].push_back(i);

  std::vector<std::string> eligible, deficient;
  for (const auto& [id, items] : by_subject)
    (items.size() >= cfg.samples_per_subject ? eligible : deficient).push_back(id);
  if (eligible.size() < cfg.subjects_per_batch) {
    std::string msg = "insufficient data for a batch of " +
                      std::to_string(cfg.subjects_per_batch) + " subjects x " +
                      std::to_string(cfg.samples_per_subject) + " frames: " +
                      std::to_string(eligible.size()) + " subjects qualify";
    if (!deficient.empty()) {
      msg += "; deficient subjects:";
      for (const auto& id : deficient)
        msg += " " + id + "(" + std::to_string(by_subject[id].size()) + ")";
    }
    Fail(ErrorCode::kData, msg);
  }

  std::mt19937_64 gen(seed);
  std::shuffle(eligible.begin(), eligible.end(), gen);
  eligible.resize(cfg.subjects_per_batch);
  std::sort(eligible.begin(), eligible.end());

  struct Item {
    std::size_t index, label;
  };
  std::vector<Item> picked;
  for (std::size_t s = 0; s < eligible.size(); ++s) {
    std::vector<std::size_t> items = by_subject[eligible[s]];
    std::shuffle(items.begin(), items.end(), gen);
    for (std::size_t k = 0; k < cfg.samples_per_subject; ++k)
      picked.push_back({items[k], s});
  }
  std::shuffle(picked.begin(), picked.end(), gen);

  Batch b;
  for (const auto& it : picked) {
    b.items.push_back(it.index);
    b.labels.push_back(it.label);
    b.subjects.push_back(eligible[it.label]);
  }
  return b;
}

std::size_t QuantileRank(double tau, std::size_t count) {
  Check(count > 0, ErrorCode::kUsage, "quantile of an empty list");
  Check(tau >= 0.0 && tau <= 1.0, ErrorCode::kUsage, "tau must be in [0, 1]");
  const double pos = tau * static_cast<double>(count - 1);
  return std::min(count - 1, static_cast<std::size_t>(std::floor(pos + 0.5)));
}

namespace {

double Cosine(const std::vector<float>& a, const std::vector<float>& b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += double(a[i]) * b[i];
    na += double(a[i]) * a[i];
    nb += double(b[i]) * b[i];
  }
  Check(na > 0.0 && nb > 0.0, ErrorCode::kNumeric, "degenerate embedding");
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

}  // namespace

std::vector<MinedTriplet> MineTriplets(
    std::span<const std::vector<float>> embeddings,
    std::span<const std::size_t> labels, double tau, double margin_alpha) {
  (void)margin_alpha;  // margin-satisfying candidates never override the quantile
  Check(embeddings.size() == labels.size(), ErrorCode::kUsage,
        "embedding and label counts differ");
  const std::size_t n = embeddings.size();
  std::vector<double> sim(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j)
      sim[i * n + j] = sim[j * n + i] = Cosine(embeddings[i], embeddings[j]);

  std::map<std::size_t, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < n; ++i) members[labels[i]].push_back(i);

  std::vector<MinedTriplet> out;
  for (const auto& [label, group] : members) {
    if (group.size() < 2) {
      DVX_LOG(kInfo) << "mining: label " << label
                     << " has a single sample in the batch; skipped";
      continue;
    }
    for (std::size_t a : group) {
      std::vector<std::size_t> cand;
      for (std::size_t j = 0; j < n; ++j)
        if (labels[j] != label) cand.push_back(j);
      if (cand.empty()) continue;
      std::sort(cand.begin(), cand.end(), [&](std::size_t x, std::size_t y) {
        const double sx = sim[a * n + x], sy = sim[a * n + y];
        return sx != sy ? sx < sy : x < y;
      });
      const std::size_t rank = QuantileRank(tau, cand.size());
      const std::size_t neg = cand[rank];
      for (std::size_t p : group) {
        if (p == a) continue;
        MinedTriplet t;
        t.anchor_idx = a;
        t.positive_idx = p;
        t.negative_idx = neg;
        t.difficulty = cand.size() > 1
                           ? static_cast<double>(rank) / double(cand.size() - 1)
                           : 0.0;
        t.neg_similarity = sim[a * n + neg];
        t.pos_similarity = sim[a * n + p];
        out.push_back(t);
      }
    }
  }
  return out;
}

MiningStats Summarize(std::span<const MinedTriplet> triplets,
                      double margin_alpha) {
  MiningStats s;
  s.triplets = triplets.size();
  if (triplets.empty()) return s;
  std::size_t ok = 0;
  for (const auto& t : triplets) {
    s.mean_neg_similarity += t.neg_similarity;
    s.mean_pos_similarity += t.pos_similarity;
    if (t.pos_similarity >= t.neg_similarity + margin_alpha) ++ok;
  }
  s.mean_neg_similarity /= double(triplets.size());
  s.mean_pos_similarity /= double(triplets.size());
  s.satisfied_fraction = double(ok) / double(triplets.size());
  return s;
}

std::vector<objective::TripletIndex> ToIndices(
    std::span<const MinedTriplet> triplets) {
  std::vector<objective::TripletIndex> out;
  out.reserve(triplets.size());
  for (const auto& t : triplets)
    out.push_back({t.anchor_idx, t.positive_idx, t.negative_idx});
  return out;
}

}  // namespace deepvox::mining
