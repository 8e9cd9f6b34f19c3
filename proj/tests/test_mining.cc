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

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>

#include "deepvox/common.h"
#include "deepvox/mining.h"

namespace deepvox::mining {
namespace {

TEST_CASE("tau schedule ramps linearly then holds") {
  MiningConfig cfg;
  cfg.tau_start = 0.4;
  cfg.tau_end = 1.0;
  cfg.ramp_epochs = 800;
  CHECK(TauSchedule(0, cfg) == doctest::Approx(0.4));
  CHECK(TauSchedule(400, cfg) == doctest::Approx(0.7));
  CHECK(TauSchedule(800, cfg) == doctest::Approx(1.0));
  CHECK(TauSchedule(5000, cfg) == doctest::Approx(1.0));
  double prev = -1.0;
  for (std::size_t e = 0; e < 900; e += 7) {
    CHECK(TauSchedule(e, cfg) >= prev);
    prev = TauSchedule(e, cfg);
  }
  cfg.ramp_epochs = 0;
  CHECK(TauSchedule(0, cfg) == 1.0);
}

TEST_CASE("quantile rank rounds halves up and clamps") {
  CHECK(QuantileRank(0.0, 10) == 0);
  CHECK(QuantileRank(1.0, 10) == 9);
  CHECK(QuantileRank(0.5, 10) == 5);  // 4.5 rounds up
  CHECK(QuantileRank(0.5, 9) == 4);
  CHECK(QuantileRank(0.4, 11) == 4);
  CHECK(QuantileRank(0.7, 1) == 0);
  CHECK_THROWS_AS(QuantileRank(0.5, 0), Error);
  CHECK_THROWS_AS(QuantileRank(1.5, 3), Error);
}

std::vector<std::vector<float>> RandomEmbeddings(std::size_t n, std::size_t d,
                                                 std::mt19937_64& gen) {
  std::normal_distribution<float> nd(0.0f, 1.0f);
  std::vector<std::vector<float>> e(n, std::vector<float>(d));
  for (auto& v : e)
    for (auto& x : v) x = nd(gen);
  return e;
}

double RefCos(const std::vector<float>& a, const std::vector<float>& b) {
  double d = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    d += double(a[i]) * b[i];
    na += double(a[i]) * a[i];
    nb += double(b[i]) * b[i];
  }
  return d / std::sqrt(na * nb);
}

TEST_CASE("mined negatives match a brute-force sort") {
  std::mt19937_64 gen(1);
  const auto emb = RandomEmbeddings(18, 6, gen);
  std::vector<std::size_t> labels;
  for (std::size_t i = 0; i < 18; ++i) labels.push_back(i % 4);
  labels[17] = 9;  // singleton label: anchors skipped, still a candidate
  for (double tau : {0.0, 0.3, 0.5, 0.85, 1.0}) {
    const auto got = MineTriplets(emb, labels, tau, 0.2);
    std::size_t expected = 0;
    std::vector<MinedTriplet> want;
    for (std::size_t a = 0; a < 18; ++a) {
      std::vector<std::pair<double, std::size_t>> neg;
      for (std::size_t j = 0; j < 18; ++j)
        if (labels[j] != labels[a]) neg.emplace_back(RefCos(emb[a], emb[j]), j);
      std::sort(neg.begin(), neg.end());
      const std::size_t m = neg.size();
      const auto rank = std::size_t(std::floor(tau * double(m - 1) + 0.5));
      for (std::size_t p = 0; p < 18; ++p)
        if (p != a && labels[p] == labels[a]) {
          MinedTriplet t;
          t.anchor_idx = a;
          t.positive_idx = p;
          t.negative_idx = neg[rank].second;
          want.push_back(t);
          ++expected;
        }
    }
    REQUIRE(got.size() == expected);
    auto key = [](const MinedTriplet& t) {
      return std::tuple(t.anchor_idx, t.positive_idx, t.negative_idx);
    };
    std::set<std::tuple<std::size_t, std::size_t, std::size_t>> a, b;
    for (const auto& t : got) a.insert(key(t));
    for (const auto& t : want) b.insert(key(t));
    CHECK(a == b);
    for (const auto& t : got) {
      CHECK(t.neg_similarity == doctest::Approx(RefCos(emb[t.anchor_idx], emb[t.negative_idx])));
      CHECK(t.pos_similarity == doctest::Approx(RefCos(emb[t.anchor_idx], emb[t.positive_idx])));
    }
  }
}

TEST_CASE("harder tau never picks a less similar negative") {
  std::mt19937_64 gen(2);
  const auto emb = RandomEmbeddings(24, 8, gen);
  std::vector<std::size_t> labels;
  for (std::size_t i = 0; i < 24; ++i) labels.push_back(i / 4);
  std::vector<double> means;
  std::vector<MinedTriplet> prev;
  for (double tau = 0.0; tau <= 1.0001; tau += 0.1) {
    const auto cur = MineTriplets(emb, labels, std::min(tau, 1.0), 0.2);
    if (!prev.empty())
      for (std::size_t i = 0; i < cur.size(); ++i)
        CHECK(cur[i].neg_similarity >= prev[i].neg_similarity);
    means.push_back(Summarize(cur, 0.2).mean_neg_similarity);
    prev = cur;
  }
  CHECK(means.back() > means.front());
}

TEST_CASE("summaries and index conversion") {
  std::vector<MinedTriplet> t(3);
  t[0].pos_similarity = 0.9;
  t[0].neg_similarity = 0.1;
  t[1].pos_similarity = 0.5;
  t[1].neg_similarity = 0.4;
  t[2].pos_similarity = 0.2;
  t[2].neg_similarity = 0.6;
  t[2].anchor_idx = 4;
  t[2].positive_idx = 5;
  t[2].negative_idx = 6;
  const auto s = Summarize(t, 0.2);
  CHECK(s.triplets == 3);
  CHECK(s.mean_pos_similarity == doctest::Approx(1.6 / 3));
  CHECK(s.mean_neg_similarity == doctest::Approx(1.1 / 3));
  CHECK(s.satisfied_fraction == doctest::Approx(1.0 / 3));
  CHECK(Summarize({}, 0.2).triplets == 0);
  const auto idx = ToIndices(t);
  CHECK(idx[2].anchor == 4);
  CHECK(idx[2].positive == 5);
  CHECK(idx[2].negative == 6);
}

TEST_CASE("batches have the requested composition") {
  std::vector<std::string> pool;
  for (int s = 0; s < 8; ++s)
    for (int k = 0; k < 5 + s; ++k) pool.push_back("spk" + std::to_string(s));
  MiningConfig cfg;
  cfg.subjects_per_batch = 5;
  cfg.samples_per_subject = 4;
  const auto b = BuildBatch(pool, cfg, 3);
  REQUIRE(b.items.size() == 20);
  std::map<std::size_t, std::set<std::size_t>> by_label;
  std::map<std::size_t, std::string> names;
  for (std::size_t i = 0; i < b.items.size(); ++i) {
    CHECK(pool[b.items[i]] == b.subjects[i]);
    by_label[b.labels[i]].insert(b.items[i]);
    if (names.count(b.labels[i])) CHECK(names[b.labels[i]] == b.subjects[i]);
    names[b.labels[i]] = b.subjects[i];
  }
  CHECK(by_label.size() == 5);
  for (const auto& [l, items] : by_label) CHECK(items.size() == 4);  // no repeats
  const auto again = BuildBatch(pool, cfg, 3);
  CHECK(again.items == b.items);
  CHECK(BuildBatch(pool, cfg, 4).items != b.items);
}

TEST_CASE("batches report deficient subjects") {
  std::vector<std::string> pool{"a", "a", "a", "b", "b", "c", "c", "c"};
  MiningConfig cfg;
  cfg.subjects_per_batch = 3;
  cfg.samples_per_subject = 3;
  try {
    BuildBatch(pool, cfg, 1);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kData);
    CHECK(std::string(e.what()).find("b(2)") != std::string::npos);
  }
  cfg.samples_per_subject = 1;
  CHECK_THROWS_AS(BuildBatch(pool, cfg, 1), Error);
}

}  // namespace
}  // namespace deepvox::mining
