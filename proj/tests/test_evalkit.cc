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
#include <fstream>
#include <limits>
#include <random>

#include "deepvox/common.h"
#include "deepvox/evalkit.h"
#include "test_util.h"

namespace deepvox::eval {
namespace {

const ScoreSet kFixture{{0.9, 0.8, 0.3}, {0.7, 0.2, 0.1}};

// Direct counting at every candidate threshold; accept when score >= t.
struct RefPoint {
  double t, fmr, fnmr;
};

std::vector<RefPoint> RefSweep(const ScoreSet& s) {
  std::vector<double> ts(s.genuine);
  ts.insert(ts.end(), s.impostor.begin(), s.impostor.end());
  ts.push_back(std::numeric_limits<double>::infinity());
  std::sort(ts.begin(), ts.end());
  ts.erase(std::unique(ts.begin(), ts.end()), ts.end());
  std::vector<RefPoint> out;
  for (double t : ts) {
    double fa = 0, miss = 0;
    for (double v : s.impostor) fa += v >= t;
    for (double v : s.genuine) miss += v < t;
    out.push_back({t, fa / double(s.impostor.size()), miss / double(s.genuine.size())});
  }
  return out;
}

// Crossing of the two error curves between consecutive thresholds.
double RefEer(const ScoreSet& s) {
  const auto p = RefSweep(s);
  for (std::size_t k = 0; k < p.size(); ++k) {
    const double d = p[k].fnmr - p[k].fmr;
    if (d < 0) continue;
    if (d == 0 || k == 0) return 100 * p[k].fmr;
    const double dl = p[k - 1].fnmr - p[k - 1].fmr;
    const double a = dl / (dl - d);
    return 100 * (p[k - 1].fmr + a * (p[k].fmr - p[k - 1].fmr));
  }
  return -1;
}

ScoreSet RandomScores(std::mt19937_64& gen, std::size_t ng, std::size_t ni, bool ties) {
  std::normal_distribution<double> g(0.4, 0.2), i(0.0, 0.2);
  auto q = [&](double v) { return ties ? std::round(v * 10) / 10 : v; };
  ScoreSet s;
  for (std::size_t k = 0; k < ng; ++k) s.genuine.push_back(q(g(gen)));
  for (std::size_t k = 0; k < ni; ++k) s.impostor.push_back(q(i(gen)));
  return s;
}

TEST_CASE("fixture equal error rate") {
  const auto e = ComputeEer(kFixture);
  CHECK(e.eer_pct == doctest::Approx(100.0 / 3).epsilon(1e-12));
  CHECK(e.threshold == doctest::Approx(0.7));
  CHECK(ComputeEer(kFixture, EerMode::kStep).eer_pct == doctest::Approx(100.0 / 3));
}

TEST_CASE("sweep counts errors at every distinct score") {
  const auto sweep = SweepThresholds(kFixture);
  const auto ref = RefSweep(kFixture);
  REQUIRE(sweep.size() == ref.size());
  for (std::size_t k = 0; k < ref.size(); ++k) {
    CHECK(sweep[k].threshold == ref[k].t);
    CHECK(sweep[k].p_fa == ref[k].fmr);
    CHECK(sweep[k].p_miss == ref[k].fnmr);
  }
  CHECK(sweep.front().p_fa == 1.0);
  CHECK(sweep.back().p_fa == 0.0);
  CHECK(sweep.back().p_miss == 1.0);
}

TEST_CASE("equal error rate agrees with direct enumeration") {
  std::mt19937_64 gen(1);
  for (int trial = 0; trial < 200; ++trial) {
    const auto s = RandomScores(gen, 1 + gen() % 40, 1 + gen() % 60, trial % 2 == 0);
    const double got = ComputeEer(s).eer_pct;
    CHECK(got == doctest::Approx(RefEer(s)).epsilon(1e-12));
    // Never worse than the best achievable max of the two error rates.
    double hi = 100;
    for (const auto& p : RefSweep(s)) hi = std::min(hi, 100 * std::max(p.fmr, p.fnmr));
    CHECK(got <= hi + 1e-9);
    CHECK(got >= 0.0);
  }
}

TEST_CASE("separable and reversed score sets") {
  const ScoreSet perfect{{0.9, 0.8}, {0.1, 0.2, 0.3}};
  CHECK(ComputeEer(perfect).eer_pct == 0.0);
  const ScoreSet reversed{{0.1, 0.2}, {0.8, 0.9}};
  CHECK(ComputeEer(reversed).eer_pct == doctest::Approx(100.0));
  CHECK_THROWS_AS(ComputeEer({{0.5}, {}}), Error);
  CHECK_THROWS_AS(ComputeEer({{}, {0.5}}), Error);
  CHECK_THROWS_AS(ComputeEer({{std::nan("")}, {0.5}}), Error);
}

TEST_CASE("true match rate at a false match rate") {
  CHECK(TmrAtFmr(kFixture, 1.0 / 3) == 1.0);  // threshold 0.3 admits one impostor
  const ScoreSet four{{0.9, 0.8, 0.3}, {0.7, 0.35, 0.2, 0.1}};
  CHECK(TmrAtFmr(four, 0.25) == doctest::Approx(2.0 / 3));
  CHECK(TmrAtFmr(kFixture, 1.0) == 1.0);
  CHECK_THROWS_AS(TmrAtFmr(kFixture, 0.1), Error);  // below 1 / 3 impostors
  std::mt19937_64 gen(2);
  const auto s = RandomScores(gen, 300, 500, false);
  for (double target : {0.01, 0.1}) {
    // Oracle: largest genuine acceptance with FMR <= target.
    double best = 0;
    for (const auto& p : RefSweep(s))
      if (p.fmr <= target) best = std::max(best, 1 - p.fnmr);
    CHECK(TmrAtFmr(s, target) == doctest::Approx(best));
  }
}

TEST_CASE("minimum detection cost") {
  const auto d = MinDcf(kFixture, 0.5);
  CHECK(d.raw == doctest::Approx(0.5 * (1.0 / 3)));
  CHECK(d.normalized == doctest::Approx(1.0 / 3));
  std::mt19937_64 gen(3);
  const auto s = RandomScores(gen, 50, 80, true);
  for (double pt : {0.001, 0.01, 0.3}) {
    double best = 1e9;
    for (const auto& p : RefSweep(s)) best = std::min(best, p.fnmr * pt + p.fmr * (1 - pt));
    const auto r = MinDcf(s, pt);
    CHECK(r.raw == doctest::Approx(best).epsilon(1e-12));
    CHECK(r.normalized == doctest::Approx(best / std::min(pt, 1 - pt)).epsilon(1e-12));
    CHECK(r.normalized <= 1.0 + 1e-12);
  }
  CHECK_THROWS_AS(MinDcf(kFixture, 0.0), Error);
  CHECK_THROWS_AS(MinDcf(kFixture, 0.5, -1.0), Error);
}

TEST_CASE("normal deviates") {
  CHECK(Probit(0.5) == doctest::Approx(0.0).scale(1.0));
  CHECK(Probit(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-12));
  CHECK(Probit(0.01) == doctest::Approx(-2.326347874040841).epsilon(1e-12));
  CHECK(Probit(0.0) == Probit(1e-9));
  CHECK(std::isfinite(Probit(1.0)));
  const auto det = DetPoints(kFixture);
  CHECK(det.size() == SweepThresholds(kFixture).size());
  for (const auto& p : det) CHECK(p.probit_fa == Probit(p.p_fa));
}

TEST_CASE("report formatting and parsing") {
  const auto r = Evaluate(kFixture);
  CHECK(r.tmr_at_fmr.count(0.01) == 0);  // 3 impostors cannot resolve 1 %
  CHECK(r.tmr_at_fmr.count(0.10) == 0);
  const auto kv = ParseReport(FormatReport(r));
  CHECK(kv.at("eer_pct") == "33.33");
  CHECK(kv.at("genuine_trials") == "3");
  CHECK(kv.at("impostor_trials") == "3");
  CHECK(kv.at("tmr_pct_at_fmr_1pct") == "infeasible");
  CHECK(std::stod(kv.at("eer_pct_full")) == r.eer.eer_pct);
  CHECK(kv.count("min_dcf_p0.01_norm") == 1);
  CHECK(kv.count("min_dcf_p0.001_norm") == 1);
  CHECK(std::stod(kv.at("mean_genuine_score")) == doctest::Approx(2.0 / 3));
  CHECK_THROWS_AS(ParseReport("junk line\n"), Error);

  std::mt19937_64 gen(4);
  const auto big = Evaluate(RandomScores(gen, 200, 400, false));
  const auto kv2 = ParseReport(FormatReport(big));
  CHECK(std::stod(kv2.at("tmr_pct_at_fmr_1pct")) ==
        doctest::Approx(100 * big.tmr_at_fmr.at(0.01)).epsilon(1e-4));
}

TEST_CASE("trial files round trip and reject malformed rows") {
  testing::TempDir dir("eval");
  const auto fixture = ReadTrials(std::string(DEEPVOX_TEST_DATA) + "/fixture_scores.csv", true);
  REQUIRE(fixture.size() == 6);
  CHECK(ComputeEer(SplitScores(fixture)).eer_pct == doctest::Approx(100.0 / 3));
  WriteTrials(dir / "t.csv", fixture, true);
  const auto back = ReadTrials(dir / "t.csv", true);
  REQUIRE(back.size() == 6);
  for (std::size_t i = 0; i < 6; ++i) {
    CHECK(back[i].enroll_id == fixture[i].enroll_id);
    CHECK(back[i].label == fixture[i].label);
    CHECK(back[i].score == fixture[i].score);
  }
  CHECK(ReadTrials(dir / "t.csv", false).size() == 6);

  auto write = [&](const std::string& body) {
    std::ofstream(dir / "bad.csv") << body;
    return dir / "bad.csv";
  };
  CHECK_THROWS_AS(ReadTrials(write("a,b,genuine\n"), true), Error);
  CHECK_THROWS_AS(ReadTrials(write("a,b,friend,0.5\n"), true), Error);
  CHECK_THROWS_AS(ReadTrials(write("a,b,genuine,abc\n"), true), Error);
  CHECK_THROWS_AS(ReadTrials(write("a,b,genuine,1.5\n"), true), Error);
  CHECK_THROWS_AS(ReadTrials(write("a,b\n"), false), Error);
  CHECK_THROWS_AS(ReadTrials(dir / "nope.csv", true), Error);
  try {
    ReadTrials(write("enroll_id,probe_id,label,score\na,b,genuine,0.5\nc,d,x,0.1\n"), true);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kData);
    CHECK(std::string(e.what()).find(":3:") != std::string::npos);
  }
}

TEST_CASE("cosine scoring of utterance embeddings") {
  CHECK(CosineScore(std::vector<float>{1, 0}, std::vector<float>{0, 2}) == 0.0);
  CHECK(CosineScore(std::vector<float>{1, 1}, std::vector<float>{2, 2}) == doctest::Approx(1.0));
  CHECK_THROWS_AS(CosineScore(std::vector<float>{0, 0}, std::vector<float>{1, 0}), Error);
  const std::vector<std::vector<float>> frames{{1, 2}, {3, 6}};
  CHECK(MeanEmbedding(frames) == std::vector<float>{2, 4});
  std::vector<Trial> trials{{"u1", "u2", Label::kGenuine, 0}, {"u1", "u3", Label::kImpostor, 0}};
  EmbeddingStore store{{"u1", {1, 0}}, {"u2", {1, 1}}};
  CHECK_THROWS_AS(ScoreTrials(trials, store), Error);
  store["u3"] = {-1, 0};
  ScoreTrials(trials, store);
  CHECK(trials[0].score == doctest::Approx(std::sqrt(0.5)));
  CHECK(trials[1].score == -1.0);
  CHECK(TrialUtterances(trials) == std::vector<std::string>{"u1", "u2", "u3"});
}

TEST_CASE("embedding utterances reports missing ids") {
  model::DeepVoxConfig d;
  d.layers = model::ParseLayers("1:4:5:1,4:40:3:2");
  model::EmbedConfig e;
  e.layers = model::ParseLayers("40:8:3:1");
  e.embedding_dim = 8;
  const model::SpeakerModel m(d, e);
  const auto p = m.Init<float>(1);
  std::mt19937_64 gen(5);
  FrameStore frames;
  frames["a"] = {testing::RandomFrame(gen), testing::RandomFrame(gen)};
  frames["b"] = {};
  const std::vector<std::string> ok{"a"};
  const auto emb = EmbedUtterances(m, p, frames, ok);
  const std::vector<std::vector<float>> each{model::EmbedFrame(m, p, frames["a"][0]),
                                             model::EmbedFrame(m, p, frames["a"][1])};
  CHECK(emb.at("a") == MeanEmbedding(each));
  const std::vector<std::string> bad{"a", "b", "c"};
  try {
    EmbedUtterances(m, p, frames, bad);
    FAIL("expected an error");
  } catch (const Error& err) {
    CHECK(std::string(err.what()).find(" b c") != std::string::npos);
  }
}

}  // namespace
}  // namespace deepvox::eval
