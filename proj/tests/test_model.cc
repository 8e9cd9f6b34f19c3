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
#include <numeric>
#include <random>

#include "deepvox/common.h"
#include "deepvox/model.h"
#include "test_util.h"

namespace deepvox::model {
namespace {

using nd::ConvSpec;
using nd::Graph;
using nd::Shape;
using nd::Tensor;
using nd::Var;
using testing::RandomFrame;

std::vector<float> Features(const SpeakerModel& m, const ParamList<float>& p,
                            const audio::SpeechFrame& f) {
  return ExtractFeatures(m, p, f);
}

// Impulse response of the bias-free, activation-free conv stack computed
// by direct convolution: out[o][p] for an impulse at input position p.
std::vector<double> CascadeImpulseResponse(const DeepVoxConfig& cfg,
                                           const ParamList<float>& params,
                                           std::size_t layers, std::size_t taps,
                                           std::size_t out_ch) {
  std::vector<double> h(out_ch * taps, 0.0);
  for (std::size_t p = 0; p < taps; ++p) {
    std::size_t len = taps;
    std::vector<std::vector<double>> x(1, std::vector<double>(len, 0.0));
    x[0][p] = 1.0;
    for (std::size_t l = 0; l < layers; ++l) {
      const ConvSpec& s = cfg.layers[l];
      const auto& w = params[2 * l].value;
      const std::size_t lout = len - (s.kernel_size - 1) * s.dilation;
      std::vector<std::vector<double>> y(s.out_channels, std::vector<double>(lout, 0.0));
      for (std::size_t o = 0; o < s.out_channels; ++o)
        for (std::size_t t = 0; t < lout; ++t)
          for (std::size_t c = 0; c < s.in_channels; ++c)
            for (std::size_t k = 0; k < s.kernel_size; ++k)
              y[o][t] += double(w[(o * s.in_channels + c) * s.kernel_size + k]) *
                         x[c][t + k * s.dilation];
      x = std::move(y);
      len = lout;
    }
    REQUIRE(len == 1);
    for (std::size_t o = 0; o < out_ch; ++o) h[o * taps + p] = x[o][0];
  }
  return h;
}

TEST_CASE("default architecture") {
  const auto m = SpeakerModel::Default();
  CHECK(m.deepvox().config().ReceptiveField() == 35);
  CHECK(FormatLayers(m.deepvox().config().layers) == "1:16:7:1,16:32:5:2,32:40:5:4,40:40:3:2");
  CHECK(FormatLayers(m.embed().config().layers) == "40:64:5:1,64:96:5:2,96:128:3:4");
  const auto p = m.Init<float>(1);
  CHECK(p.size() == m.ParamTensorCount());
  CHECK(p.front().name == "dvx.conv0.w");
  CHECK(p.back().name == "emb.fc.b");
  CHECK(p.back().value.shape() == Shape{128});
  std::mt19937_64 gen(1);
  const auto f = RandomFrame(gen);
  CHECK(Features(m, p, f).size() == 40 * 200);
  CHECK(EmbedFrame(m, p, f).size() == 128);
}

TEST_CASE("init is deterministic per seed and biases start at zero") {
  const auto m = SpeakerModel::Default();
  const auto a = m.Init<float>(3), b = m.Init<float>(3), c = m.Init<float>(4);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].value == b[i].value);
  CHECK(!(a[0].value == c[0].value));
  for (const auto& t : a)
    if (t.name.ends_with(".b"))
      for (float v : t.value.values()) CHECK(v == 0.0f);
}

TEST_CASE("layer lists parse, format and reject junk") {
  const auto l = ParseLayers("1:8:3:1,8:40:3:2");
  REQUIRE(l.size() == 2);
  CHECK(l[1].in_channels == 8);
  CHECK(l[1].out_channels == 40);
  CHECK(l[1].kernel_size == 3);
  CHECK(l[1].dilation == 2);
  CHECK(FormatLayers(l) == "1:8:3:1,8:40:3:2");
  for (const char* bad : {"", "1:8:3", "1:8:3:0", "1:x:3:1", "1:8:3:1:1", "1:8:-3:1"})
    CHECK_THROWS_AS(ParseLayers(bad), Error);
}

TEST_CASE("configs reject broken chains") {
  DeepVoxConfig d = DeepVoxConfig::Default();
  d.layers.back().out_channels = 39;
  CHECK_THROWS_AS(d.Validate(), Error);
  d = DeepVoxConfig::Default();
  d.layers[1].in_channels = 15;
  CHECK_THROWS_AS(d.Validate(), Error);
  d = DeepVoxConfig::Default();
  d.unit_length = 30;  // shorter than the receptive field
  CHECK_THROWS_AS(d.Validate(), Error);
  EmbedConfig e = EmbedConfig::Default();
  e.dropout_p = 1.0;
  CHECK_THROWS_AS(e.Validate(), Error);
  e = EmbedConfig::Default();
  e.layers.front().in_channels = 41;
  CHECK_THROWS_AS(e.Validate(), Error);
}

TEST_CASE("each feature column depends only on its own unit") {
  const auto m = SpeakerModel::Default();
  const auto p = m.Init<float>(5);
  std::mt19937_64 gen(2);
  auto f = RandomFrame(gen);
  const auto base = Features(m, p, f);
  const std::size_t unit = 57;
  for (std::size_t k = 0; k < audio::kUnitLength; ++k) f.values[unit * 160 + k] += 0.2;
  const auto moved = Features(m, p, f);
  std::size_t changed = 0;
  for (std::size_t c = 0; c < 40; ++c)
    for (std::size_t u = 0; u < 200; ++u) {
      const bool diff = base[c * 200 + u] != moved[c * 200 + u];
      if (u != unit) CHECK_FALSE(diff);
      changed += diff;
    }
  CHECK(changed > 30);
}

TEST_CASE("permuting units permutes feature columns") {
  const auto m = SpeakerModel::Default();
  const auto p = m.Init<float>(6);
  std::mt19937_64 gen(3);
  const auto f = RandomFrame(gen);
  std::vector<std::size_t> perm(200);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), gen);
  audio::SpeechFrame g = f;
  for (std::size_t u = 0; u < 200; ++u)
    std::copy_n(f.values.begin() + perm[u] * 160, 160, g.values.begin() + u * 160);
  const auto a = Features(m, p, f), b = Features(m, p, g);
  for (std::size_t c = 0; c < 40; ++c)
    for (std::size_t u = 0; u < 200; ++u)
      REQUIRE(b[c * 200 + u] == doctest::Approx(a[c * 200 + perm[u]]).epsilon(1e-5));
}

TEST_CASE("embedding dropout is seeded and inactive at inference") {
  const auto m = SpeakerModel::Default();
  const auto p = m.Init<double>(7);
  std::mt19937_64 gen(4);
  const auto x = FrameTensor<double>(RandomFrame(gen));
  auto embed = [&](bool training, std::uint64_t seed) {
    Graph<double> g;
    const auto vars = BindParams(g, p, false);
    return g.value(m.Embed(g, g.Input(x), vars, training, seed)).storage();
  };
  CHECK(embed(true, 1) == embed(true, 1));
  CHECK(embed(true, 1) != embed(true, 2));
  CHECK(embed(false, 1) == embed(false, 2));
  CHECK(embed(true, 1) != embed(false, 1));
}

TEST_CASE("model files round trip and reject mismatches") {
  testing::TempDir dir("model");
  DeepVoxConfig d;
  d.layers = ParseLayers("1:4:5:1,4:40:3:2");
  EmbedConfig e;
  e.layers = ParseLayers("40:8:3:1");
  e.dropout_p = 0.1;
  e.embedding_dim = 16;
  const SpeakerModel m(d, e);
  const auto p = m.Init<float>(9);
  SaveModel(dir / "m.dvck", m, p, {{"note", "x"}});
  const auto loaded = LoadModel(dir / "m.dvck");
  CHECK(loaded.model.Describe() == m.Describe());
  REQUIRE(loaded.params.size() == p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    CHECK(loaded.params[i].name == p[i].name);
    CHECK(loaded.params[i].value == p[i].value);
  }
  std::mt19937_64 gen(5);
  const auto f = RandomFrame(gen);
  CHECK(EmbedFrame(loaded.model, loaded.params, f) == EmbedFrame(m, p, f));

  io::CheckpointRecord rec;
  rec.blocks = ToBlocks(p);
  rec.blocks.pop_back();
  CHECK_THROWS_AS(FromBlocks(rec, p), Error);
  rec.blocks = ToBlocks(p);
  rec.blocks[0].dims = {4, 1, 4};
  rec.blocks[0].data.resize(16);
  CHECK_THROWS_AS(FromBlocks(rec, p), Error);
  CHECK_THROWS_AS(LoadModel(dir / "missing.dvck"), Error);
}

TEST_CASE("effective filterbank matches a direct cascade of convolutions") {
  const auto cfg = DeepVoxConfig::Default();
  const auto p = DeepVoxNet(cfg).Init<float>(11);
  for (std::size_t layers = 1; layers <= cfg.layers.size(); ++layers) {
    const Kernel k = EffectiveFilterbank(cfg, p, layers);
    std::size_t taps = 1;
    for (std::size_t l = 0; l < layers; ++l)
      taps += (cfg.layers[l].kernel_size - 1) * cfg.layers[l].dilation;
    REQUIRE(k.taps == taps);
    REQUIRE(k.in == 1);
    const auto want = CascadeImpulseResponse(cfg, p, layers, taps, k.out);
    double scale = 0.0, err = 0.0;
    for (std::size_t i = 0; i < want.size(); ++i) {
      scale = std::max(scale, std::abs(want[i]));
      err = std::max(err, std::abs(want[i] - k.w[i]));
    }
    CHECK(err <= 1e-10 * scale);
  }
  CHECK_THROWS_AS(EffectiveFilterbank(cfg, p, 0), Error);
  CHECK_THROWS_AS(EffectiveFilterbank(cfg, p, 5), Error);
}

TEST_CASE("two-tap averaging kernel has a cosine magnitude response") {
  DeepVoxConfig cfg;
  cfg.layers = {{1, 40, 2, 1}};
  ParamList<float> p = DeepVoxNet(cfg).Init<float>(1);
  p[0].value.Fill(0.5f);
  const std::size_t nfft = 256;
  const auto mag = LayerFrequencyResponse(cfg, p, 0, nfft);
  REQUIRE(mag.size() == nfft / 2 + 1);
  for (std::size_t b = 0; b < mag.size(); ++b)
    CHECK(mag[b] / 40.0 ==
          doctest::Approx(std::abs(std::cos(M_PI * double(b) / double(nfft)))).epsilon(1e-12));
  CHECK_THROWS_AS(MagnitudeResponse(EffectiveFilterbank(cfg, p), 1), Error);
}

TEST_CASE("impulse probing agrees with the composed filterbank in the linear regime") {
  const auto cfg = DeepVoxConfig::Default();
  auto pf = DeepVoxNet(cfg).Init<float>(12);
  for (auto& t : pf)
    for (auto& v : t.value.values()) v = std::abs(v);  // keeps every SELU input positive
  const Kernel probed = ProbeFilterbank(cfg, CastParams<double>(pf));
  const Kernel composed = EffectiveFilterbank(cfg, pf);
  REQUIRE(probed.w.size() == composed.w.size());
  double scale = 0.0, err = 0.0;
  for (std::size_t i = 0; i < probed.w.size(); ++i) {
    scale = std::max(scale, std::abs(composed.w[i]));
    err = std::max(err, std::abs(probed.w[i] - composed.w[i]));
  }
  CHECK(err <= 1e-9 * scale);
}

}  // namespace
}  // namespace deepvox::model
