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
#include <filesystem>
#include <fstream>
#include <random>

#include "deepvox/common.h"
#include "deepvox/container.h"
#include "deepvox/trainer.h"
#include "test_util.h"

namespace deepvox::train {
namespace {

using model::ParamList;
using nd::Shape;
using nd::Tensor;

TEST_CASE("epoch scaling") {
  CHECK(ScaleEpochs(800, 1.0) == 800);
  CHECK(ScaleEpochs(800, 0.05) == 40);
  CHECK(ScaleEpochs(50, 0.05) == 3);  // 2.5 rounds away from zero
  CHECK(ScaleEpochs(50, 0.001) == 1);
  CHECK(ScaleEpochs(50, 0.0) == 0);
  CHECK(ScaleEpochs(0, 0.5) == 0);
  TrainConfig cfg;
  cfg.scale = 0.05;
  CHECK(cfg.ScaledPretrainEpochs() == 3);
  CHECK(cfg.ScaledVerifyEpochs() == 40);
  CHECK(cfg.ScaledMining().ramp_epochs == 40);
  cfg.loss.margin_alpha = 0.35;
  CHECK(cfg.ScaledMining().margin_alpha == 0.35);
  cfg.scale = 1.5;
  CHECK_THROWS_AS(cfg.Validate(), Error);
}

TEST_CASE("log lines round trip") {
  EpochRecord v;
  v.phase = "ver";
  v.epoch = 12;
  v.loss = 0.123456789012345;
  v.tau = 0.43;
  v.mean_neg_sim = -0.25;
  v.mean_pos_sim = 0.8;
  v.triplets = 750;
  const std::string line = FormatLogLine(v);
  CHECK(line.rfind("epoch=12 phase=ver loss=", 0) == 0);
  const auto back = ParseLogLine(line);
  CHECK(back.loss == v.loss);
  CHECK(back.tau == v.tau);
  CHECK(back.mean_neg_sim == v.mean_neg_sim);
  CHECK(back.mean_pos_sim == v.mean_pos_sim);
  CHECK(back.triplets == 750);

  EpochRecord id;
  id.phase = "id";
  id.epoch = 0;
  id.loss = 2.5;
  id.accuracy = 0.25;
  const std::string idl = FormatLogLine(id);
  CHECK(idl.find("tau=na") != std::string::npos);
  CHECK(ParseLogLine(idl).accuracy == 0.25);
  CHECK_THROWS_AS(ParseLogLine("epoch=1 loss"), Error);
  CHECK_THROWS_AS(ParseLogLine("epoch=1 loss=2"), Error);
}

TEST_CASE("optimizer names") {
  CHECK(ParseOptimizer("adam") == OptimizerKind::kAdam);
  CHECK(ParseOptimizer("sgd_momentum") == OptimizerKind::kSgdMomentum);
  CHECK(OptimizerName(OptimizerKind::kSgdMomentum) == "sgd_momentum");
  CHECK_THROWS_AS(ParseOptimizer("rmsprop"), Error);
}

ParamList<float> OneParam(std::vector<float> v) {
  const std::size_t n = v.size();
  return {{"w", Tensor<float>(Shape{n}, std::move(v))}};
}

TEST_CASE("adam steps match the textbook update") {
  TrainConfig cfg;
  cfg.learning_rate = 0.01;
  auto p = OneParam({1.0f, -2.0f, 0.5f});
  Optimizer opt(cfg, p);
  std::vector<double> ref(p[0].value.storage().begin(), p[0].value.storage().end());
  std::vector<double> m(3, 0.0), v(3, 0.0);
  const std::vector<std::vector<float>> grads{{0.5f, -1.0f, 0.0f}, {0.1f, 2.0f, -0.3f}};
  for (std::size_t t = 1; t <= grads.size(); ++t) {
    opt.Step(p, {Tensor<float>(Shape{3}, grads[t - 1])});
    for (std::size_t i = 0; i < 3; ++i) {
      const double g = grads[t - 1][i];
      m[i] = 0.9 * m[i] + 0.1 * g;
      v[i] = 0.999 * v[i] + 0.001 * g * g;
      const double mh = m[i] / (1 - std::pow(0.9, t));
      const double vh = v[i] / (1 - std::pow(0.999, t));
      ref[i] -= 0.01 * mh / (std::sqrt(vh) + 1e-8);
      CHECK(p[0].value[i] == doctest::Approx(ref[i]).epsilon(1e-6));
    }
  }
  CHECK(opt.steps() == 2);
  // The first Adam step moves every coordinate with a nonzero gradient by lr.
  auto q = OneParam({0.0f});
  Optimizer fresh(cfg, q);
  fresh.Step(q, {Tensor<float>(Shape{1}, std::vector<float>{123.0f})});
  CHECK(q[0].value[0] == doctest::Approx(-0.01).epsilon(1e-5));
}

TEST_CASE("sgd momentum steps") {
  TrainConfig cfg;
  cfg.optimizer = OptimizerKind::kSgdMomentum;
  cfg.learning_rate = 0.1;
  cfg.momentum = 0.5;
  auto p = OneParam({1.0f});
  Optimizer opt(cfg, p);
  opt.Step(p, {Tensor<float>(Shape{1}, std::vector<float>{1.0f})});
  CHECK(p[0].value[0] == doctest::Approx(0.9));
  opt.Step(p, {Tensor<float>(Shape{1}, std::vector<float>{1.0f})});
  CHECK(p[0].value[0] == doctest::Approx(0.9 - 0.1 * 1.5));
}

TEST_CASE("optimizer state survives a checkpoint") {
  TrainConfig cfg;
  auto p = OneParam({1.0f, 2.0f});
  Optimizer a(cfg, p);
  a.Step(p, {Tensor<float>(Shape{2}, std::vector<float>{0.3f, -0.7f})});
  io::CheckpointRecord rec;
  a.Save(rec);
  Optimizer b(cfg, p);
  b.Load(rec, p);
  auto pa = p, pb = p;
  const Tensor<float> g(Shape{2}, std::vector<float>{-0.2f, 0.4f});
  a.Step(pa, {g});
  b.Step(pb, {g});
  CHECK(pa[0].value == pb[0].value);
  TrainConfig sgd = cfg;
  sgd.optimizer = OptimizerKind::kSgdMomentum;
  Optimizer c(sgd, p);
  CHECK_THROWS_AS(c.Load(rec, p), Error);
}

// Four subjects whose frames share a subject-specific tone plus noise.
std::vector<audio::SpeechFrame> ToyFrames() {
  std::mt19937_64 gen(1);
  std::normal_distribution<double> noise(0.0, 0.05);
  std::vector<audio::SpeechFrame> frames;
  for (int s = 0; s < 4; ++s)
    for (int k = 0; k < 4; ++k) {
      audio::SpeechFrame f;
      f.source_id = "s" + std::to_string(s);
      f.clip_id = f.source_id + "_" + std::to_string(k);
      f.values.resize(audio::kUnitLength * audio::kUnitsPerFrame);
      for (std::size_t i = 0; i < f.values.size(); ++i)
        f.values[i] = 0.3 * std::sin(0.2 * (s + 1) * double(i % 160)) + noise(gen);
      frames.push_back(std::move(f));
    }
  return frames;
}

model::SpeakerModel ToyModel() {
  model::DeepVoxConfig d;
  d.layers = model::ParseLayers("1:4:5:1,4:40:3:2");
  model::EmbedConfig e;
  e.layers = model::ParseLayers("40:8:3:1");
  e.embedding_dim = 8;
  return model::SpeakerModel(d, e);
}

TrainConfig ToyConfig(const std::string& out) {
  TrainConfig cfg;
  cfg.pretrain_epochs = 2;
  cfg.verify_epochs = 4;
  cfg.mining.subjects_per_batch = 3;
  cfg.mining.samples_per_subject = 3;
  cfg.mining.ramp_epochs = 4;
  cfg.checkpoint_every = 2;
  cfg.out_dir = out;
  return cfg;
}

std::string Slurp(const std::string& path) {
  std::ifstream in(path);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

void CheckSameParams(const ParamList<float>& a, const ParamList<float>& b) {
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].value == b[i].value);
}

TEST_CASE("training is deterministic, thread independent and resumable") {
  namespace fs = std::filesystem;
  testing::TempDir dir("trainer");
  const auto frames = ToyFrames();

  SetThreadCount(1);
  Trainer t1(ToyModel(), ToyConfig(dir / "a"));
  const auto a = t1.Run(frames);
  REQUIRE(a.log.size() == 6);
  CHECK(a.log[0].phase == "id");
  CHECK(a.log[2].phase == "ver");
  CHECK(a.log[2].tau == doctest::Approx(0.4));
  CHECK(a.log[5].tau == doctest::Approx(0.85));
  CHECK(a.log[2].triplets == 3 * 3 * 2);
  for (const char* f : {"train.log", "model.dvck", "model_pretrain.dvck",
                        "checkpoints/ckpt_id_0002.dvck", "checkpoints/ckpt_ver_0002.dvck",
                        "checkpoints/ckpt_ver_0004.dvck"})
    CHECK_MESSAGE(fs::exists(dir.path() / "a" / f), f);
  {
    std::ifstream log(dir / "a/train.log");
    std::string first;
    std::getline(log, first);
    CHECK(ParseLogLine(first).phase == "id");
  }

  SetThreadCount(3);
  Trainer t2(ToyModel(), ToyConfig(dir / "b"));
  const auto b = t2.Run(frames);
  CHECK(Slurp(dir / "a/train.log") == Slurp(dir / "b/train.log"));
  CheckSameParams(a.params, b.params);
  CheckSameParams(a.pretrained, b.pretrained);

  SetThreadCount(1);
  auto rc = ToyConfig(dir / "c");
  rc.resume_from = dir / "a/checkpoints/ckpt_ver_0002.dvck";
  Trainer t3(ToyModel(), rc);
  const auto c = t3.Run(frames);
  REQUIRE(c.log.size() == 2);
  CHECK(FormatLogLine(c.log[0]) == FormatLogLine(a.log[4]));
  CHECK(FormatLogLine(c.log[1]) == FormatLogLine(a.log[5]));
  CheckSameParams(a.params, c.params);

  auto wrong = rc;
  wrong.seed = 8;
  CHECK_THROWS_AS(Trainer(ToyModel(), wrong).Run(frames), Error);
  SetThreadCount(0);
}

TEST_CASE("training rejects unusable data") {
  Trainer t(ToyModel(), ToyConfig(""));
  CHECK_THROWS_AS(t.Run({}), Error);
  auto frames = ToyFrames();
  frames.resize(2);  // one subject with two frames
  CHECK_THROWS_AS(t.Run(frames), Error);
}

}  // namespace
}  // namespace deepvox::train
