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

// Two-phase training: identification pretraining with a temporary softmax
// head, then verification training with curriculum triplet mining.
//
// Verification batches are processed in two passes so memory stays at one
// frame graph per worker: pass 1 embeds every batch frame (dropout active),
// mining and the loss run on those embeddings, and pass 2 rebuilds each
// frame's graph with the same dropout masks and backpropagates its row of
// d loss / d embeddings. Per-frame gradients are summed in batch order, so
// results do not depend on the thread count.

#ifndef DEEPVOX_TRAINER_H_
#define DEEPVOX_TRAINER_H_

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "deepvox/audio.h"
#include "deepvox/container.h"
#include "deepvox/mining.h"
#include "deepvox/model.h"
#include "deepvox/objective.h"

namespace deepvox::train {

enum class OptimizerKind { kAdam, kSgdMomentum };

OptimizerKind ParseOptimizer(const std::string& name);
std::string OptimizerName(OptimizerKind kind);

struct TrainConfig {
  std::size_t pretrain_epochs = 50;
  std::size_t verify_epochs = 800;
  double scale = 1.0;  // multiplies both epoch counts and the tau ramp

  OptimizerKind optimizer = OptimizerKind::kAdam;
  double learning_rate = 1e-3;
  double momentum = 0.9;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;

  std::size_t pretrain_batch = 8;     // frames per identification step
  std::size_t batches_per_epoch = 1;  // mined batches per verification epoch

  mining::MiningConfig mining;
  objective::TripletLossConfig loss;

  std::uint64_t seed = 7;
  std::string out_dir;                // logs, checkpoints and models
  std::size_t checkpoint_every = 0;   // epochs; 0 writes only phase ends
  std::string resume_from;            // checkpoint path

  void Validate() const;
  std::size_t ScaledPretrainEpochs() const;
  std::size_t ScaledVerifyEpochs() const;
  // Mining config with the tau ramp scaled like the epoch counts.
  mining::MiningConfig ScaledMining() const;
};

// round(epochs * scale), at least 1 unless scale is 0.
std::size_t ScaleEpochs(std::size_t epochs, double scale);

struct EpochRecord {
  std::string phase;  // "id" or "ver"
  std::size_t epoch = 0;
  double loss = 0.0;
  double tau = 0.0;           // ver only
  double mean_neg_sim = 0.0;  // ver only
  double mean_pos_sim = 0.0;  // ver only
  double accuracy = 0.0;      // id only
  std::size_t triplets = 0;   // ver only
};

std::string FormatLogLine(const EpochRecord& r);
EpochRecord ParseLogLine(const std::string& line);

struct TrainResult {
  model::ParamList<float> pretrained;  // after identification pretraining
  model::ParamList<float> params;      // final
  std::vector<EpochRecord> log;        // epochs run by this call
};

class Optimizer {
 public:
  Optimizer(const TrainConfig& cfg, const model::ParamList<float>& params);

  // params -= step(grads). grads align with params.
  void Step(model::ParamList<float>& params,
            const std::vector<nd::Tensor<float>>& grads);

  std::uint64_t steps() const { return t_; }
  void Save(io::CheckpointRecord& rec) const;
  void Load(const io::CheckpointRecord& rec, const model::ParamList<float>& params);

 private:
  TrainConfig cfg_;
  std::vector<std::string> names_;
  std::vector<nd::Tensor<float>> m_, v_;
  std::uint64_t t_ = 0;
};

class Trainer {
 public:
  Trainer(model::SpeakerModel model, TrainConfig config);

  // Frames carry their subject in source_id. `on_epoch` sees every record
  // as soon as it is logged.
  TrainResult Run(std::span<const audio::SpeechFrame> frames,
                  const std::function<void(const EpochRecord&)>& on_epoch = {});

  std::string LogPath() const;
  std::string CheckpointPath(const std::string& phase, std::size_t epoch) const;
  std::string PretrainModelPath() const;
  std::string FinalModelPath() const;

 private:
  model::SpeakerModel model_;
  TrainConfig cfg_;
};

}  // namespace deepvox::train

#endif  // DEEPVOX_TRAINER_H_
