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

// The two networks: the per-unit DeepVOX filterbank (160 samples -> 40
// responses) and the 1D-Triplet-CNN embedding over the unit axis
// (40 x 200 -> 128). Parameters live outside the networks in a ParamList so
// the same definitions serve float training and double gradient checks.

#ifndef DEEPVOX_MODEL_H_
#define DEEPVOX_MODEL_H_

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "deepvox/audio.h"
#include "deepvox/autodiff.h"
#include "deepvox/container.h"
#include "deepvox/tensor.h"

namespace deepvox::model {

template <typename T>
struct NamedTensor {
  std::string name;
  nd::Tensor<T> value;
};

template <typename T>
using ParamList = std::vector<NamedTensor<T>>;

template <typename T>
std::size_t ScalarCount(const ParamList<T>& params) {
  std::size_t n = 0;
  for (const auto& p : params) n += p.value.size();
  return n;
}

template <typename U, typename T>
ParamList<U> CastParams(const ParamList<T>& params) {
  ParamList<U> out;
  for (const auto& p : params) out.push_back({p.name, p.value.template Cast<U>()});
  return out;
}

// Registers every parameter as a gradient-carrying graph input.
template <typename T>
std::vector<nd::Var> BindParams(nd::Graph<T>& g, const ParamList<T>& params,
                                bool requires_grad = true) {
  std::vector<nd::Var> vars;
  vars.reserve(params.size());
  for (const auto& p : params) vars.push_back(g.Input(p.value, requires_grad));
  return vars;
}

// "in:out:kernel:dilation" per layer, comma separated. Stride is always 1.
std::string FormatLayers(const std::vector<nd::ConvSpec>& layers);
std::vector<nd::ConvSpec> ParseLayers(const std::string& text);

// ---------------------------------------------------------------------------
// DeepVOX

struct DeepVoxConfig {
  std::vector<nd::ConvSpec> layers;
  std::size_t unit_length = audio::kUnitLength;

  // 1 -> 16 -> 32 -> 40 -> 40, kernels {7, 5, 5, 3}, dilations {1, 2, 4, 2}.
  static DeepVoxConfig Default();
  std::size_t output_channels() const { return layers.back().out_channels; }
  std::size_t ReceptiveField() const;
  // Throws kUsage unless the stack maps [1, unit_length] to 40 channels.
  void Validate() const;
};

class DeepVoxNet {
 public:
  static constexpr std::size_t kFeatures = 40;

  explicit DeepVoxNet(DeepVoxConfig config);
  const DeepVoxConfig& config() const { return config_; }

  // dvx.conv<i>.w [out, in, k] and dvx.conv<i>.b [out]; LeCun normal weights,
  // zero biases.
  template <typename T>
  ParamList<T> Init(std::uint64_t seed) const;
  std::size_t ParamTensorCount() const;

  // units: [N, 1, unit_length]. params: the Init() layout, bound in order.
  // Returns [N, 40] after the final average pool, or the unpooled
  // [N, 40, L_last] when pool is false.
  template <typename T>
  nd::Var Forward(nd::Graph<T>& g, nd::Var units,
                  std::span<const nd::Var> params, bool pool = true) const;

 private:
  DeepVoxConfig config_;
};

// ---------------------------------------------------------------------------
// Embedding network

struct EmbedConfig {
  std::vector<nd::ConvSpec> layers;
  double dropout_p = 0.05;
  std::size_t embedding_dim = 128;

  // 40 -> 64 -> 96 -> 128, kernels {5, 5, 3}, dilations {1, 2, 4}.
  static EmbedConfig Default();
  // Throws kUsage unless the stack accepts 40 channels and `steps` steps.
  void Validate(std::size_t steps = audio::kUnitsPerFrame) const;
};

class EmbedNet {
 public:
  explicit EmbedNet(EmbedConfig config);
  const EmbedConfig& config() const { return config_; }

  // emb.conv<i>.{w,b} then emb.fc.w [dim, C_last], emb.fc.b [dim].
  template <typename T>
  ParamList<T> Init(std::uint64_t seed) const;
  std::size_t ParamTensorCount() const;

  // features: [N, 40, steps] -> [N, embedding_dim]. Dropout layer i uses the
  // mask seed DeriveSeed(dropout_seed, i).
  template <typename T>
  nd::Var Forward(nd::Graph<T>& g, nd::Var features,
                  std::span<const nd::Var> params, bool training,
                  std::uint64_t dropout_seed) const;

 private:
  EmbedConfig config_;
};

// ---------------------------------------------------------------------------
// Full speaker model: DeepVOX params followed by embedding params.

class SpeakerModel {
 public:
  SpeakerModel(DeepVoxConfig dvx, EmbedConfig emb);
  static SpeakerModel Default();

  const DeepVoxNet& deepvox() const { return deepvox_; }
  const EmbedNet& embed() const { return embed_; }

  template <typename T>
  ParamList<T> Init(std::uint64_t seed) const;
  std::size_t ParamTensorCount() const;

  std::span<const nd::Var> DeepVoxParams(std::span<const nd::Var> all) const;
  std::span<const nd::Var> EmbedParams(std::span<const nd::Var> all) const;

  // [units, 1, unit_length] -> [40, units] feature matrix (channels x units).
  template <typename T>
  nd::Var Features(nd::Graph<T>& g, nd::Var units,
                   std::span<const nd::Var> params) const;

  // [units, 1, unit_length] -> [1, embedding_dim].
  template <typename T>
  nd::Var Embed(nd::Graph<T>& g, nd::Var units, std::span<const nd::Var> params,
                bool training, std::uint64_t dropout_seed) const;

  // Architecture as key=value metadata, and back.
  std::map<std::string, std::string> Describe() const;
  static SpeakerModel FromDescription(const std::map<std::string, std::string>& meta);

 private:
  DeepVoxNet deepvox_;
  EmbedNet embed_;
};

// Frame values as a [200, 1, 160] tensor (the frame is already stored unit
// by unit).
template <typename T>
nd::Tensor<T> FrameTensor(const audio::SpeechFrame& frame);

// Parameter blocks <-> checkpoint blocks.
std::vector<io::NamedBlock> ToBlocks(const ParamList<float>& params);
// Takes blocks in `layout` order by name; throws kData on missing or
// mis-shaped blocks.
ParamList<float> FromBlocks(const io::CheckpointRecord& record,
                            const ParamList<float>& layout);

struct LoadedModel {
  SpeakerModel model;
  ParamList<float> params;
};

// A model file is a DVCK container holding the architecture in its metadata.
void SaveModel(const std::string& path, const SpeakerModel& model,
               const ParamList<float>& params,
               std::map<std::string, std::string> extra_meta = {});
LoadedModel LoadModel(const std::string& path);

// Eval-mode inference helpers over float parameters.
std::vector<float> ExtractFeatures(const SpeakerModel& model,
                                   const ParamList<float>& params,
                                   const audio::SpeechFrame& frame);  // 40x200 row-major
std::vector<float> EmbedFrame(const SpeakerModel& model,
                              const ParamList<float>& params,
                              const audio::SpeechFrame& frame);
// Embeds every frame (in parallel) and returns them in order.
std::vector<std::vector<float>> EmbedFrames(
    const SpeakerModel& model, const ParamList<float>& params,
    std::span<const audio::SpeechFrame> frames);

// ---------------------------------------------------------------------------
// Linearized filterbank analysis.

// Multichannel kernel [out, in, taps]. Taps are already dilated (zeros
// between original taps), so every Kernel acts with dilation 1.
struct Kernel {
  std::size_t out = 0, in = 0, taps = 0;
  std::vector<double> w;

  double at(std::size_t o, std::size_t i, std::size_t k) const {
    return w[(o * in + i) * taps + k];
  }
  static Kernel FromConv(const nd::ConvSpec& spec, std::span<const float> w);
  static Kernel FromConv(const nd::ConvSpec& spec, std::span<const double> w);
};

// Composition of successive cross-correlations, layers[0] applied first:
// H[o, i] = sum_c H2[o, c] * H1[c, i] as polynomials in the tap index.
Kernel ComposeKernels(std::span<const Kernel> layers);

// Composition of the first layer_count DeepVOX layers, ignoring SELUs.
Kernel EffectiveFilterbank(const DeepVoxConfig& config,
                           const ParamList<float>& params,
                           std::size_t layer_count);
inline Kernel EffectiveFilterbank(const DeepVoxConfig& config,
                                  const ParamList<float>& params) {
  return EffectiveFilterbank(config, params, config.layers.size());
}

// Sum over all (out, in) kernels of |DFT_nfft|, bins 0..nfft/2, covering
// 0..4000 Hz at 8 kHz.
std::vector<double> MagnitudeResponse(const Kernel& kernel,
                                      std::size_t nfft = 1024);
std::vector<double> LayerFrequencyResponse(const DeepVoxConfig& config,
                                           const ParamList<float>& params,
                                           std::size_t layer_index,
                                           std::size_t nfft = 1024);

// Measures the filterbank by pushing scaled unit impulses through the
// bias-free network and reading the first output sample of every channel,
// divided by scale * lambda^(layers - 1). Equals EffectiveFilterbank only
// while every SELU stays in its positive (linear) regime.
Kernel ProbeFilterbank(const DeepVoxConfig& config,
                       const ParamList<double>& params, double scale = 1e-4);

}  // namespace deepvox::model

#endif  // DEEPVOX_MODEL_H_
