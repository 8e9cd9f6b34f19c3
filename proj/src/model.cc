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

#include "deepvox/model.h"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <random>
#include <sstream>

#include "deepvox/common.h"
#include "deepvox/spectral.h"

namespace deepvox::model {
namespace {

using nd::ConvSpec;
using nd::Graph;
using nd::Shape;
using nd::Tensor;
using nd::Var;

template <typename T>
Tensor<T> LecunNormal(Shape shape, std::size_t fan_in, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(double(fan_in)));
  Tensor<T> t(std::move(shape));
  for (auto& v : t.values()) v = static_cast<T>(normal(gen));
  return t;
}

template <typename T>
void AppendConvParams(ParamList<T>& out, const std::string& prefix,
                      const std::vector<ConvSpec>& layers, std::uint64_t seed) {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const ConvSpec& s = layers[i];
    const std::string name = prefix + ".conv" + std::to_string(i);
    out.push_back({name + ".w",
                   LecunNormal<T>(Shape{s.out_channels, s.in_channels, s.kernel_size},
                                  s.in_channels * s.kernel_size,
                                  DeriveSeed(seed, 2 * i))});
    out.push_back({name + ".b", Tensor<T>(Shape{s.out_channels})});
  }
}

void CheckChain(const std::vector<ConvSpec>& layers, std::size_t in_channels,
                std::size_t length, const std::string& what) {
  Check(!layers.empty(), ErrorCode::kUsage, what + ": no layers");
  std::size_t channels = in_channels;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const ConvSpec& s = layers[i];
    Check(s.in_channels == channels, ErrorCode::kUsage,
          what + " layer " + std::to_string(i) + " expects " +
              std::to_string(s.in_channels) + " input channels, gets " +
              std::to_string(channels));
    Check(s.stride == 1 && s.bias, ErrorCode::kUsage,
          what + " layers must have stride 1 and a bias");
    s.Validate(length);
    length = s.OutputLength(length);
    channels = s.out_channels;
  }
}

std::size_t UnsignedField(const std::string& text, const std::string& field) {
  std::size_t pos = 0;
  unsigned long long v = 0;
  try {
    if (!field.empty() && std::isdigit(static_cast<unsigned char>(field[0])))
      v = std::stoull(field, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  Check(pos == field.size() && !field.empty() && v > 0, ErrorCode::kUsage,
        "bad layer list '" + text + "'");
  return static_cast<std::size_t>(v);
}

}  // namespace

std::string FormatLayers(const std::vector<ConvSpec>& layers) {
  std::string out;
  for (const auto& s : layers) {
    if (!out.empty()) out += ',';
    out += std::to_string(s.in_channels) + ':' + std::to_string(s.out_channels) +
           ':' + std::to_string(s.kernel_size) + ':' + std::to_string(s.dilation);
  }
  return out;
}

std::vector<ConvSpec> ParseLayers(const std::string& text) {
  std::vector<ConvSpec> layers;
  std::istringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    std::vector<std::string> f;
    std::istringstream parts(item);
    std::string part;
    while (std::getline(parts, part, ':')) f.push_back(part);
    Check(f.size() == 4, ErrorCode::kUsage,
          "bad layer list '" + text + "'; expected in:out:kernel:dilation");
    ConvSpec s;
    s.in_channels = UnsignedField(text, f[0]);
    s.out_channels = UnsignedField(text, f[1]);
    s.kernel_size = UnsignedField(text, f[2]);
    s.dilation = UnsignedField(text, f[3]);
    layers.push_back(s);
  }
  Check(!layers.empty(), ErrorCode::kUsage, "empty layer list");
  return layers;
}

// ---------------------------------------------------------------------------
// DeepVOX

DeepVoxConfig DeepVoxConfig::Default() {
  DeepVoxConfig c;
  c.layers = {{1, 16, 7, 1}, {16, 32, 5, 2}, {32, 40, 5, 4}, {40, 40, 3, 2}};
  return c;
}

std::size_t DeepVoxConfig::ReceptiveField() const {
  std::size_t rf = 1;
  for (const auto& s : layers) rf += (s.kernel_size - 1) * s.dilation;
  return rf;
}

void DeepVoxConfig::Validate() const {
  CheckChain(layers, 1, unit_length, "deepvox");
  Check(output_channels() == DeepVoxNet::kFeatures, ErrorCode::kUsage,
        "deepvox must end at 40 channels, got " +
            std::to_string(output_channels()));
}

DeepVoxNet::DeepVoxNet(DeepVoxConfig config) : config_(std::move(config)) {
  config_.Validate();
}

template <typename T>
ParamList<T> DeepVoxNet::Init(std::uint64_t seed) const {
  ParamList<T> out;
  AppendConvParams(out, "dvx", config_.layers, seed);
  return out;
}

std::size_t DeepVoxNet::ParamTensorCount() const {
  return 2 * config_.layers.size();
}

template <typename T>
Var DeepVoxNet::Forward(Graph<T>& g, Var units, std::span<const Var> params,
                        bool pool) const {
  Check(params.size() == ParamTensorCount(), ErrorCode::kUsage,
        "deepvox expects " + std::to_string(ParamTensorCount()) +
            " parameter tensors, got " + std::to_string(params.size()));
  const auto& in_shape = g.value(units).shape();
  Check(in_shape.size() == 3 && in_shape[1] == 1 &&
            in_shape[2] == config_.unit_length,
        ErrorCode::kUsage,
        "deepvox input " + nd::ShapeString(in_shape) + " vs expected [N, 1, " +
            std::to_string(config_.unit_length) + "]");
  Var x = units;
  const std::size_t m = config_.layers.size();
  for (std::size_t i = 0; i < m; ++i) {
    x = nd::Conv1d(g, x, params[2 * i], params[2 * i + 1], config_.layers[i]);
    if (i + 1 < m) x = nd::Selu(g, x);
  }
  if (!pool) return x;
  const Shape s = g.value(x).shape();
  x = nd::AvgPool1d(g, x, s[2], 1);
  return nd::Reshape(g, x, Shape{s[0], s[1]});
}

// ---------------------------------------------------------------------------
// Embedding network

EmbedConfig EmbedConfig::Default() {
  EmbedConfig c;
  c.layers = {{40, 64, 5, 1}, {64, 96, 5, 2}, {96, 128, 3, 4}};
  return c;
}

void EmbedConfig::Validate(std::size_t steps) const {
  CheckChain(layers, DeepVoxNet::kFeatures, steps, "embedding");
  Check(dropout_p >= 0.0 && dropout_p < 1.0, ErrorCode::kUsage,
        "dropout probability must be in [0, 1)");
  Check(embedding_dim > 0, ErrorCode::kUsage, "embedding dimension must be positive");
}

EmbedNet::EmbedNet(EmbedConfig config) : config_(std::move(config)) {
  config_.Validate();
}

template <typename T>
ParamList<T> EmbedNet::Init(std::uint64_t seed) const {
  ParamList<T> out;
  AppendConvParams(out, "emb", config_.layers, seed);
  const std::size_t c = config_.layers.back().out_channels;
  out.push_back({"emb.fc.w",
                 LecunNormal<T>(Shape{config_.embedding_dim, c}, c,
                                DeriveSeed(seed, 2 * config_.layers.size()))});
  out.push_back({"emb.fc.b", Tensor<T>(Shape{config_.embedding_dim})});
  return out;
}

std::size_t EmbedNet::ParamTensorCount() const {
  return 2 * config_.layers.size() + 2;
}

template <typename T>
Var EmbedNet::Forward(Graph<T>& g, Var features, std::span<const Var> params,
                      bool training, std::uint64_t dropout_seed) const {
  Check(params.size() == ParamTensorCount(), ErrorCode::kUsage,
        "embedding expects " + std::to_string(ParamTensorCount()) +
            " parameter tensors, got " + std::to_string(params.size()));
  const auto& in_shape = g.value(features).shape();
  Check(in_shape.size() == 3 && in_shape[1] == DeepVoxNet::kFeatures,
        ErrorCode::kUsage,
        "embedding input " + nd::ShapeString(in_shape) + " vs expected [N, 40, L]");
  Var x = features;
  const std::size_t m = config_.layers.size();
  for (std::size_t i = 0; i < m; ++i) {
    x = nd::Conv1d(g, x, params[2 * i], params[2 * i + 1], config_.layers[i]);
    x = nd::Selu(g, x);
    x = nd::AlphaDropout(g, x, config_.dropout_p, training,
                         DeriveSeed(dropout_seed, i));
  }
  const Shape s = g.value(x).shape();
  x = nd::AvgPool1d(g, x, s[2], 1);
  x = nd::Reshape(g, x, Shape{s[0], s[1]});
  return nd::Linear(g, x, params[2 * m], params[2 * m + 1]);
}

// ---------------------------------------------------------------------------
// SpeakerModel

SpeakerModel::SpeakerModel(DeepVoxConfig dvx, EmbedConfig emb)
    : deepvox_(std::move(dvx)), embed_(std::move(emb)) {}

SpeakerModel SpeakerModel::Default() {
  return SpeakerModel(DeepVoxConfig::Default(), EmbedConfig::Default());
}

template <typename T>
ParamList<T> SpeakerModel::Init(std::uint64_t seed) const {
  ParamList<T> out =
      deepvox_.Init<T>(SubstreamSeed(seed, "init.deepvox"));
  ParamList<T> emb = embed_.Init<T>(SubstreamSeed(seed, "init.embed"));
  for (auto& p : emb) out.push_back(std::move(p));
  return out;
}

std::size_t SpeakerModel::ParamTensorCount() const {
  return deepvox_.ParamTensorCount() + embed_.ParamTensorCount();
}

std::span<const Var> SpeakerModel::DeepVoxParams(std::span<const Var> all) const {
  Check(all.size() == ParamTensorCount(), ErrorCode::kUsage,
        "speaker model expects " + std::to_string(ParamTensorCount()) +
            " parameter tensors, got " + std::to_string(all.size()));
  return all.first(deepvox_.ParamTensorCount());
}

std::span<const Var> SpeakerModel::EmbedParams(std::span<const Var> all) const {
  Check(all.size() == ParamTensorCount(), ErrorCode::kUsage,
        "speaker model expects " + std::to_string(ParamTensorCount()) +
            " parameter tensors, got " + std::to_string(all.size()));
  return all.subspan(deepvox_.ParamTensorCount());
}

template <typename T>
Var SpeakerModel::Features(Graph<T>& g, Var units,
                           std::span<const Var> params) const {
  Var f = deepvox_.Forward(g, units, DeepVoxParams(params));
  return nd::Transpose(g, f);
}

template <typename T>
Var SpeakerModel::Embed(Graph<T>& g, Var units, std::span<const Var> params,
                        bool training, std::uint64_t dropout_seed) const {
  Var f = Features(g, units, params);
  const Shape s = g.value(f).shape();
  f = nd::Reshape(g, f, Shape{1, s[0], s[1]});
  return embed_.Forward(g, f, EmbedParams(params), training, dropout_seed);
}

std::map<std::string, std::string> SpeakerModel::Describe() const {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", embed_.config().dropout_p);
  return {{"model.dvx.layers", FormatLayers(deepvox_.config().layers)},
          {"model.dvx.unit_length", std::to_string(deepvox_.config().unit_length)},
          {"model.emb.layers", FormatLayers(embed_.config().layers)},
          {"model.emb.dropout", buf},
          {"model.emb.dim", std::to_string(embed_.config().embedding_dim)}};
}

SpeakerModel SpeakerModel::FromDescription(
    const std::map<std::string, std::string>& meta) {
  auto get = [&](const std::string& key) {
    auto it = meta.find(key);
    Check(it != meta.end(), ErrorCode::kData, "model metadata lacks " + key);
    return it->second;
  };
  DeepVoxConfig dvx;
  dvx.layers = ParseLayers(get("model.dvx.layers"));
  dvx.unit_length = std::stoul(get("model.dvx.unit_length"));
  EmbedConfig emb;
  emb.layers = ParseLayers(get("model.emb.layers"));
  emb.dropout_p = std::stod(get("model.emb.dropout"));
  emb.embedding_dim = std::stoul(get("model.emb.dim"));
  return SpeakerModel(std::move(dvx), std::move(emb));
}

template <typename T>
Tensor<T> FrameTensor(const audio::SpeechFrame& frame) {
  Check(frame.values.size() == audio::kUnitLength * audio::kUnitsPerFrame,
        ErrorCode::kData,
        "speech frame has " + std::to_string(frame.values.size()) +
            " values, expected 160 x 200");
  return Tensor<T>(Shape{audio::kUnitsPerFrame, 1, audio::kUnitLength},
                   std::vector<T>(frame.values.begin(), frame.values.end()));
}

std::vector<io::NamedBlock> ToBlocks(const ParamList<float>& params) {
  std::vector<io::NamedBlock> blocks;
  for (const auto& p : params) {
    io::NamedBlock b;
    b.name = p.name;
    for (auto d : p.value.shape()) b.dims.push_back(static_cast<std::uint32_t>(d));
    b.data = p.value.storage();
    blocks.push_back(std::move(b));
  }
  return blocks;
}

ParamList<float> FromBlocks(const io::CheckpointRecord& record,
                            const ParamList<float>& layout) {
  ParamList<float> out;
  for (const auto& p : layout) {
    const io::NamedBlock* b = record.Find(p.name);
    Check(b != nullptr, ErrorCode::kData, "checkpoint lacks parameter " + p.name);
    Shape shape(b->dims.begin(), b->dims.end());
    Check(shape == p.value.shape(), ErrorCode::kData,
          "parameter " + p.name + " has shape " + nd::ShapeString(shape) +
              ", expected " + nd::ShapeString(p.value.shape()));
    out.push_back({p.name, Tensor<float>(shape, b->data)});
  }
  return out;
}

void SaveModel(const std::string& path, const SpeakerModel& model,
               const ParamList<float>& params,
               std::map<std::string, std::string> extra_meta) {
  io::CheckpointRecord rec;
  rec.meta = std::move(extra_meta);
  for (auto& [k, v] : model.Describe()) rec.meta[k] = v;
  rec.blocks = ToBlocks(params);
  io::WriteCheckpoint(path, rec);
}

LoadedModel LoadModel(const std::string& path) {
  const io::CheckpointRecord rec = io::ReadCheckpoint(path);
  SpeakerModel model = SpeakerModel::FromDescription(rec.meta);
  ParamList<float> params = FromBlocks(rec, model.Init<float>(0));
  return {std::move(model), std::move(params)};
}

std::vector<float> ExtractFeatures(const SpeakerModel& model,
                                   const ParamList<float>& params,
                                   const audio::SpeechFrame& frame) {
  Graph<float> g;
  const auto vars = BindParams(g, params, false);
  Var x = g.Input(FrameTensor<float>(frame));
  return g.value(model.Features(g, x, vars)).storage();
}

std::vector<float> EmbedFrame(const SpeakerModel& model,
                              const ParamList<float>& params,
                              const audio::SpeechFrame& frame) {
  Graph<float> g;
  const auto vars = BindParams(g, params, false);
  Var x = g.Input(FrameTensor<float>(frame));
  return g.value(model.Embed(g, x, vars, false, 0)).storage();
}

std::vector<std::vector<float>> EmbedFrames(
    const SpeakerModel& model, const ParamList<float>& params,
    std::span<const audio::SpeechFrame> frames) {
  std::vector<std::vector<float>> out(frames.size());
  ParallelFor(frames.size(), [&](std::size_t i) {
    out[i] = EmbedFrame(model, params, frames[i]);
  });
  return out;
}

// ---------------------------------------------------------------------------
// Filterbank analysis

namespace {

template <typename T>
Kernel KernelFromConv(const ConvSpec& spec, std::span<const T> w) {
  Check(w.size() == spec.out_channels * spec.in_channels * spec.kernel_size,
        ErrorCode::kUsage, "kernel weights do not match the layer shape");
  Kernel k;
  k.out = spec.out_channels;
  k.in = spec.in_channels;
  k.taps = spec.Extent();
  k.w.assign(k.out * k.in * k.taps, 0.0);
  for (std::size_t o = 0; o < k.out; ++o)
    for (std::size_t i = 0; i < k.in; ++i)
      for (std::size_t j = 0; j < spec.kernel_size; ++j)
        k.w[(o * k.in + i) * k.taps + j * spec.dilation] =
            static_cast<double>(w[(o * k.in + i) * spec.kernel_size + j]);
  return k;
}

}  // namespace

Kernel Kernel::FromConv(const ConvSpec& spec, std::span<const float> w) {
  return KernelFromConv(spec, w);
}

Kernel Kernel::FromConv(const ConvSpec& spec, std::span<const double> w) {
  return KernelFromConv(spec, w);
}

Kernel ComposeKernels(std::span<const Kernel> layers) {
  Check(!layers.empty(), ErrorCode::kUsage, "no kernels to compose");
  Kernel h = layers[0];
  for (std::size_t l = 1; l < layers.size(); ++l) {
    const Kernel& k2 = layers[l];
    Check(k2.in == h.out, ErrorCode::kUsage,
          "kernel " + std::to_string(l) + " expects " + std::to_string(k2.in) +
              " channels, previous produces " + std::to_string(h.out));
    Kernel r;
    r.out = k2.out;
    r.in = h.in;
    r.taps = h.taps + k2.taps - 1;
    r.w.assign(r.out * r.in * r.taps, 0.0);
    for (std::size_t o = 0; o < r.out; ++o)
      for (std::size_t c = 0; c < k2.in; ++c)
        for (std::size_t a = 0; a < k2.taps; ++a) {
          const double wa = k2.at(o, c, a);
          if (wa == 0.0) continue;
          for (std::size_t i = 0; i < r.in; ++i) {
            double* dst = &r.w[(o * r.in + i) * r.taps + a];
            const double* src = &h.w[(c * h.in + i) * h.taps];
            for (std::size_t b = 0; b < h.taps; ++b) dst[b] += wa * src[b];
          }
        }
    h = std::move(r);
  }
  return h;
}

Kernel EffectiveFilterbank(const DeepVoxConfig& config,
                           const ParamList<float>& params,
                           std::size_t layer_count) {
  Check(layer_count >= 1 && layer_count <= config.layers.size(),
        ErrorCode::kUsage,
        "layer count " + std::to_string(layer_count) + " out of range");
  Check(params.size() >= 2 * layer_count, ErrorCode::kUsage,
        "too few parameter tensors for the filterbank");
  std::vector<Kernel> kernels;
  for (std::size_t i = 0; i < layer_count; ++i)
    kernels.push_back(Kernel::FromConv(config.layers[i], params[2 * i].value.values()));
  return ComposeKernels(kernels);
}

std::vector<double> MagnitudeResponse(const Kernel& kernel, std::size_t nfft) {
  Check(nfft >= kernel.taps, ErrorCode::kUsage,
        "DFT length shorter than the kernel");
  std::vector<double> mag(nfft / 2 + 1, 0.0);
  for (std::size_t oi = 0; oi < kernel.out * kernel.in; ++oi) {
    const auto spec = dsp::RealDft(
        std::span<const double>(kernel.w).subspan(oi * kernel.taps, kernel.taps),
        nfft);
    for (std::size_t b = 0; b < mag.size(); ++b) mag[b] += std::abs(spec[b]);
  }
  return mag;
}

std::vector<double> LayerFrequencyResponse(const DeepVoxConfig& config,
                                           const ParamList<float>& params,
                                           std::size_t layer_index,
                                           std::size_t nfft) {
  Check(layer_index < config.layers.size(), ErrorCode::kUsage,
        "layer index " + std::to_string(layer_index) + " out of range");
  return MagnitudeResponse(EffectiveFilterbank(config, params, layer_index + 1),
                           nfft);
}

Kernel ProbeFilterbank(const DeepVoxConfig& config,
                       const ParamList<double>& params, double scale) {
  DeepVoxNet net(config);
  const std::size_t rf = config.ReceptiveField();
  Graph<double> g;
  std::vector<Var> vars;
  for (const auto& p : params) {
    Tensor<double> v = p.value;
    if (p.name.ends_with(".b")) v.Fill(0.0);
    vars.push_back(g.Input(std::move(v)));
  }
  Tensor<double> probes(Shape{rf, 1, config.unit_length});
  for (std::size_t p = 0; p < rf; ++p) probes[p * config.unit_length + p] = scale;
  Var y = net.Forward(g, g.Input(std::move(probes)), vars, false);
  const Tensor<double>& yv = g.value(y);
  const std::size_t c = yv.dim(1), len = yv.dim(2);
  const double gain =
      scale * std::pow(nd::kSeluLambda, double(config.layers.size() - 1));
  Kernel k;
  k.out = c;
  k.in = 1;
  k.taps = rf;
  k.w.resize(c * rf);
  for (std::size_t o = 0; o < c; ++o)
    for (std::size_t p = 0; p < rf; ++p)
      k.w[o * rf + p] = yv[(p * c + o) * len] / gain;
  return k;
}

// ---------------------------------------------------------------------------

#define DEEPVOX_INSTANTIATE_MODEL(T)                                           \
  template ParamList<T> DeepVoxNet::Init<T>(std::uint64_t) const;             \
  template Var DeepVoxNet::Forward<T>(Graph<T>&, Var, std::span<const Var>,   \
                                      bool) const;                            \
  template ParamList<T> EmbedNet::Init<T>(std::uint64_t) const;               \
  template Var EmbedNet::Forward<T>(Graph<T>&, Var, std::span<const Var>,     \
                                    bool, std::uint64_t) const;               \
  template ParamList<T> SpeakerModel::Init<T>(std::uint64_t) const;           \
  template Var SpeakerModel::Features<T>(Graph<T>&, Var,                      \
                                         std::span<const Var>) const;         \
  template Var SpeakerModel::Embed<T>(Graph<T>&, Var, std::span<const Var>,   \
                                      bool, std::uint64_t) const;             \
  template Tensor<T> FrameTensor<T>(const audio::SpeechFrame&);

DEEPVOX_INSTANTIATE_MODEL(float)
DEEPVOX_INSTANTIATE_MODEL(double)

}  // namespace deepvox::model
