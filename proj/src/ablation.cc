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

#include "deepvox/ablation.h"

#include <algorithm>
#include <cmath>

#include "deepvox/common.h"
#include "deepvox/spectral.h"

namespace deepvox::ablation {

using nd::Graph;
using nd::Shape;
using nd::Tensor;
using nd::Var;

namespace {

constexpr std::size_t kValues = audio::kUnitLength * audio::kUnitsPerFrame;

template <typename T>
struct Probe {
  Graph<T> graph;
  Var input;
  Var output;  // [200, 40]
};

template <typename T>
void BuildProbe(Probe<T>& p, const model::DeepVoxConfig& config,
                const model::ParamList<T>& params, const audio::SpeechFrame& frame) {
  Check(config.unit_length == audio::kUnitLength, ErrorCode::kUsage,
        "relevance analysis needs 160-sample units");
  model::DeepVoxNet net(config);
  std::vector<Var> vars;
  for (const auto& prm : params)
    vars.push_back(p.graph.Input(prm.value, false));
  p.input = p.graph.Input(model::FrameTensor<T>(frame), true);
  p.output = net.Forward(p.graph, p.input, vars);
}

template <typename T>
RelevanceSignal Collect(Probe<T>& p, const Tensor<T>& seed, int feature) {
  p.graph.Backward(p.output, seed);
  RelevanceSignal r;
  const auto grad = p.graph.grad(p.input);
  r.values.assign(grad.values().begin(), grad.values().end());
  r.feature_index = feature;
  return r;
}

}  // namespace

template <typename T>
RelevanceSignal GuidedBackprop(const model::DeepVoxConfig& config,
                               const model::ParamList<T>& params,
                               const audio::SpeechFrame& frame, std::size_t feature,
                               std::size_t unit, BackpropMode mode) {
  Check(feature < model::DeepVoxNet::kFeatures, ErrorCode::kUsage,
        "feature index " + std::to_string(feature) + " out of range [0, 40)");
  Check(unit < audio::kUnitsPerFrame, ErrorCode::kUsage,
        "unit index " + std::to_string(unit) + " out of range [0, 200)");
  Probe<T> p;
  BuildProbe(p, config, params, frame);
  p.graph.set_guided(mode == BackpropMode::kGuided);
  Tensor<T> seed(p.graph.value(p.output).shape());
  seed[unit * model::DeepVoxNet::kFeatures + feature] = 1.0;
  return Collect(p, seed, static_cast<int>(feature));
}

template <typename T>
std::vector<RelevanceSignal> FeatureRelevances(const model::DeepVoxConfig& config,
                                               const model::ParamList<T>& params,
                                               const audio::SpeechFrame& frame,
                                               BackpropMode mode) {
  Probe<T> p;
  BuildProbe(p, config, params, frame);
  p.graph.set_guided(mode == BackpropMode::kGuided);
  const std::size_t nf = model::DeepVoxNet::kFeatures;
  std::vector<RelevanceSignal> out;
  for (std::size_t f = 0; f < nf; ++f) {
    Tensor<T> seed(p.graph.value(p.output).shape());
    for (std::size_t u = 0; u < audio::kUnitsPerFrame; ++u) seed[u * nf + f] = 1.0;
    out.push_back(Collect(p, seed, static_cast<int>(f)));
  }
  return out;
}

RelevanceSignal MeanOfSignals(std::span<const RelevanceSignal> signals) {
  Check(!signals.empty(), ErrorCode::kUsage, "mean of zero relevance signals");
  RelevanceSignal mean;
  mean.values.assign(signals[0].values.size(), 0.0);
  for (const auto& s : signals) {
    Check(s.values.size() == mean.values.size(), ErrorCode::kUsage,
          "relevance signals differ in size");
    for (std::size_t i = 0; i < s.values.size(); ++i) mean.values[i] += s.values[i];
  }
  for (double& v : mean.values) v /= double(signals.size());
  return mean;
}

template <typename T>
RelevanceSignal MeanRelevance(const model::DeepVoxConfig& config,
                              const model::ParamList<T>& params,
                              const audio::SpeechFrame& frame) {
  return MeanOfSignals(FeatureRelevances(config, params, frame));
}

std::vector<double> OverlapAdd(std::span<const double> columns, OverlapAddMode mode) {
  Check(columns.size() == kValues, ErrorCode::kUsage,
        "overlap-add expects 160 x 200 values");
  const auto window = audio::HammingWindow(audio::kUnitLength);
  std::vector<double> out(audio::kClipSamples + audio::kFramePadding, 0.0);
  for (std::size_t j = 0; j < audio::kUnitsPerFrame; ++j)
    for (std::size_t k = 0; k < audio::kUnitLength; ++k) {
      const double v = columns[j * audio::kUnitLength + k];
      out[j * audio::kUnitStride + k] += mode == OverlapAddMode::kWindowed ? v * window[k] : v;
    }
  return out;
}

std::vector<double> FrameSignal(const audio::SpeechFrame& frame) {
  return OverlapAdd(frame.values, OverlapAddMode::kPlain);
}

Psd WelchPsd(std::span<const double> signal, int sample_rate, std::size_t segment) {
  Check(segment >= 2 && segment % 2 == 0, ErrorCode::kUsage,
        "PSD segment length must be even");
  Check(signal.size() >= segment, ErrorCode::kData,
        "signal of " + std::to_string(signal.size()) + " samples is too short for a " +
            std::to_string(segment) + "-sample PSD segment");
  const auto window = audio::HammingWindow(segment);
  double wpow = 0.0;
  for (double w : window) wpow += w * w;
  const std::size_t hop = segment / 2;
  const std::size_t count = 1 + (signal.size() - segment) / hop;
  const std::size_t bins = segment / 2 + 1;
  Psd psd;
  psd.power.assign(bins, 0.0);
  std::vector<double> buf(segment);
  for (std::size_t s = 0; s < count; ++s) {
    for (std::size_t i = 0; i < segment; ++i) buf[i] = signal[s * hop + i] * window[i];
    const auto spec = dsp::RealDft(buf, segment);
    for (std::size_t k = 0; k < bins; ++k) psd.power[k] += std::norm(spec[k]);
  }
  const double norm = 1.0 / (double(count) * double(sample_rate) * wpow);
  for (std::size_t k = 0; k < bins; ++k) {
    const bool edge = (k == 0 || k == bins - 1);
    psd.power[k] *= norm * (edge ? 1.0 : 2.0);
  }
  psd.freqs.resize(bins);
  for (std::size_t k = 0; k < bins; ++k)
    psd.freqs[k] = double(k) * sample_rate / double(segment);
  return psd;
}

PsdReport PsdOverlap(std::span<const double> input, std::span<const double> relevance,
                     int sample_rate) {
  PsdReport r;
  r.input = WelchPsd(input, sample_rate);
  r.relevance = WelchPsd(relevance, sample_rate);
  const double nyquist = sample_rate / 2.0;
  const double edges[][2] = {{0, 500}, {500, 1000}, {1000, 2000}, {2000, 4000}};
  for (const auto& e : edges) {
    BandOverlap b{e[0], std::min(e[1], nyquist), 0.0};
    double xy = 0.0, xx = 0.0, yy = 0.0;
    for (std::size_t k = 0; k < r.input.freqs.size(); ++k) {
      const double f = r.input.freqs[k];
      const bool last = b.hi_hz >= nyquist;
      if (f < b.lo_hz || (last ? f > b.hi_hz : f >= b.hi_hz)) continue;
      xy += r.input.power[k] * r.relevance.power[k];
      xx += r.input.power[k] * r.input.power[k];
      yy += r.relevance.power[k] * r.relevance.power[k];
    }
    b.overlap = (xx > 0.0 && yy > 0.0) ? xy / std::sqrt(xx * yy) : 0.0;
    r.bands.push_back(b);
  }
  return r;
}

std::optional<double> EstimateF0(std::span<const double> signal, int sample_rate,
                                 const F0Options& options) {
  Check(options.f_min > 0.0 && options.f_max > options.f_min, ErrorCode::kUsage,
        "pitch range must satisfy 0 < f_min < f_max");
  const auto lag_min = static_cast<std::size_t>(std::floor(sample_rate / options.f_max));
  const auto lag_max = static_cast<std::size_t>(std::ceil(sample_rate / options.f_min));
  Check(signal.size() >= 2 * lag_max, ErrorCode::kData,
        "signal shorter than two periods of " + std::to_string(options.f_min) + " Hz");
  const std::size_t lo = std::max<std::size_t>(1, lag_min) - 1;
  const std::size_t hi = lag_max + 1;
  const std::size_t n = signal.size();
  std::vector<double> r(hi + 1, 0.0);
  for (std::size_t lag = lo; lag <= hi && lag < n; ++lag) {
    double xy = 0.0, xx = 0.0, yy = 0.0;
    for (std::size_t i = 0; i + lag < n; ++i) {
      xy += signal[i] * signal[i + lag];
      xx += signal[i] * signal[i];
      yy += signal[i + lag] * signal[i + lag];
    }
    r[lag] = (xx > 0.0 && yy > 0.0) ? xy / std::sqrt(xx * yy) : 0.0;
  }
  const std::size_t first = std::max<std::size_t>(lag_min, 1);
  double best = -2.0;
  for (std::size_t lag = first; lag <= lag_max; ++lag) best = std::max(best, r[lag]);
  if (best < options.voicing_threshold) return std::nullopt;
  std::size_t peak = 0;
  for (std::size_t lag = first; lag <= lag_max; ++lag) {
    const bool local = r[lag] >= r[lag - 1] && r[lag] >= r[lag + 1];
    if (local && r[lag] >= options.first_peak_ratio * best) {
      peak = lag;
      break;
    }
  }
  if (peak == 0) return std::nullopt;
  double shift = 0.0;
  const double a = r[peak - 1], b = r[peak], c = r[peak + 1];
  const double denom = a - 2.0 * b + c;
  if (denom < 0.0) shift = std::clamp(0.5 * (a - c) / denom, -0.5, 0.5);
  return sample_rate / (double(peak) + shift);
}

#define DEEPVOX_INSTANTIATE_ABLATION(T)                                         \
  template RelevanceSignal GuidedBackprop<T>(                                   \
      const model::DeepVoxConfig&, const model::ParamList<T>&,                 \
      const audio::SpeechFrame&, std::size_t, std::size_t, BackpropMode);       \
  template std::vector<RelevanceSignal> FeatureRelevances<T>(                   \
      const model::DeepVoxConfig&, const model::ParamList<T>&,                 \
      const audio::SpeechFrame&, BackpropMode);                                 \
  template RelevanceSignal MeanRelevance<T>(const model::DeepVoxConfig&,        \
                                            const model::ParamList<T>&,        \
                                            const audio::SpeechFrame&);

DEEPVOX_INSTANTIATE_ABLATION(float)
DEEPVOX_INSTANTIATE_ABLATION(double)

}  // namespace deepvox::ablation
