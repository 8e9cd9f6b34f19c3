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

// Relevance analysis of the DeepVOX filterbank: guided backpropagation to
// the input frame, Welch PSDs, band-wise spectral overlap, and an
// autocorrelation pitch estimator.

#ifndef DEEPVOX_ABLATION_H_
#define DEEPVOX_ABLATION_H_

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "deepvox/audio.h"
#include "deepvox/model.h"

namespace deepvox::ablation {

inline constexpr int kMeanFeature = -1;

// 160 x 200 relevance in the frame's layout (unit j at [160 j, 160 j + 160)).
struct RelevanceSignal {
  std::vector<double> values;
  int feature_index = kMeanFeature;
};

enum class BackpropMode { kGuided, kPlain };

// Gradient of DeepVOX output (feature, unit) with respect to the frame.
template <typename T>
RelevanceSignal GuidedBackprop(const model::DeepVoxConfig& config,
                               const model::ParamList<T>& params,
                               const audio::SpeechFrame& frame,
                               std::size_t feature, std::size_t unit,
                               BackpropMode mode = BackpropMode::kGuided);

// Runs the network once and backpropagates every feature in turn, each
// seeded at all 200 unit positions. Returns 40 signals.
template <typename T>
std::vector<RelevanceSignal> FeatureRelevances(const model::DeepVoxConfig& config,
                                               const model::ParamList<T>& params,
                                               const audio::SpeechFrame& frame,
                                               BackpropMode mode = BackpropMode::kGuided);

RelevanceSignal MeanOfSignals(std::span<const RelevanceSignal> signals);

template <typename T>
RelevanceSignal MeanRelevance(const model::DeepVoxConfig& config,
                              const model::ParamList<T>& params,
                              const audio::SpeechFrame& frame);

enum class OverlapAddMode {
  kWindowed,  // weights each column by the analysis window (chain rule)
  kPlain,     // adds columns as they are
};

// Reassembles 200 columns at stride 80 into 16080 samples.
std::vector<double> OverlapAdd(std::span<const double> columns,
                               OverlapAddMode mode = OverlapAddMode::kWindowed);

struct Psd {
  std::vector<double> freqs;  // Hz, 0..rate/2
  std::vector<double> power;  // one-sided density, units^2 / Hz
};

// Welch estimate: 256-sample Hamming segments, 50% overlap, averaged
// one-sided periodograms. sum(power) * rate / 256 is the mean square.
Psd WelchPsd(std::span<const double> signal, int sample_rate = audio::kSampleRate,
             std::size_t segment = 256);

struct BandOverlap {
  double lo_hz = 0.0, hi_hz = 0.0;
  double overlap = 0.0;
};

struct PsdReport {
  Psd input;
  Psd relevance;
  std::vector<BandOverlap> bands;
};

// Normalized (uncentered) correlation of the two PSDs over the bins of each
// band 0-500, 500-1000, 1000-2000, 2000-4000 Hz. Bands where either PSD is
// identically zero report 0.
PsdReport PsdOverlap(std::span<const double> input, std::span<const double> relevance,
                     int sample_rate = audio::kSampleRate);

struct F0Options {
  double f_min = 80.0;
  double f_max = 400.0;
  double voicing_threshold = 0.3;
  // The first local maximum reaching this fraction of the global maximum
  // wins, which avoids picking sub-harmonic lags.
  double first_peak_ratio = 0.9;
};

// Normalized autocorrelation pitch with parabolic peak refinement. Returns
// nullopt ("unvoiced") when no lag reaches the voicing threshold.
std::optional<double> EstimateF0(std::span<const double> signal,
                                 int sample_rate = audio::kSampleRate,
                                 const F0Options& options = {});

// Frame columns overlap-added (plain) back into a 16080-sample signal.
std::vector<double> FrameSignal(const audio::SpeechFrame& frame);

}  // namespace deepvox::ablation

#endif  // DEEPVOX_ABLATION_H_
