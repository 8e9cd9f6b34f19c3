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

// Raw audio to network input: voice activity detection, 2 s clip
// segmentation, Hamming framing, and SNR-controlled degradation.

#ifndef DEEPVOX_AUDIO_H_
#define DEEPVOX_AUDIO_H_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace deepvox::audio {

inline constexpr int kSampleRate = 8000;
inline constexpr std::size_t kUnitLength = 160;   // 20 ms
inline constexpr std::size_t kUnitStride = 80;    // 10 ms
inline constexpr std::size_t kUnitsPerFrame = 200;
inline constexpr std::size_t kClipSamples = 16000;  // 2 s
// Framing reads up to sample 80 * 199 + 160 = 16080, so clips are padded.
inline constexpr std::size_t kFramePadding = 80;

struct AudioBuffer {
  std::vector<double> samples;
  int sample_rate = kSampleRate;

  std::size_t size() const { return samples.size(); }
  double duration_s() const {
    return static_cast<double>(samples.size()) / sample_rate;
  }
};

// 160 x 200 matrix of Hamming-windowed speech units, stored column-major:
// unit j occupies values[j * 160, (j + 1) * 160).
struct SpeechFrame {
  std::vector<double> values;
  std::string source_id;
  std::string clip_id;

  double at(std::size_t sample, std::size_t unit) const {
    return values[unit * kUnitLength + sample];
  }
  std::span<const double> unit(std::size_t j) const {
    return std::span<const double>(values).subspan(j * kUnitLength, kUnitLength);
  }
};

struct Segment {
  std::size_t begin = 0;  // sample index, inclusive
  std::size_t end = 0;    // exclusive
  friend bool operator==(const Segment&, const Segment&) = default;
};

struct VadOptions {
  double energy_floor_db = -30.0;  // relative to the median window energy
  double min_segment_ms = 100.0;
  double window_ms = 25.0;
};

// Maximal runs of 25 ms windows whose mean-square energy is positive and
// exceeds median_energy * 10^(floor/10). Runs shorter than min_segment_ms
// are dropped. Throws kData "empty audio" on an empty buffer.
std::vector<Segment> DetectVoice(const AudioBuffer& buf,
                                 const VadOptions& options = {});

// Concatenates the voiced segments and cuts them into 2 s clips. A trailing
// remainder of at least 1 s is zero-padded to 2 s; shorter ones are dropped.
std::vector<AudioBuffer> SegmentClips(const AudioBuffer& buf,
                                      std::span<const Segment> segments);

// w[k] = 0.54 - 0.46 cos(2 pi k / (n - 1)), n >= 2.
std::vector<double> HammingWindow(std::size_t n);

// Frames a 16000-sample clip into 200 windowed units at a 80-sample stride.
SpeechFrame FrameClip(const AudioBuffer& clip, std::string source_id = {},
                      std::string clip_id = {});

// VAD + segmentation + framing for a whole utterance.
std::vector<SpeechFrame> FramesFromAudio(const AudioBuffer& buf,
                                         const std::string& source_id,
                                         const std::string& utt_id,
                                         const VadOptions& vad = {});

enum class NoiseKind { kWhite, kHarmonicBabble };

struct DegradationSpec {
  NoiseKind noise_kind = NoiseKind::kWhite;
  double snr_db = 10.0;
};

NoiseKind ParseNoiseKind(const std::string& name);
std::string NoiseKindName(NoiseKind kind);

double MeanPower(std::span<const double> x);

// Factor applied to the noise so that 10 log10(p_clean / (s^2 p_noise))
// equals snr_db.
double NoiseScale(double clean_power, double noise_power, double snr_db);

// Unscaled noise of the given length.
std::vector<double> GenerateNoise(NoiseKind kind, std::size_t n,
                                  std::uint64_t seed);

struct MixResult {
  AudioBuffer mixed;
  std::vector<double> scaled_noise;  // noise exactly as added, pre-normalization
  double noise_scale = 1.0;
  double peak_gain = 1.0;  // applied to the sum when |sample| > 1
};

// Adds noise at the requested SNR, then peak-normalizes if needed. Only the
// noise is scaled before mixing. Throws kData "silent reference".
MixResult MixNoise(const AudioBuffer& clean, const DegradationSpec& spec,
                   std::uint64_t seed);

// 16-bit PCM mono WAV. Reading rejects other encodings, channel counts, and
// sample rates other than 8000 Hz.
AudioBuffer ReadWav(const std::string& path);
void WriteWav(const std::string& path, const AudioBuffer& buf);

}  // namespace deepvox::audio

#endif  // DEEPVOX_AUDIO_H_
