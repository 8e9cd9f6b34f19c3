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

#include "deepvox/audio.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <random>

#include "deepvox/common.h"

namespace deepvox::audio {
namespace {

void RequireRate(const AudioBuffer& buf) {
  Check(buf.sample_rate == kSampleRate, ErrorCode::kData,
        "sample rate " + std::to_string(buf.sample_rate) +
            " Hz is not supported; audio must be 8000 Hz");
}

std::size_t MsToSamples(double ms, int rate) {
  return static_cast<std::size_t>(std::llround(ms * rate / 1000.0));
}

double Median(std::vector<double> v) {
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  const double upper = v[mid];
  if (v.size() % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), v.begin() + mid);
  return 0.5 * (lower + upper);
}

}  // namespace

std::vector<Segment> DetectVoice(const AudioBuffer& buf,
                                 const VadOptions& options) {
  Check(!buf.samples.empty(), ErrorCode::kData, "empty audio");
  RequireRate(buf);
  const std::size_t win = std::max<std::size_t>(
      1, MsToSamples(options.window_ms, buf.sample_rate));
  const std::size_t n = buf.size();
  const std::size_t windows = (n + win - 1) / win;
  std::vector<double> energy(windows);
  for (std::size_t w = 0; w < windows; ++w) {
    const std::size_t b = w * win, e = std::min(n, b + win);
    energy[w] = MeanPower(std::span<const double>(buf.samples).subspan(b, e - b));
  }
  const double threshold =
      Median(energy) * std::pow(10.0, options.energy_floor_db / 10.0);
  const std::size_t min_len = MsToSamples(options.min_segment_ms, buf.sample_rate);

  std::vector<Segment> segments;
  std::size_t w = 0;
  while (w < windows) {
    if (!(energy[w] > 0.0 && energy[w] > threshold)) {
      ++w;
      continue;
    }
    std::size_t end_w = w;
    while (end_w < windows && energy[end_w] > 0.0 && energy[end_w] > threshold)
      ++end_w;
    Segment seg{w * win, std::min(n, end_w * win)};
    if (seg.end - seg.begin >= min_len) segments.push_back(seg);
    w = end_w;
  }
  return segments;
}

std::vector<AudioBuffer> SegmentClips(const AudioBuffer& buf,
                                      std::span<const Segment> segments) {
  std::vector<double> voiced;
  for (const Segment& s : segments) {
    Check(s.begin <= s.end && s.end <= buf.size(), ErrorCode::kData,
          "segment [" + std::to_string(s.begin) + ", " + std::to_string(s.end) +
              ") outside buffer of " + std::to_string(buf.size()) + " samples");
    voiced.insert(voiced.end(), buf.samples.begin() + s.begin,
                  buf.samples.begin() + s.end);
  }
  std::vector<AudioBuffer> clips;
  const std::size_t keep_min = kClipSamples / 2;
  for (std::size_t b = 0; b < voiced.size(); b += kClipSamples) {
    const std::size_t len = std::min(kClipSamples, voiced.size() - b);
    if (len < keep_min) break;
    AudioBuffer clip;
    clip.sample_rate = buf.sample_rate;
    clip.samples.assign(voiced.begin() + b, voiced.begin() + b + len);
    clip.samples.resize(kClipSamples, 0.0);
    clips.push_back(std::move(clip));
  }
  return clips;
}

std::vector<double> HammingWindow(std::size_t n) {
  Check(n >= 2, ErrorCode::kUsage,
        "hamming window length must be at least 2, got " + std::to_string(n));
  std::vector<double> w(n);
  const double denom = static_cast<double>(n - 1);
  for (std::size_t k = 0; k < n; ++k)
    w[k] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * k / denom);
  return w;
}

SpeechFrame FrameClip(const AudioBuffer& clip, std::string source_id,
                      std::string clip_id) {
  RequireRate(clip);
  Check(clip.size() == kClipSamples, ErrorCode::kData,
        "frame_clip needs exactly " + std::to_string(kClipSamples) +
            " samples, got " + std::to_string(clip.size()));
  static const std::vector<double> window = HammingWindow(kUnitLength);
  std::vector<double> padded(clip.samples);
  padded.resize(kClipSamples + kFramePadding, 0.0);
  SpeechFrame frame;
  frame.source_id = std::move(source_id);
  frame.clip_id = std::move(clip_id);
  frame.values.resize(kUnitLength * kUnitsPerFrame);
  for (std::size_t j = 0; j < kUnitsPerFrame; ++j) {
    const double* src = padded.data() + j * kUnitStride;
    double* dst = frame.values.data() + j * kUnitLength;
    for (std::size_t k = 0; k < kUnitLength; ++k) dst[k] = src[k] * window[k];
  }
  return frame;
}

std::vector<SpeechFrame> FramesFromAudio(const AudioBuffer& buf,
                                         const std::string& source_id,
                                         const std::string& utt_id,
                                         const VadOptions& vad) {
  const auto segments = DetectVoice(buf, vad);
  const auto clips = SegmentClips(buf, segments);
  std::vector<SpeechFrame> frames;
  frames.reserve(clips.size());
  for (std::size_t i = 0; i < clips.size(); ++i)
    frames.push_back(
        FrameClip(clips[i], source_id, utt_id + "#" + std::to_string(i)));
  return frames;
}

// ---------------------------------------------------------------------------
// Degradation

NoiseKind ParseNoiseKind(const std::string& name) {
  if (name == "white") return NoiseKind::kWhite;
  if (name == "harmonic_babble" || name == "babble")
    return NoiseKind::kHarmonicBabble;
  Fail(ErrorCode::kUsage,
       "unknown noise kind '" + name + "' (expected white|harmonic_babble)");
}

std::string NoiseKindName(NoiseKind kind) {
  return kind == NoiseKind::kWhite ? "white" : "harmonic_babble";
}

double MeanPower(std::span<const double> x) {
  if (x.empty()) return 0.0;
  double acc = 0.0;
  for (double v : x) acc += v * v;
  return acc / static_cast<double>(x.size());
}

double NoiseScale(double clean_power, double noise_power, double snr_db) {
  Check(std::isfinite(snr_db), ErrorCode::kUsage, "snr_db must be finite");
  Check(clean_power > 0.0, ErrorCode::kData, "silent reference");
  Check(noise_power > 0.0, ErrorCode::kData, "noise has zero power");
  return std::sqrt(clean_power / (noise_power * std::pow(10.0, snr_db / 10.0)));
}

std::vector<double> GenerateNoise(NoiseKind kind, std::size_t n,
                                  std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::vector<double> noise(n, 0.0);
  if (kind == NoiseKind::kWhite) {
    std::normal_distribution<double> normal(0.0, 1.0);
    for (double& v : noise) v = normal(gen);
    return noise;
  }
  // Babble: several harmonic talkers with drifting pitch and syllabic
  // amplitude modulation.
  constexpr int kTalkers = 6;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double two_pi = 2.0 * std::numbers::pi;
  for (int t = 0; t < kTalkers; ++t) {
    const double f0 = 100.0 + 150.0 * unif(gen);
    const double vibrato_hz = 2.0 + 3.0 * unif(gen);
    const double syllable_hz = 3.0 + 3.0 * unif(gen);
    const double phase_am = two_pi * unif(gen);
    const int harmonics = static_cast<int>(3500.0 / (f0 * 1.05));
    std::vector<double> phases(harmonics);
    for (double& p : phases) p = two_pi * unif(gen);
    double phase = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double time = static_cast<double>(i) / kSampleRate;
      const double f = f0 * (1.0 + 0.03 * std::sin(two_pi * vibrato_hz * time));
      phase += two_pi * f / kSampleRate;
      const double env =
          0.5 * (1.0 + std::sin(two_pi * syllable_hz * time + phase_am));
      double s = 0.0;
      for (int h = 1; h <= harmonics; ++h)
        s += std::sin(h * phase + phases[h - 1]) / h;
      noise[i] += env * s;
    }
  }
  return noise;
}

MixResult MixNoise(const AudioBuffer& clean, const DegradationSpec& spec,
                   std::uint64_t seed) {
  Check(!clean.samples.empty(), ErrorCode::kData, "empty audio");
  const double p_clean = MeanPower(clean.samples);
  Check(p_clean > 0.0, ErrorCode::kData, "silent reference");
  MixResult r;
  r.scaled_noise = GenerateNoise(spec.noise_kind, clean.size(), seed);
  r.noise_scale = NoiseScale(p_clean, MeanPower(r.scaled_noise), spec.snr_db);
  for (double& v : r.scaled_noise) v *= r.noise_scale;
  r.mixed.sample_rate = clean.sample_rate;
  r.mixed.samples.resize(clean.size());
  double peak = 0.0;
  for (std::size_t i = 0; i < clean.size(); ++i) {
    r.mixed.samples[i] = clean.samples[i] + r.scaled_noise[i];
    peak = std::max(peak, std::abs(r.mixed.samples[i]));
  }
  if (peak > 1.0) {
    r.peak_gain = 1.0 / peak;
    for (double& v : r.mixed.samples) v *= r.peak_gain;
  }
  return r;
}

// ---------------------------------------------------------------------------
// WAV I/O

namespace {

std::uint32_t ReadU32(const unsigned char* p) {
  return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 |
         std::uint32_t(p[2]) << 16 | std::uint32_t(p[3]) << 24;
}

std::uint16_t ReadU16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | p[1] << 8);
}

void PutU32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void PutU16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>(v >> 8));
}

}  // namespace

AudioBuffer ReadWav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  Check(in.good(), ErrorCode::kIo, "cannot open " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  Check(bytes.size() >= 12 && std::memcmp(bytes.data(), "RIFF", 4) == 0 &&
            std::memcmp(bytes.data() + 8, "WAVE", 4) == 0,
        ErrorCode::kData, path + ": not a RIFF/WAVE file");
  std::size_t pos = 12;
  bool have_fmt = false;
  AudioBuffer buf;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* hdr = bytes.data() + pos;
    const std::uint32_t size = ReadU32(hdr + 4);
    const std::size_t body = pos + 8;
    Check(body + size <= bytes.size(), ErrorCode::kData,
          path + ": truncated chunk");
    if (std::memcmp(hdr, "fmt ", 4) == 0) {
      Check(size >= 16, ErrorCode::kData, path + ": short fmt chunk");
      const unsigned char* f = bytes.data() + body;
      const std::uint16_t format = ReadU16(f);
      const std::uint16_t channels = ReadU16(f + 2);
      const std::uint32_t rate = ReadU32(f + 4);
      const std::uint16_t bits = ReadU16(f + 14);
      Check(format == 1 && bits == 16, ErrorCode::kData,
            path + ": only 16-bit PCM is supported");
      Check(channels == 1, ErrorCode::kData,
            path + ": expected mono, got " + std::to_string(channels) +
                " channels");
      buf.sample_rate = static_cast<int>(rate);
      RequireRate(buf);
      have_fmt = true;
    } else if (std::memcmp(hdr, "data", 4) == 0) {
      Check(have_fmt, ErrorCode::kData, path + ": data chunk before fmt");
      const std::size_t count = size / 2;
      buf.samples.resize(count);
      for (std::size_t i = 0; i < count; ++i) {
        const auto s = static_cast<std::int16_t>(ReadU16(bytes.data() + body + 2 * i));
        buf.samples[i] = s / 32768.0;
      }
      return buf;
    }
    pos = body + size + (size & 1);
  }
  Fail(ErrorCode::kData, path + ": no data chunk");
}

void WriteWav(const std::string& path, const AudioBuffer& buf) {
  RequireRate(buf);
  const std::uint32_t data_bytes = static_cast<std::uint32_t>(buf.size() * 2);
  std::string out;
  out.reserve(44 + data_bytes);
  out += "RIFF";
  PutU32(out, 36 + data_bytes);
  out += "WAVEfmt ";
  PutU32(out, 16);
  PutU16(out, 1);
  PutU16(out, 1);
  PutU32(out, static_cast<std::uint32_t>(buf.sample_rate));
  PutU32(out, static_cast<std::uint32_t>(buf.sample_rate * 2));
  PutU16(out, 2);
  PutU16(out, 16);
  out += "data";
  PutU32(out, data_bytes);
  for (double v : buf.samples) {
    const long s = std::clamp(std::lround(v * 32768.0), -32768L, 32767L);
    PutU16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(s)));
  }
  std::ofstream f(path, std::ios::binary);
  Check(f.good(), ErrorCode::kIo, "cannot write " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  Check(f.good(), ErrorCode::kIo, "write failed for " + path);
}

}  // namespace deepvox::audio
