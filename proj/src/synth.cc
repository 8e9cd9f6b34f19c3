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

#include "deepvox/synth.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include "deepvox/common.h"

namespace deepvox::synth {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double Uniform(std::mt19937_64& gen, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(gen);
}

// Two-pole resonator with unit DC gain:
//   y[n] = A x[n] + B y[n-1] + C y[n-2]
void Resonate(std::vector<double>& x, double center_hz, double bandwidth_hz) {
  const double r = std::exp(-std::numbers::pi * bandwidth_hz / audio::kSampleRate);
  const double b = 2.0 * r * std::cos(kTwoPi * center_hz / audio::kSampleRate);
  const double c = -r * r;
  const double a = 1.0 - b - c;
  double y1 = 0.0, y2 = 0.0;
  for (double& v : x) {
    const double y = a * v + b * y1 + c * y2;
    y2 = y1;
    y1 = y;
    v = y;
  }
}

}  // namespace

SpeakerProfile MakeSpeaker(std::uint64_t seed) {
  std::mt19937_64 gen(MixSeed(seed, 0x5eed));
  SpeakerProfile p;
  p.seed = seed;
  p.f0_hz = Uniform(gen, kMinF0Hz, kMaxF0Hz);
  p.formants[0].center_hz = Uniform(gen, 300.0, 900.0);
  p.formants[1].center_hz = Uniform(gen, 900.0, 2500.0);
  p.formants[2].center_hz = Uniform(gen, 2500.0, 3600.0);
  for (auto& f : p.formants) f.bandwidth_hz = Uniform(gen, 60.0, 150.0);
  p.jitter_pct = 1.0;
  return p;
}

std::vector<SpeakerProfile> MakeSpeakers(std::uint64_t master_seed,
                                         std::size_t count) {
  const std::uint64_t base = SubstreamSeed(master_seed, "synth.speaker");
  std::vector<SpeakerProfile> out;
  for (std::size_t i = 0; i < count; ++i) {
    for (std::uint64_t attempt = 0;; ++attempt) {
      Check(attempt < 10000, ErrorCode::kUsage,
            "cannot place " + std::to_string(count) +
                " speakers 5 Hz apart in the F0 range");
      SpeakerProfile p = MakeSpeaker(DeriveSeed(base, i, attempt));
      const bool clear = std::all_of(out.begin(), out.end(), [&](const auto& q) {
        return std::abs(q.f0_hz - p.f0_hz) >= kMinF0GapHz;
      });
      if (clear) {
        out.push_back(p);
        break;
      }
    }
  }
  return out;
}

audio::AudioBuffer SynthUtterance(const SpeakerProfile& profile,
                                  double duration_s, std::uint64_t seed,
                                  const UtteranceOptions& options) {
  Check(duration_s >= 0.5, ErrorCode::kUsage,
        "utterance duration must be at least 0.5 s");
  const auto n = static_cast<std::size_t>(
      std::llround(duration_s * audio::kSampleRate));
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  const double f0 =
      profile.f0_hz * (1.0 + Uniform(gen, -options.f0_spread, options.f0_spread));
  const double period = audio::kSampleRate / f0;
  std::vector<double> x(n + 1, 0.0);
  // Glottal pulses at fractional positions, split linearly between the two
  // neighboring samples.
  double t = Uniform(gen, 0.0, period);
  while (t < static_cast<double>(n)) {
    const auto i = static_cast<std::size_t>(t);
    const double frac = t - static_cast<double>(i);
    x[i] += 1.0 - frac;
    x[i + 1] += frac;
    t += period * (1.0 + profile.jitter_pct / 100.0 * normal(gen));
  }
  x.resize(n);

  for (const auto& f : profile.formants) {
    const double shift = Uniform(gen, -options.formant_spread, options.formant_spread);
    Resonate(x, f.center_hz * (1.0 + shift), f.bandwidth_hz);
  }

  const double rate_hz = Uniform(gen, 3.0, 5.0);
  const double phase = Uniform(gen, 0.0, kTwoPi);
  double peak = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double time = static_cast<double>(i) / audio::kSampleRate;
    x[i] *= 1.0 - options.tremolo_depth *
                      (0.5 + 0.5 * std::sin(kTwoPi * rate_hz * time + phase));
    peak = std::max(peak, std::abs(x[i]));
  }
  Check(peak > 0.0, ErrorCode::kInternal, "synthesized silence");
  for (double& v : x) v *= 0.9 / peak;

  audio::AudioBuffer buf;
  buf.samples = std::move(x);
  return buf;
}

std::string ManifestEntry::utt_id() const {
  return std::filesystem::path(path).stem().string();
}

std::string SpeakerId(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "spk%03zu", index);
  return buf;
}

std::string UtteranceId(std::size_t speaker, std::size_t utterance) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "_u%02zu", utterance);
  return SpeakerId(speaker) + buf;
}

std::vector<ManifestEntry> WriteCorpus(const std::string& out_dir,
                                       const CorpusOptions& options) {
  Check(options.speakers > 0 && options.utterances > 0, ErrorCode::kUsage,
        "corpus needs at least one speaker and one utterance");
  namespace fs = std::filesystem;
  const auto profiles = MakeSpeakers(options.seed, options.speakers);
  const std::uint64_t utt_base = SubstreamSeed(options.seed, "synth.utterance");

  std::vector<ManifestEntry> entries(options.speakers * options.utterances);
  for (std::size_t s = 0; s < options.speakers; ++s)
    fs::create_directories(fs::path(out_dir) / SpeakerId(s));
  ParallelFor(entries.size(), [&](std::size_t k) {
    const std::size_t s = k / options.utterances, u = k % options.utterances;
    const auto buf = SynthUtterance(profiles[s], options.duration_s,
                                    DeriveSeed(utt_base, s, u), options.utterance);
    ManifestEntry& e = entries[k];
    e.speaker_id = SpeakerId(s);
    e.path = e.speaker_id + "/" + UtteranceId(s, u) + ".wav";
    e.duration_s = buf.duration_s();
    audio::WriteWav((fs::path(out_dir) / e.path).string(), buf);
  });
  WriteManifest((fs::path(out_dir) / "manifest.csv").string(), entries);
  return entries;
}

std::vector<ManifestEntry> ReadManifest(const std::string& path) {
  std::ifstream in(path);
  Check(in.good(), ErrorCode::kIo, "cannot open manifest " + path);
  std::vector<ManifestEntry> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream fields(line);
    ManifestEntry e;
    std::string duration;
    const bool ok = std::getline(fields, e.path, ',') &&
                    std::getline(fields, e.speaker_id, ',') &&
                    std::getline(fields, duration);
    Check(ok && !e.path.empty() && !e.speaker_id.empty(), ErrorCode::kData,
          path + ":" + std::to_string(line_no) + ": expected path,speaker_id,duration");
    try {
      e.duration_s = std::stod(duration);
    } catch (const std::exception&) {
      Fail(ErrorCode::kData,
           path + ":" + std::to_string(line_no) + ": bad duration '" + duration + "'");
    }
    out.push_back(std::move(e));
  }
  return out;
}

void WriteManifest(const std::string& path,
                   const std::vector<ManifestEntry>& entries) {
  std::ofstream out(path);
  Check(out.good(), ErrorCode::kIo, "cannot write manifest " + path);
  char buf[32];
  for (const auto& e : entries) {
    std::snprintf(buf, sizeof(buf), "%.3f", e.duration_s);
    out << e.path << ',' << e.speaker_id << ',' << buf << '\n';
  }
}

}  // namespace deepvox::synth
