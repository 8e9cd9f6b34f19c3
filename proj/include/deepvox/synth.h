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

// Source-filter speaker synthesis: a jittered glottal impulse train through
// three cascaded two-pole formant resonators.

#ifndef DEEPVOX_SYNTH_H_
#define DEEPVOX_SYNTH_H_

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "deepvox/audio.h"

namespace deepvox::synth {

struct Formant {
  double center_hz = 0.0;
  double bandwidth_hz = 0.0;
};

struct SpeakerProfile {
  double f0_hz = 0.0;
  std::array<Formant, 3> formants;
  double jitter_pct = 1.0;
  std::uint64_t seed = 0;

  friend bool operator==(const SpeakerProfile& a, const SpeakerProfile& b) {
    return a.f0_hz == b.f0_hz && a.jitter_pct == b.jitter_pct &&
           a.seed == b.seed &&
           a.formants[0].center_hz == b.formants[0].center_hz &&
           a.formants[1].center_hz == b.formants[1].center_hz &&
           a.formants[2].center_hz == b.formants[2].center_hz &&
           a.formants[0].bandwidth_hz == b.formants[0].bandwidth_hz &&
           a.formants[1].bandwidth_hz == b.formants[1].bandwidth_hz &&
           a.formants[2].bandwidth_hz == b.formants[2].bandwidth_hz;
  }
};

inline constexpr double kMinF0Hz = 120.0;
inline constexpr double kMaxF0Hz = 300.0;
inline constexpr double kMinF0GapHz = 5.0;

// F0 in [120, 300] Hz, F1 in [300, 900], F2 in [900, 2500],
// F3 in [2500, 3600], bandwidths in [60, 150] Hz.
SpeakerProfile MakeSpeaker(std::uint64_t seed);

// `count` profiles whose F0 values are pairwise at least 5 Hz apart. Draws
// that collide with an earlier speaker are rejected and redrawn.
std::vector<SpeakerProfile> MakeSpeakers(std::uint64_t master_seed,
                                         std::size_t count);

struct UtteranceOptions {
  // Per-utterance relative perturbations, uniform in [-x, x].
  double f0_spread = 0.1;
  double formant_spread = 0.1;
  double tremolo_depth = 0.25;  // slow amplitude modulation depth
};

// Exactly round(duration_s * 8000) samples, peak 0.9. duration_s >= 0.5.
audio::AudioBuffer SynthUtterance(const SpeakerProfile& profile,
                                  double duration_s, std::uint64_t seed,
                                  const UtteranceOptions& options = {});

struct CorpusOptions {
  std::size_t speakers = 20;
  std::size_t utterances = 10;
  double duration_s = 3.0;
  std::uint64_t seed = 7;
  UtteranceOptions utterance;
};

struct ManifestEntry {
  std::string path;  // relative to the manifest's directory
  std::string speaker_id;
  double duration_s = 0.0;

  // Utterance id: file name without directory and extension.
  std::string utt_id() const;
};

std::string SpeakerId(std::size_t index);
std::string UtteranceId(std::size_t speaker, std::size_t utterance);

// Writes <out>/<speaker_id>/<utt_id>.wav and <out>/manifest.csv
// ("path,speaker_id,duration" per line). Returns the manifest entries.
std::vector<ManifestEntry> WriteCorpus(const std::string& out_dir,
                                       const CorpusOptions& options);

std::vector<ManifestEntry> ReadManifest(const std::string& path);
void WriteManifest(const std::string& path,
                   const std::vector<ManifestEntry>& entries);

}  // namespace deepvox::synth

#endif  // DEEPVOX_SYNTH_H_
