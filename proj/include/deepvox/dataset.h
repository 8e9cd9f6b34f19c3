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

// Corpus loading: manifest -> voiced, framed utterances, speaker splits and
// trial lists.

#ifndef DEEPVOX_DATASET_H_
#define DEEPVOX_DATASET_H_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "deepvox/audio.h"
#include "deepvox/evalkit.h"

namespace deepvox::data {

struct Utterance {
  std::string utt_id;
  std::string speaker_id;
  std::string path;  // absolute or relative to the working directory
  std::vector<audio::SpeechFrame> frames;
};

struct Degradation {
  audio::DegradationSpec spec;
  std::uint64_t seed = 0;
};

// Noise seed for one utterance: independent of corpus order.
std::uint64_t UtteranceNoiseSeed(std::uint64_t seed, const std::string& utt_id);

// Reads every manifest entry (paths relative to the manifest directory),
// optionally degrades it, and frames it. Utterances keep manifest order.
std::vector<Utterance> LoadCorpus(const std::string& manifest_path,
                                  const audio::VadOptions& vad = {},
                                  const std::optional<Degradation>& degrade = {});

struct SpeakerSplit {
  std::vector<std::string> train;
  std::vector<std::string> heldout;
};

// Holds out round(fraction * speakers) speakers (at least one, and at least
// two remain for training), chosen by a seeded shuffle.
SpeakerSplit SplitSpeakers(std::span<const Utterance> corpus,
                           double holdout_fraction, std::uint64_t seed);

std::vector<audio::SpeechFrame> FramesOf(std::span<const Utterance> corpus,
                                         std::span<const std::string> speakers);
eval::FrameStore FrameStoreOf(std::span<const Utterance> corpus,
                              std::span<const std::string> speakers = {});

// Every unordered pair of distinct utterances among the given speakers.
std::vector<eval::Trial> AllPairTrials(std::span<const Utterance> corpus,
                                       std::span<const std::string> speakers);

void WriteLines(const std::string& path, std::span<const std::string> lines);
std::vector<std::string> ReadLines(const std::string& path);

}  // namespace deepvox::data

#endif  // DEEPVOX_DATASET_H_
