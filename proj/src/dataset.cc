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

#include "deepvox/dataset.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "deepvox/common.h"
#include "deepvox/synth.h"

namespace deepvox::data {

std::uint64_t UtteranceNoiseSeed(std::uint64_t seed, const std::string& utt_id) {
  return SubstreamSeed(SubstreamSeed(seed, "degrade"), utt_id);
}

std::vector<Utterance> LoadCorpus(const std::string& manifest_path,
                                  const audio::VadOptions& vad,
                                  const std::optional<Degradation>& degrade) {
  namespace fs = std::filesystem;
  const auto entries = synth::ReadManifest(manifest_path);
  const fs::path root = fs::path(manifest_path).parent_path();
  std::vector<Utterance> out(entries.size());
  ParallelFor(entries.size(), [&](std::size_t i) {
    const auto& e = entries[i];
    Utterance& u = out[i];
    u.utt_id = e.utt_id();
    u.speaker_id = e.speaker_id;
    const fs::path p(e.path);
    u.path = (p.is_absolute() ? p : root / p).string();
    audio::AudioBuffer buf = audio::ReadWav(u.path);
    if (degrade) {
      buf = audio::MixNoise(buf, degrade->spec,
                            UtteranceNoiseSeed(degrade->seed, u.utt_id))
                .mixed;
    }
    u.frames = audio::FramesFromAudio(buf, u.speaker_id, u.utt_id, vad);
  });
  std::set<std::string> ids;
  for (const auto& u : out)
    Check(ids.insert(u.utt_id).second, ErrorCode::kData,
          "duplicate utterance id " + u.utt_id + " in " + manifest_path);
  return out;
}

SpeakerSplit SplitSpeakers(std::span<const Utterance> corpus,
                           double holdout_fraction, std::uint64_t seed) {
  Check(holdout_fraction > 0.0 && holdout_fraction < 1.0, ErrorCode::kUsage,
        "holdout fraction must be in (0, 1)");
  std::set<std::string> unique;
  for (const auto& u : corpus) unique.insert(u.speaker_id);
  std::vector<std::string> speakers(unique.begin(), unique.end());
  Check(speakers.size() >= 3, ErrorCode::kData,
        "a train/held-out split needs at least 3 speakers");
  const auto n = static_cast<std::size_t>(
      std::llround(holdout_fraction * double(speakers.size())));
  const std::size_t held = std::clamp<std::size_t>(n, 1, speakers.size() - 2);
  std::mt19937_64 gen(SubstreamSeed(seed, "split"));
  std::shuffle(speakers.begin(), speakers.end(), gen);
  SpeakerSplit s;
  s.heldout.assign(speakers.begin(), speakers.begin() + held);
  s.train.assign(speakers.begin() + held, speakers.end());
  std::sort(s.heldout.begin(), s.heldout.end());
  std::sort(s.train.begin(), s.train.end());
  return s;
}

namespace {

bool Selected(std::span<const std::string> speakers, const std::string& id) {
  return speakers.empty() ||
         std::find(speakers.begin(), speakers.end(), id) != speakers.end();
}

}  // namespace

std::vector<audio::SpeechFrame> FramesOf(std::span<const Utterance> corpus,
                                         std::span<const std::string> speakers) {
  std::vector<audio::SpeechFrame> out;
  for (const auto& u : corpus)
    if (Selected(speakers, u.speaker_id))
      out.insert(out.end(), u.frames.begin(), u.frames.end());
  return out;
}

eval::FrameStore FrameStoreOf(std::span<const Utterance> corpus,
                              std::span<const std::string> speakers) {
  eval::FrameStore store;
  for (const auto& u : corpus)
    if (Selected(speakers, u.speaker_id)) store[u.utt_id] = u.frames;
  return store;
}

std::vector<eval::Trial> AllPairTrials(std::span<const Utterance> corpus,
                                       std::span<const std::string> speakers) {
  std::vector<const Utterance*> chosen;
  for (const auto& u : corpus)
    if (Selected(speakers, u.speaker_id) && !u.frames.empty()) chosen.push_back(&u);
  std::vector<eval::Trial> trials;
  for (std::size_t i = 0; i < chosen.size(); ++i)
    for (std::size_t j = i + 1; j < chosen.size(); ++j) {
      eval::Trial t;
      t.enroll_id = chosen[i]->utt_id;
      t.probe_id = chosen[j]->utt_id;
      t.label = chosen[i]->speaker_id == chosen[j]->speaker_id
                    ? eval::Label::kGenuine
                    : eval::Label::kImpostor;
      trials.push_back(std::move(t));
    }
  return trials;
}

void WriteLines(const std::string& path, std::span<const std::string> lines) {
  std::ofstream out(path);
  Check(out.good(), ErrorCode::kIo, "cannot write " + path);
  for (const auto& l : lines) out << l << '\n';
}

std::vector<std::string> ReadLines(const std::string& path) {
  std::ifstream in(path);
  Check(in.good(), ErrorCode::kIo, "cannot open " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) lines.push_back(line);
  return lines;
}

}  // namespace deepvox::data
