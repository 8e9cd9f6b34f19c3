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

// Verification scoring and metrics. A trial is accepted when its score is
// at or above the threshold; the sweep visits every distinct score and +inf.

#ifndef DEEPVOX_EVALKIT_H_
#define DEEPVOX_EVALKIT_H_

#include <map>
#include <span>
#include <string>
#include <vector>

#include "deepvox/audio.h"
#include "deepvox/model.h"

namespace deepvox::eval {

enum class Label { kGenuine, kImpostor };

Label ParseLabel(const std::string& text);
std::string LabelName(Label label);

struct Trial {
  std::string enroll_id;
  std::string probe_id;
  Label label = Label::kGenuine;
  double score = 0.0;
};

// "enroll_id,probe_id,label[,score]" with an optional header line.
std::vector<Trial> ReadTrials(const std::string& path, bool with_scores);
void WriteTrials(const std::string& path, std::span<const Trial> trials,
                 bool with_scores);

struct ScoreSet {
  std::vector<double> genuine;
  std::vector<double> impostor;
};

ScoreSet SplitScores(std::span<const Trial> trials);

struct OperatingPoint {
  double threshold = 0.0;
  double p_fa = 0.0;    // false match rate
  double p_miss = 0.0;  // false non-match rate
};

// One point per distinct score plus +inf, by increasing threshold. Throws
// kData unless both classes are present.
std::vector<OperatingPoint> SweepThresholds(const ScoreSet& scores);

enum class EerMode { kLinear, kStep };

struct EerResult {
  double eer_pct = 0.0;
  double threshold = 0.0;
};

// Crossing of FMR and FNMR: linear interpolation between the two sweep
// points that bracket the sign change (kLinear), or the mean of FMR and
// FNMR at the first point past it (kStep).
EerResult ComputeEer(const ScoreSet& scores, EerMode mode = EerMode::kLinear);
EerResult EerFromSweep(std::span<const OperatingPoint> sweep,
                       EerMode mode = EerMode::kLinear);

// 1 - FNMR at the smallest threshold whose FMR <= target. Throws kUsage when
// the target is below 1 / impostor count.
double TmrAtFmr(const ScoreSet& scores, double fmr_target);

struct DcfResult {
  double raw = 0.0;
  double normalized = 0.0;
  double threshold = 0.0;
};

DcfResult MinDcf(const ScoreSet& scores, double p_target, double c_miss = 1.0,
                 double c_fa = 1.0);

struct DetPoint {
  double threshold = 0.0;
  double p_fa = 0.0, p_miss = 0.0;
  double probit_fa = 0.0, probit_miss = 0.0;  // standard normal deviates
};

std::vector<DetPoint> DetPoints(const ScoreSet& scores);
// Normal deviate of p, with p clamped to [1e-9, 1 - 1e-9].
double Probit(double p);

struct MetricsReport {
  std::size_t genuine = 0, impostor = 0;
  double mean_genuine = 0.0, mean_impostor = 0.0;
  EerResult eer;
  std::map<double, double> tmr_at_fmr;  // target -> TMR; absent if infeasible
  std::map<double, DcfResult> min_dcf;  // p_target -> result
  std::vector<DetPoint> det;
};

MetricsReport Evaluate(const ScoreSet& scores);
std::string FormatReport(const MetricsReport& report);  // key=value lines
std::map<std::string, std::string> ParseReport(const std::string& text);
void WriteDetCsv(const std::string& path, std::span<const DetPoint> det);

// ---------------------------------------------------------------------------
// Scoring

using FrameStore = std::map<std::string, std::vector<audio::SpeechFrame>>;
using EmbeddingStore = std::map<std::string, std::vector<float>>;

// Mean of frame embeddings.
std::vector<float> MeanEmbedding(std::span<const std::vector<float>> frames);

// Utterance embeddings for the requested ids (all ids when empty). Throws
// kData listing ids that are missing or have no frames.
EmbeddingStore EmbedUtterances(const model::SpeakerModel& model,
                               const model::ParamList<float>& params,
                               const FrameStore& frames,
                               std::span<const std::string> ids = {});

double CosineScore(std::span<const float> a, std::span<const float> b);

// Fills trial scores; throws kData listing utterances without embeddings.
void ScoreTrials(std::vector<Trial>& trials, const EmbeddingStore& embeddings);

std::vector<std::string> TrialUtterances(std::span<const Trial> trials);

}  // namespace deepvox::eval

#endif  // DEEPVOX_EVALKIT_H_
