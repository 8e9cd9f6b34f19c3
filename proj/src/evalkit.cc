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

#include "deepvox/evalkit.h"

#include <algorithm>
#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "deepvox/common.h"

namespace deepvox::eval {

Label ParseLabel(const std::string& text) {
  if (text == "genuine" || text == "target" || text == "1") return Label::kGenuine;
  if (text == "impostor" || text == "nontarget" || text == "0") return Label::kImpostor;
  Fail(ErrorCode::kData, "unknown trial label '" + text + "'");
}

std::string LabelName(Label label) {
  return label == Label::kGenuine ? "genuine" : "impostor";
}

std::vector<Trial> ReadTrials(const std::string& path, bool with_scores) {
  std::ifstream in(path);
  Check(in.good(), ErrorCode::kIo, "cannot open trial list " + path);
  std::vector<Trial> trials;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line_no == 1 && line.rfind("enroll_id,", 0) == 0) continue;
    std::vector<std::string> f;
    std::istringstream fields(line);
    std::string field;
    while (std::getline(fields, field, ',')) f.push_back(field);
    const std::string where = path + ":" + std::to_string(line_no) + ": ";
    Check(f.size() == (with_scores ? 4u : 3u) || (!with_scores && f.size() == 4),
          ErrorCode::kData,
          where + (with_scores ? "expected enroll_id,probe_id,label,score"
                               : "expected enroll_id,probe_id,label"));
    Trial t;
    t.enroll_id = f[0];
    t.probe_id = f[1];
    try {
      t.label = ParseLabel(f[2]);
    } catch (const Error& e) {
      Fail(ErrorCode::kData, where + e.what());
    }
    if (with_scores) {
      std::size_t pos = 0;
      try {
        t.score = std::stod(f[3], &pos);
      } catch (const std::exception&) {
        pos = 0;
      }
      Check(pos == f[3].size() && pos > 0 && std::isfinite(t.score),
            ErrorCode::kData, where + "bad score '" + f[3] + "'");
      Check(t.score >= -1.0 - 1e-6 && t.score <= 1.0 + 1e-6, ErrorCode::kData,
            where + "score outside [-1, 1]");
    }
    trials.push_back(std::move(t));
  }
  return trials;
}

void WriteTrials(const std::string& path, std::span<const Trial> trials,
                 bool with_scores) {
  std::ofstream out(path);
  Check(out.good(), ErrorCode::kIo, "cannot write " + path);
  out << (with_scores ? "enroll_id,probe_id,label,score\n"
                      : "enroll_id,probe_id,label\n");
  char buf[64];
  for (const auto& t : trials) {
    out << t.enroll_id << ',' << t.probe_id << ',' << LabelName(t.label);
    if (with_scores) {
      std::snprintf(buf, sizeof(buf), "%.9g", t.score);
      out << ',' << buf;
    }
    out << '\n';
  }
  Check(out.good(), ErrorCode::kIo, "write failed for " + path);
}

ScoreSet SplitScores(std::span<const Trial> trials) {
  ScoreSet s;
  for (const auto& t : trials)
    (t.label == Label::kGenuine ? s.genuine : s.impostor).push_back(t.score);
  return s;
}

std::vector<OperatingPoint> SweepThresholds(const ScoreSet& scores) {
  Check(!scores.genuine.empty() && !scores.impostor.empty(), ErrorCode::kData,
        "metrics need at least one genuine and one impostor trial");
  std::vector<double> gen = scores.genuine, imp = scores.impostor;
  for (double v : gen) Check(std::isfinite(v), ErrorCode::kData, "non-finite score");
  for (double v : imp) Check(std::isfinite(v), ErrorCode::kData, "non-finite score");
  std::sort(gen.begin(), gen.end());
  std::sort(imp.begin(), imp.end());
  std::vector<double> thresholds;
  std::merge(gen.begin(), gen.end(), imp.begin(), imp.end(),
             std::back_inserter(thresholds));
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()),
                   thresholds.end());
  thresholds.push_back(std::numeric_limits<double>::infinity());

  const double ng = double(gen.size()), ni = double(imp.size());
  std::vector<OperatingPoint> sweep;
  sweep.reserve(thresholds.size());
  std::size_t gi = 0, ii = 0;  // counts of scores strictly below threshold
  for (double t : thresholds) {
    while (gi < gen.size() && gen[gi] < t) ++gi;
    while (ii < imp.size() && imp[ii] < t) ++ii;
    sweep.push_back({t, double(imp.size() - ii) / ni, double(gi) / ng});
  }
  return sweep;
}

EerResult EerFromSweep(std::span<const OperatingPoint> sweep, EerMode mode) {
  Check(!sweep.empty(), ErrorCode::kData, "empty threshold sweep");
  std::size_t k = 0;
  while (k < sweep.size() && sweep[k].p_miss - sweep[k].p_fa < 0.0) ++k;
  Check(k < sweep.size(), ErrorCode::kInternal, "FMR and FNMR never cross");
  const OperatingPoint& hi = sweep[k];
  const double d_hi = hi.p_miss - hi.p_fa;
  if (d_hi == 0.0 || k == 0) return {100.0 * hi.p_fa, hi.threshold};
  const OperatingPoint& lo = sweep[k - 1];
  const double d_lo = lo.p_miss - lo.p_fa;
  if (mode == EerMode::kStep) {
    const OperatingPoint& p = (-d_lo < d_hi) ? lo : hi;
    return {50.0 * (p.p_fa + p.p_miss), p.threshold};
  }
  const double a = d_lo / (d_lo - d_hi);
  const double eer = lo.p_fa + a * (hi.p_fa - lo.p_fa);
  const double thr = std::isfinite(hi.threshold)
                         ? lo.threshold + a * (hi.threshold - lo.threshold)
                         : lo.threshold;
  return {100.0 * eer, thr};
}

EerResult ComputeEer(const ScoreSet& scores, EerMode mode) {
  const auto sweep = SweepThresholds(scores);
  return EerFromSweep(sweep, mode);
}

double TmrAtFmr(const ScoreSet& scores, double fmr_target) {
  Check(!scores.impostor.empty(), ErrorCode::kData, "no impostor trials");
  Check(fmr_target >= 1.0 / double(scores.impostor.size()) && fmr_target <= 1.0,
        ErrorCode::kUsage,
        "FMR target " + std::to_string(fmr_target) + " is infeasible with " +
            std::to_string(scores.impostor.size()) + " impostor trials");
  for (const auto& p : SweepThresholds(scores))
    if (p.p_fa <= fmr_target) return 1.0 - p.p_miss;
  Fail(ErrorCode::kInternal, "sweep never reaches FMR 0");
}

DcfResult MinDcf(const ScoreSet& scores, double p_target, double c_miss,
                 double c_fa) {
  Check(p_target > 0.0 && p_target < 1.0, ErrorCode::kUsage,
        "P_target must be in (0, 1)");
  Check(c_miss > 0.0 && c_fa > 0.0, ErrorCode::kUsage, "DCF costs must be positive");
  DcfResult best;
  best.raw = std::numeric_limits<double>::infinity();
  for (const auto& p : SweepThresholds(scores)) {
    const double dcf = c_miss * p.p_miss * p_target + c_fa * p.p_fa * (1.0 - p_target);
    if (dcf < best.raw) {
      best.raw = dcf;
      best.threshold = p.threshold;
    }
  }
  best.normalized = best.raw / std::min(c_miss * p_target, c_fa * (1.0 - p_target));
  return best;
}

double Probit(double p) {
  static const boost::math::normal_distribution<double> standard;
  return boost::math::quantile(standard, std::clamp(p, 1e-9, 1.0 - 1e-9));
}

std::vector<DetPoint> DetPoints(const ScoreSet& scores) {
  std::vector<DetPoint> det;
  for (const auto& p : SweepThresholds(scores))
    det.push_back({p.threshold, p.p_fa, p.p_miss, Probit(p.p_fa), Probit(p.p_miss)});
  return det;
}

MetricsReport Evaluate(const ScoreSet& scores) {
  MetricsReport r;
  r.genuine = scores.genuine.size();
  r.impostor = scores.impostor.size();
  const auto sweep = SweepThresholds(scores);
  for (double v : scores.genuine) r.mean_genuine += v;
  for (double v : scores.impostor) r.mean_impostor += v;
  r.mean_genuine /= double(r.genuine);
  r.mean_impostor /= double(r.impostor);
  r.eer = EerFromSweep(sweep);
  for (double target : {0.01, 0.10})
    if (target >= 1.0 / double(r.impostor)) r.tmr_at_fmr[target] = TmrAtFmr(scores, target);
  for (double p : {0.001, 0.01}) r.min_dcf[p] = MinDcf(scores, p);
  r.det = DetPoints(scores);
  return r;
}

std::string FormatReport(const MetricsReport& r) {
  std::ostringstream out;
  char buf[128];
  out << "genuine_trials=" << r.genuine << '\n';
  out << "impostor_trials=" << r.impostor << '\n';
  std::snprintf(buf, sizeof(buf), "eer_pct=%.2f\n", r.eer.eer_pct);
  out << buf;
  std::snprintf(buf, sizeof(buf), "eer_pct_full=%.17g\n", r.eer.eer_pct);
  out << buf;
  std::snprintf(buf, sizeof(buf), "eer_threshold=%.9g\n", r.eer.threshold);
  out << buf;
  for (double target : {0.01, 0.10}) {
    const int pct = static_cast<int>(std::lround(target * 100));
    auto it = r.tmr_at_fmr.find(target);
    if (it == r.tmr_at_fmr.end()) {
      std::snprintf(buf, sizeof(buf), "tmr_pct_at_fmr_%dpct=infeasible\n", pct);
    } else {
      std::snprintf(buf, sizeof(buf), "tmr_pct_at_fmr_%dpct=%.4f\n", pct,
                    100.0 * it->second);
    }
    out << buf;
  }
  for (const auto& [p, d] : r.min_dcf) {
    std::snprintf(buf, sizeof(buf), "min_dcf_p%g_raw=%.6g\nmin_dcf_p%g_norm=%.6g\n",
                  p, d.raw, p, d.normalized);
    out << buf;
  }
  std::snprintf(buf, sizeof(buf), "mean_genuine_score=%.6f\nmean_impostor_score=%.6f\n",
                r.mean_genuine, r.mean_impostor);
  out << buf;
  out << "det_points=" << r.det.size() << '\n';
  return out.str();
}

std::map<std::string, std::string> ParseReport(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    Check(eq != std::string::npos, ErrorCode::kData, "malformed report line '" + line + "'");
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

void WriteDetCsv(const std::string& path, std::span<const DetPoint> det) {
  std::ofstream out(path);
  Check(out.good(), ErrorCode::kIo, "cannot write " + path);
  out << "p_fa,p_miss,probit_fa,probit_miss\n";
  char buf[160];
  for (const auto& d : det) {
    std::snprintf(buf, sizeof(buf), "%.9g,%.9g,%.9g,%.9g\n", d.p_fa, d.p_miss,
                  d.probit_fa, d.probit_miss);
    out << buf;
  }
}

// ---------------------------------------------------------------------------
// Scoring

std::vector<float> MeanEmbedding(std::span<const std::vector<float>> frames) {
  Check(!frames.empty(), ErrorCode::kData, "no frame embeddings to average");
  std::vector<double> acc(frames[0].size(), 0.0);
  for (const auto& f : frames) {
    Check(f.size() == acc.size(), ErrorCode::kUsage, "embedding sizes differ");
    for (std::size_t i = 0; i < f.size(); ++i) acc[i] += f[i];
  }
  std::vector<float> out(acc.size());
  for (std::size_t i = 0; i < acc.size(); ++i)
    out[i] = static_cast<float>(acc[i] / double(frames.size()));
  return out;
}

EmbeddingStore EmbedUtterances(const model::SpeakerModel& model,
                               const model::ParamList<float>& params,
                               const FrameStore& frames,
                               std::span<const std::string> ids) {
  std::vector<std::string> wanted(ids.begin(), ids.end());
  if (wanted.empty())
    for (const auto& [id, _] : frames) wanted.push_back(id);
  std::string missing;
  std::vector<const audio::SpeechFrame*> flat;
  std::vector<std::size_t> owner;
  for (std::size_t u = 0; u < wanted.size(); ++u) {
    auto it = frames.find(wanted[u]);
    if (it == frames.end() || it->second.empty()) {
      missing += " " + wanted[u];
      continue;
    }
    for (const auto& f : it->second) {
      flat.push_back(&f);
      owner.push_back(u);
    }
  }
  Check(missing.empty(), ErrorCode::kData,
        "utterances missing or without voiced frames:" + missing);
  std::vector<std::vector<float>> emb(flat.size());
  ParallelFor(flat.size(), [&](std::size_t i) {
    emb[i] = model::EmbedFrame(model, params, *flat[i]);
  });
  EmbeddingStore out;
  std::size_t i = 0;
  while (i < flat.size()) {
    std::size_t j = i;
    while (j < flat.size() && owner[j] == owner[i]) ++j;
    out[wanted[owner[i]]] = MeanEmbedding(std::span(emb).subspan(i, j - i));
    i = j;
  }
  return out;
}

double CosineScore(std::span<const float> a, std::span<const float> b) {
  Check(a.size() == b.size(), ErrorCode::kUsage, "embedding sizes differ");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += double(a[i]) * b[i];
    na += double(a[i]) * a[i];
    nb += double(b[i]) * b[i];
  }
  Check(na > 0.0 && nb > 0.0, ErrorCode::kNumeric, "degenerate embedding");
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

void ScoreTrials(std::vector<Trial>& trials, const EmbeddingStore& embeddings) {
  std::set<std::string> missing;
  for (const auto& t : trials)
    for (const auto* id : {&t.enroll_id, &t.probe_id})
      if (!embeddings.count(*id)) missing.insert(*id);
  if (!missing.empty()) {
    std::string msg = "no embedding for utterances:";
    for (const auto& id : missing) msg += " " + id;
    Fail(ErrorCode::kData, msg);
  }
  for (auto& t : trials)
    t.score = CosineScore(embeddings.at(t.enroll_id), embeddings.at(t.probe_id));
}

std::vector<std::string> TrialUtterances(std::span<const Trial> trials) {
  std::set<std::string> ids;
  for (const auto& t : trials) {
    ids.insert(t.enroll_id);
    ids.insert(t.probe_id);
  }
  return {ids.begin(), ids.end()};
}

}  // namespace deepvox::eval
