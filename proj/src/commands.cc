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

#include "commands.h"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>

#include "deepvox/ablation.h"
#include "deepvox/audio.h"
#include "deepvox/common.h"
#include "deepvox/container.h"
#include "deepvox/dataset.h"
#include "deepvox/evalkit.h"
#include "deepvox/model.h"
#include "deepvox/synth.h"
#include "deepvox/trainer.h"

namespace deepvox::cmd {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Options

const std::string& Options::Str(const std::string& key) const {
  const auto it = values_.find(key);
  Check(it != values_.end(), ErrorCode::kInternal,
        command_ + ": option table has no key '" + key + "'");
  return it->second;
}

void Options::Bad(const std::string& key, const std::string& expected) const {
  Fail(ErrorCode::kUsage, command_ + ": option " + key + "='" + Str(key) +
                              "' is not " + expected);
}

double Options::Double(const std::string& key) const {
  const std::string& s = Str(key);
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || *end != '\0' || errno != 0 || !std::isfinite(v))
    Bad(key, "a finite number");
  return v;
}

std::uint64_t Options::U64(const std::string& key) const {
  const std::string& s = Str(key);
  char* end = nullptr;
  errno = 0;
  const unsigned long long v = std::strtoull(s.c_str(), &end, 10);
  if (s.empty() || s[0] == '-' || *end != '\0' || errno != 0)
    Bad(key, "a non-negative integer");
  return v;
}

std::size_t Options::Size(const std::string& key) const {
  return static_cast<std::size_t>(U64(key));
}

bool Options::Bool(const std::string& key) const {
  const std::string& s = Str(key);
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  Bad(key, "a boolean (true/false)");
}

namespace {

// ---------------------------------------------------------------------------
// Shared helpers

std::string Fmt(const char* format, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), format, v);
  return buf;
}

std::string FileSafe(std::string id) {
  std::replace(id.begin(), id.end(), '#', '_');
  return id;
}

void MakeDirs(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  Check(!ec, ErrorCode::kIo, "cannot create directory " + dir + ": " + ec.message());
}

std::ofstream OpenOut(const std::string& path) {
  std::ofstream out(path);
  Check(out.good(), ErrorCode::kIo, "cannot write " + path);
  return out;
}

audio::VadOptions VadFrom(const Options& o) {
  audio::VadOptions v;
  v.energy_floor_db = o.Double("vad.floor_db");
  v.min_segment_ms = o.Double("vad.min_segment_ms");
  return v;
}

std::vector<OptionSpec> VadSpecs() {
  return {{"vad.floor_db", "-30", "VAD energy floor in dB relative to the median window"},
          {"vad.min_segment_ms", "100", "shortest voiced run kept, in ms"}};
}

std::optional<data::Degradation> DegradationFrom(const Options& o) {
  if (o.Str("degrade.noise") == "none") return std::nullopt;
  data::Degradation d;
  d.spec.noise_kind = audio::ParseNoiseKind(o.Str("degrade.noise"));
  d.spec.snr_db = o.Double("degrade.snr");
  d.seed = o.U64("seed");
  return d;
}

model::LoadedModel LoadModelFrom(const Options& o) {
  return model::LoadModel(o.Str("model"));
}

// ---------------------------------------------------------------------------
// synth

void RunSynth(const Options& o) {
  synth::CorpusOptions c;
  c.speakers = o.Size("speakers");
  c.utterances = o.Size("utts");
  c.duration_s = o.Double("duration");
  c.seed = o.U64("seed");
  c.utterance.f0_spread = o.Double("synth.f0_spread");
  c.utterance.formant_spread = o.Double("synth.formant_spread");
  c.utterance.tremolo_depth = o.Double("synth.tremolo_depth");
  const auto entries = synth::WriteCorpus(o.Str("out"), c);
  DVX_LOG(kInfo) << "synth: wrote " << entries.size() << " utterances to " << o.Str("out");
}

// ---------------------------------------------------------------------------
// degrade

void RunDegrade(const Options& o) {
  const std::string manifest = o.Str("manifest");
  const fs::path src_dir = fs::path(manifest).parent_path();
  const fs::path out_dir = o.Str("out");
  audio::DegradationSpec spec;
  spec.noise_kind = audio::ParseNoiseKind(o.Str("noise"));
  spec.snr_db = o.Double("snr");
  const std::uint64_t seed = o.U64("seed");
  auto entries = synth::ReadManifest(manifest);
  for (const auto& e : entries) MakeDirs((out_dir / e.path).parent_path().string());
  ParallelFor(entries.size(), [&](std::size_t i) {
    const auto& e = entries[i];
    const auto clean = audio::ReadWav((src_dir / e.path).string());
    const auto mix = audio::MixNoise(clean, spec, data::UtteranceNoiseSeed(seed, e.utt_id()));
    audio::WriteWav((out_dir / e.path).string(), mix.mixed);
  });
  synth::WriteManifest((out_dir / "manifest.csv").string(), entries);
  DVX_LOG(kInfo) << "degrade: " << entries.size() << " utterances, "
                 << audio::NoiseKindName(spec.noise_kind) << " noise at "
                 << spec.snr_db << " dB";
}

// ---------------------------------------------------------------------------
// train

model::SpeakerModel ModelFrom(const Options& o) {
  std::map<std::string, std::string> meta;
  for (const auto& [k, v] : model::SpeakerModel::Default().Describe()) meta[k] = v;
  meta["model.dvx.layers"] = o.Str("model.dvx.layers");
  meta["model.emb.layers"] = o.Str("model.emb.layers");
  meta["model.emb.dropout"] = o.Str("model.emb.dropout");
  meta["model.emb.dim"] = o.Str("model.emb.dim");
  return model::SpeakerModel::FromDescription(meta);
}

void RunTrain(const Options& o) {
  train::TrainConfig cfg;
  cfg.pretrain_epochs = o.Size("train.pretrain_epochs");
  cfg.verify_epochs = o.Size("train.verify_epochs");
  cfg.scale = o.Double("scale");
  cfg.optimizer = train::ParseOptimizer(o.Str("train.optimizer"));
  cfg.learning_rate = o.Double("train.lr");
  cfg.momentum = o.Double("train.momentum");
  cfg.pretrain_batch = o.Size("train.pretrain_batch");
  cfg.batches_per_epoch = o.Size("train.batches_per_epoch");
  cfg.checkpoint_every = o.Size("train.checkpoint_every");
  cfg.resume_from = o.Str("resume");
  cfg.mining.subjects_per_batch = o.Size("mining.subjects_per_batch");
  cfg.mining.samples_per_subject = o.Size("mining.samples_per_subject");
  cfg.mining.tau_start = o.Double("mining.tau_start");
  cfg.mining.tau_end = o.Double("mining.tau_end");
  cfg.mining.ramp_epochs = o.Size("mining.ramp_epochs");
  cfg.loss.margin_alpha = o.Double("loss.margin");
  cfg.mining.margin_alpha = cfg.loss.margin_alpha;
  cfg.loss.hinge = o.Bool("loss.hinge");
  cfg.loss.reduction = objective::ParseReduction(o.Str("loss.reduction"));
  cfg.seed = o.U64("seed");
  cfg.out_dir = o.Str("out");
  cfg.Validate();
  const auto model = ModelFrom(o);

  const auto corpus = data::LoadCorpus(o.Str("manifest"), VadFrom(o));
  const auto split = data::SplitSpeakers(corpus, o.Double("heldout_fraction"), cfg.seed);
  MakeDirs(cfg.out_dir);
  const fs::path out(cfg.out_dir);
  data::WriteLines((out / "split_train.txt").string(), split.train);
  data::WriteLines((out / "split_heldout.txt").string(), split.heldout);
  const auto trials = data::AllPairTrials(corpus, split.heldout);
  eval::WriteTrials((out / "heldout_trials.csv").string(), trials, false);

  const auto frames = data::FramesOf(corpus, split.train);
  DVX_LOG(kInfo) << "train: " << split.train.size() << " training speakers, "
                 << frames.size() << " frames; " << split.heldout.size()
                 << " held-out speakers, " << trials.size() << " trials";
  train::Trainer trainer(model, cfg);
  trainer.Run(frames, [](const train::EpochRecord& r) {
    DVX_LOG(kInfo) << train::FormatLogLine(r);
  });
  DVX_LOG(kInfo) << "train: model written to " << trainer.FinalModelPath();
}

// ---------------------------------------------------------------------------
// extract

void RunExtract(const Options& o) {
  const auto loaded = LoadModelFrom(o);
  const auto corpus = data::LoadCorpus(o.Str("manifest"), VadFrom(o));
  const fs::path out(o.Str("out"));
  MakeDirs(out.string());
  std::vector<const audio::SpeechFrame*> frames;
  for (const auto& u : corpus)
    for (const auto& f : u.frames) frames.push_back(&f);
  ParallelFor(frames.size(), [&](std::size_t i) {
    const auto& f = *frames[i];
    io::MatrixRecord m;
    m.rows = model::DeepVoxNet::kFeatures;
    m.cols = audio::kUnitsPerFrame;
    m.data = model::ExtractFeatures(loaded.model, loaded.params, f);
    m.subject_id = f.source_id;
    m.clip_id = f.clip_id;
    io::WriteMatrix((out / (FileSafe(f.clip_id) + ".dvfr")).string(), m);
  });
  DVX_LOG(kInfo) << "extract: " << frames.size() << " feature matrices in " << out.string();
}

// ---------------------------------------------------------------------------
// score

void RunScore(const Options& o) {
  const auto loaded = LoadModelFrom(o);
  auto trials = eval::ReadTrials(o.Str("trials"), false);
  Check(!trials.empty(), ErrorCode::kData, "score: trial list " + o.Str("trials") + " is empty");
  const auto corpus = data::LoadCorpus(o.Str("manifest"), VadFrom(o), DegradationFrom(o));
  const auto ids = eval::TrialUtterances(trials);
  const auto store = data::FrameStoreOf(corpus);
  const auto embeddings = eval::EmbedUtterances(loaded.model, loaded.params, store, ids);
  eval::ScoreTrials(trials, embeddings);
  eval::WriteTrials(o.Str("out"), trials, true);
  DVX_LOG(kInfo) << "score: " << trials.size() << " trials over " << ids.size()
                 << " utterances";
}

// ---------------------------------------------------------------------------
// eval

void RunEval(const Options& o) {
  const auto trials = eval::ReadTrials(o.Str("scores"), true);
  const auto report = eval::Evaluate(eval::SplitScores(trials));
  auto out = OpenOut(o.Str("out"));
  out << eval::FormatReport(report);
  Check(out.good(), ErrorCode::kIo, "write failed for " + o.Str("out"));
  const std::string det = o.Str("det").empty() ? o.Str("out") + ".det.csv" : o.Str("det");
  eval::WriteDetCsv(det, report.det);
  DVX_LOG(kInfo) << "eval: EER " << Fmt("%.2f", report.eer.eer_pct) << "% over "
                 << report.genuine << " genuine / " << report.impostor << " impostor trials";
}

// ---------------------------------------------------------------------------
// ablate

std::string MaybeHz(const std::optional<double>& f0) {
  return f0 ? Fmt("%.6f", *f0) : std::string("unvoiced");
}

ablation::BackpropMode ParseBackprop(const std::string& s) {
  if (s == "guided") return ablation::BackpropMode::kGuided;
  if (s == "plain") return ablation::BackpropMode::kPlain;
  Fail(ErrorCode::kUsage, "ablate: mode must be guided or plain, got '" + s + "'");
}

ablation::OverlapAddMode ParseOverlapAdd(const std::string& s) {
  if (s == "windowed") return ablation::OverlapAddMode::kWindowed;
  if (s == "plain") return ablation::OverlapAddMode::kPlain;
  Fail(ErrorCode::kUsage, "ablate: ola must be windowed or plain, got '" + s + "'");
}

void RunAblate(const Options& o) {
  const auto loaded = LoadModelFrom(o);
  const auto corpus = data::LoadCorpus(o.Str("manifest"), VadFrom(o));
  const auto mode = ParseBackprop(o.Str("mode"));
  const auto ola = ParseOverlapAdd(o.Str("ola"));
  ablation::F0Options f0;
  f0.f_min = o.Double("f0.min");
  f0.f_max = o.Double("f0.max");

  std::set<std::string> wanted;
  std::istringstream list(o.Str("utts"));
  for (std::string id; std::getline(list, id, ',');)
    if (!id.empty()) wanted.insert(id);
  std::vector<const audio::SpeechFrame*> frames;
  std::set<std::string> seen;
  for (const auto& u : corpus) {
    if (!wanted.empty() && !wanted.count(u.utt_id)) continue;
    seen.insert(u.utt_id);
    for (const auto& f : u.frames) frames.push_back(&f);
  }
  for (const auto& id : wanted)
    Check(seen.count(id) > 0, ErrorCode::kData, "ablate: utterance '" + id + "' not in manifest");
  frames.resize(std::min(frames.size(), o.Size("frames")));
  Check(!frames.empty(), ErrorCode::kData, "ablate: no frames to analyze");

  const auto& config = loaded.model.deepvox().config();
  const auto dvx_params = model::ParamList<float>(
      loaded.params.begin(), loaded.params.begin() + loaded.model.deepvox().ParamTensorCount());
  struct Result {
    ablation::RelevanceSignal mean;
    ablation::PsdReport psd;
    std::optional<double> f0_in, f0_rel;
  };
  std::vector<Result> results(frames.size());
  ParallelFor(frames.size(), [&](std::size_t i) {
    const auto signals = ablation::FeatureRelevances(config, dvx_params, *frames[i], mode);
    Result& r = results[i];
    r.mean = ablation::MeanOfSignals(signals);
    const auto input = ablation::FrameSignal(*frames[i]);
    const auto rel = ablation::OverlapAdd(r.mean.values, ola);
    r.psd = ablation::PsdOverlap(input, rel);
    r.f0_in = ablation::EstimateF0(input, audio::kSampleRate, f0);
    r.f0_rel = ablation::EstimateF0(rel, audio::kSampleRate, f0);
  });

  const fs::path out(o.Str("out"));
  MakeDirs((out / "relevance").string());
  auto psd = OpenOut((out / "psd.csv").string());
  auto overlap = OpenOut((out / "overlap.csv").string());
  auto f0csv = OpenOut((out / "f0.csv").string());
  psd << "clip_id,freq_hz,input_psd,relevance_psd\n";
  overlap << "clip_id,band_lo_hz,band_hi_hz,overlap\n";
  f0csv << "clip_id,input_f0_hz,relevance_f0_hz\n";
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const auto& f = *frames[i];
    const auto& r = results[i];
    io::MatrixRecord m;
    m.rows = audio::kUnitLength;
    m.cols = audio::kUnitsPerFrame;
    m.data.resize(m.rows * m.cols);
    for (std::size_t j = 0; j < m.cols; ++j)
      for (std::size_t k = 0; k < m.rows; ++k)
        m.data[k * m.cols + j] = static_cast<float>(r.mean.values[j * m.rows + k]);
    m.subject_id = f.source_id;
    m.clip_id = f.clip_id;
    io::WriteMatrix((out / "relevance" / (FileSafe(f.clip_id) + ".dvfr")).string(), m);
    for (std::size_t k = 0; k < r.psd.input.freqs.size(); ++k)
      psd << f.clip_id << ',' << Fmt("%.4f", r.psd.input.freqs[k]) << ','
          << Fmt("%.9g", r.psd.input.power[k]) << ',' << Fmt("%.9g", r.psd.relevance.power[k])
          << '\n';
    for (const auto& b : r.psd.bands)
      overlap << f.clip_id << ',' << Fmt("%g", b.lo_hz) << ',' << Fmt("%g", b.hi_hz) << ','
              << Fmt("%.6f", b.overlap) << '\n';
    f0csv << f.clip_id << ',' << MaybeHz(r.f0_in) << ',' << MaybeHz(r.f0_rel) << '\n';
  }
  Check(psd.good() && overlap.good() && f0csv.good(), ErrorCode::kIo,
        "ablate: failed writing reports in " + out.string());
  DVX_LOG(kInfo) << "ablate: " << frames.size() << " frames analyzed into " << out.string();
}

// ---------------------------------------------------------------------------
// fbank

void RunFbank(const Options& o) {
  const auto loaded = LoadModelFrom(o);
  const auto& config = loaded.model.deepvox().config();
  const std::size_t nfft = o.Size("nfft");
  Check(nfft >= 2 && nfft % 2 == 0, ErrorCode::kUsage, "fbank: nfft must be even");
  const fs::path out(o.Str("out"));
  MakeDirs(out.string());

  const auto kernel = model::EffectiveFilterbank(config, loaded.params);
  auto fb = OpenOut((out / "filterbank.csv").string());
  fb << "out,in,tap,weight\n";
  for (std::size_t c = 0; c < kernel.out; ++c)
    for (std::size_t i = 0; i < kernel.in; ++i)
      for (std::size_t k = 0; k < kernel.taps; ++k)
        fb << c << ',' << i << ',' << k << ',' << Fmt("%.9g", kernel.at(c, i, k)) << '\n';

  auto resp = OpenOut((out / "layer_response.csv").string());
  resp << "layer,freq_hz,magnitude\n";
  for (std::size_t l = 0; l < config.layers.size(); ++l) {
    const auto mag = model::LayerFrequencyResponse(config, loaded.params, l, nfft);
    for (std::size_t b = 0; b < mag.size(); ++b)
      resp << l << ',' << Fmt("%.4f", double(b) * audio::kSampleRate / double(nfft)) << ','
           << Fmt("%.9g", mag[b]) << '\n';
  }
  Check(fb.good() && resp.good(), ErrorCode::kIo, "fbank: failed writing " + out.string());
  DVX_LOG(kInfo) << "fbank: " << kernel.out << " filters of " << kernel.taps << " taps";
}

// ---------------------------------------------------------------------------
// Table

std::vector<CommandSpec> BuildCommands() {
  const auto dvx = model::SpeakerModel::Default().Describe();
  const auto def = [](double v) { return Fmt("%g", v); };
  const synth::UtteranceOptions utt;
  const train::TrainConfig tc;
  std::vector<CommandSpec> c;

  c.push_back({"synth", "Synthesize a speaker corpus with a manifest",
               {{"out", "", "output corpus directory", true},
                {"speakers", "20", "number of speakers"},
                {"utts", "10", "utterances per speaker"},
                {"duration", "3", "utterance length in seconds"},
                {"seed", "7", "master seed"},
                {"synth.f0_spread", def(utt.f0_spread), "per-utterance relative F0 spread"},
                {"synth.formant_spread", def(utt.formant_spread),
                 "per-utterance relative formant spread"},
                {"synth.tremolo_depth", def(utt.tremolo_depth), "amplitude modulation depth"}},
               RunSynth});

  c.push_back({"degrade", "Mix noise into every utterance of a corpus",
               {{"manifest", "", "input manifest", true},
                {"out", "", "output corpus directory", true},
                {"noise", "white", "noise kind: white or harmonic_babble"},
                {"snr", "10", "signal-to-noise ratio in dB"},
                {"seed", "7", "master seed"}},
               RunDegrade});

  std::vector<OptionSpec> train = {
      {"manifest", "", "training corpus manifest", true},
      {"out", "", "output directory for logs, checkpoints and models", true},
      {"seed", "7", "master seed"},
      {"scale", "1", "scale factor for epoch counts and the tau ramp, in [0, 1]"},
      {"heldout_fraction", "0.3", "fraction of speakers held out for evaluation"},
      {"resume", "", "checkpoint to resume from (empty: fresh run)"},
      {"train.pretrain_epochs", std::to_string(tc.pretrain_epochs),
       "identification pretraining epochs before scaling"},
      {"train.verify_epochs", std::to_string(tc.verify_epochs),
       "triplet training epochs before scaling"},
      {"train.optimizer", train::OptimizerName(tc.optimizer), "adam or sgd_momentum"},
      {"train.lr", def(tc.learning_rate), "learning rate"},
      {"train.momentum", def(tc.momentum), "momentum for sgd_momentum"},
      {"train.pretrain_batch", std::to_string(tc.pretrain_batch),
       "frames per identification step"},
      {"train.batches_per_epoch", std::to_string(tc.batches_per_epoch),
       "mined batches per triplet epoch"},
      {"train.checkpoint_every", std::to_string(tc.checkpoint_every),
       "checkpoint interval in epochs (0: phase ends only)"},
      {"mining.subjects_per_batch", std::to_string(tc.mining.subjects_per_batch),
       "speakers per mined batch"},
      {"mining.samples_per_subject", std::to_string(tc.mining.samples_per_subject),
       "frames per speaker in a mined batch"},
      {"mining.tau_start", def(tc.mining.tau_start), "negative quantile at epoch 0"},
      {"mining.tau_end", def(tc.mining.tau_end), "negative quantile after the ramp"},
      {"mining.ramp_epochs", std::to_string(tc.mining.ramp_epochs),
       "tau ramp length before scaling"},
      {"loss.margin", def(tc.loss.margin_alpha), "triplet margin"},
      {"loss.hinge", "true", "clamp triplet terms at zero"},
      {"loss.reduction", objective::ReductionName(tc.loss.reduction), "mean or sum"},
      {"model.dvx.layers", dvx.at("model.dvx.layers"), "filterbank layers in:out:kernel:dilation"},
      {"model.emb.layers", dvx.at("model.emb.layers"), "embedding layers in:out:kernel:dilation"},
      {"model.emb.dropout", def(model::EmbedConfig::Default().dropout_p), "alpha dropout rate"},
      {"model.emb.dim", dvx.at("model.emb.dim"), "embedding size"}};
  for (auto& v : VadSpecs()) train.push_back(v);
  c.push_back({"train", "Pretrain on speaker identity, then train with mined triplets",
               train, RunTrain});

  std::vector<OptionSpec> extract = {{"model", "", "model file", true},
                                     {"manifest", "", "corpus manifest", true},
                                     {"out", "", "output directory for 40x200 DVFR files", true}};
  for (auto& v : VadSpecs()) extract.push_back(v);
  c.push_back({"extract", "Write DeepVOX feature matrices for every frame", extract, RunExtract});

  std::vector<OptionSpec> score = {
      {"model", "", "model file", true},
      {"manifest", "", "corpus manifest", true},
      {"trials", "", "trial list enroll_id,probe_id,label", true},
      {"out", "", "scored trial list", true},
      {"degrade.noise", "none", "noise mixed in before scoring: none, white or harmonic_babble"},
      {"degrade.snr", "10", "SNR in dB when degrade.noise is set"},
      {"seed", "7", "master seed (noise)"}};
  for (auto& v : VadSpecs()) score.push_back(v);
  c.push_back({"score", "Score a trial list by cosine similarity of utterance embeddings",
               score, RunScore});

  c.push_back({"eval", "Compute EER, TMR, minDCF and DET points from scored trials",
               {{"scores", "", "scored trial list", true},
                {"out", "", "metrics report (key=value lines)", true},
                {"det", "", "DET points CSV (empty: <out>.det.csv)"}},
               RunEval});

  std::vector<OptionSpec> ablate = {
      {"model", "", "model file", true},
      {"manifest", "", "corpus manifest", true},
      {"out", "", "output directory", true},
      {"utts", "", "comma-separated utterance ids (empty: all)"},
      {"frames", "10", "maximum number of frames analyzed"},
      {"mode", "guided", "guided or plain backpropagation"},
      {"ola", "windowed", "relevance overlap-add: windowed or plain"},
      {"f0.min", "80", "lowest F0 searched, Hz"},
      {"f0.max", "400", "highest F0 searched, Hz"}};
  for (auto& v : VadSpecs()) ablate.push_back(v);
  c.push_back({"ablate", "Relevance signals, PSD overlap and F0 of the filterbank", ablate,
               RunAblate});

  c.push_back({"fbank", "Effective filterbank taps and per-layer frequency responses",
               {{"model", "", "model file", true},
                {"out", "", "output directory", true},
                {"nfft", "1024", "DFT size for the responses"}},
               RunFbank});
  return c;
}

}  // namespace

const std::vector<CommandSpec>& Commands() {
  static const std::vector<CommandSpec> commands = BuildCommands();
  return commands;
}

const CommandSpec* FindCommand(const std::string& name) {
  for (const auto& c : Commands())
    if (c.name == name) return &c;
  return nullptr;
}

void Run(const std::string& command, const std::map<std::string, std::string>& given) {
  const CommandSpec* spec = FindCommand(command);
  Check(spec != nullptr, ErrorCode::kUsage, "unknown command '" + command + "'");
  std::map<std::string, std::string> values;
  for (const auto& opt : spec->options) values[opt.key] = opt.default_value;
  for (const auto& [k, v] : given) {
    Check(values.count(k) > 0, ErrorCode::kUsage,
          command + ": unknown option '" + k + "'");
    values[k] = v;
  }
  for (const auto& opt : spec->options)
    Check(!opt.required || !values[opt.key].empty(), ErrorCode::kUsage,
          command + ": missing required option '" + opt.key + "'");
  spec->run(Options(command, std::move(values)));
}

}  // namespace deepvox::cmd
