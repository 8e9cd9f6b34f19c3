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

#include "deepvox/trainer.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "deepvox/common.h"

namespace deepvox::train {

using model::ParamList;
using nd::Graph;
using nd::Shape;
using nd::Tensor;
using nd::Var;

OptimizerKind ParseOptimizer(const std::string& name) {
  if (name == "adam") return OptimizerKind::kAdam;
  if (name == "sgd_momentum" || name == "sgd") return OptimizerKind::kSgdMomentum;
  Fail(ErrorCode::kUsage, "unknown optimizer '" + name + "' (adam|sgd_momentum)");
}

std::string OptimizerName(OptimizerKind kind) {
  return kind == OptimizerKind::kAdam ? "adam" : "sgd_momentum";
}

std::size_t ScaleEpochs(std::size_t epochs, double scale) {
  if (scale == 0.0 || epochs == 0) return 0;
  return std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(double(epochs) * scale)));
}

void TrainConfig::Validate() const {
  Check(std::isfinite(scale) && scale >= 0.0 && scale <= 1.0, ErrorCode::kUsage,
        "scale factor must be in [0, 1]");
  Check(learning_rate > 0.0 && std::isfinite(learning_rate), ErrorCode::kUsage,
        "learning rate must be positive");
  Check(momentum >= 0.0 && momentum < 1.0, ErrorCode::kUsage,
        "momentum must be in [0, 1)");
  Check(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 &&
            adam_beta2 < 1.0 && adam_eps > 0.0,
        ErrorCode::kUsage, "bad Adam hyperparameters");
  Check(pretrain_batch >= 1 && batches_per_epoch >= 1, ErrorCode::kUsage,
        "batch sizes must be positive");
  mining.Validate();
  loss.Validate();
}

std::size_t TrainConfig::ScaledPretrainEpochs() const {
  return ScaleEpochs(pretrain_epochs, scale);
}

std::size_t TrainConfig::ScaledVerifyEpochs() const {
  return ScaleEpochs(verify_epochs, scale);
}

mining::MiningConfig TrainConfig::ScaledMining() const {
  mining::MiningConfig m = mining;
  m.ramp_epochs = ScaleEpochs(mining.ramp_epochs, scale);
  m.margin_alpha = loss.margin_alpha;
  return m;
}

// ---------------------------------------------------------------------------
// Log lines

namespace {

std::string Real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::string FormatLogLine(const EpochRecord& r) {
  std::string line = "epoch=" + std::to_string(r.epoch) + " phase=" + r.phase +
                     " loss=" + Real(r.loss);
  if (r.phase == "ver") {
    line += " tau=" + Real(r.tau) + " mean_neg_sim=" + Real(r.mean_neg_sim) +
            " mean_pos_sim=" + Real(r.mean_pos_sim) +
            " triplets=" + std::to_string(r.triplets);
  } else {
    line += " tau=na mean_neg_sim=na acc=" + Real(r.accuracy);
  }
  return line;
}

EpochRecord ParseLogLine(const std::string& line) {
  std::map<std::string, std::string> kv;
  std::istringstream in(line);
  std::string tok;
  while (in >> tok) {
    const auto eq = tok.find('=');
    Check(eq != std::string::npos, ErrorCode::kData, "bad log token '" + tok + "'");
    kv[tok.substr(0, eq)] = tok.substr(eq + 1);
  }
  auto num = [&](const std::string& key) {
    auto it = kv.find(key);
    if (it == kv.end() || it->second == "na") return 0.0;
    return std::stod(it->second);
  };
  Check(kv.count("epoch") && kv.count("phase") && kv.count("loss"), ErrorCode::kData,
        "log line lacks epoch/phase/loss: " + line);
  EpochRecord r;
  r.phase = kv["phase"];
  r.epoch = std::stoul(kv["epoch"]);
  r.loss = num("loss");
  r.tau = num("tau");
  r.mean_neg_sim = num("mean_neg_sim");
  r.mean_pos_sim = num("mean_pos_sim");
  r.accuracy = num("acc");
  r.triplets = static_cast<std::size_t>(num("triplets"));
  return r;
}

// ---------------------------------------------------------------------------
// Optimizer

Optimizer::Optimizer(const TrainConfig& cfg, const ParamList<float>& params)
    : cfg_(cfg) {
  for (const auto& p : params) {
    names_.push_back(p.name);
    m_.emplace_back(p.value.shape());
    if (cfg_.optimizer == OptimizerKind::kAdam) v_.emplace_back(p.value.shape());
  }
}

void Optimizer::Step(ParamList<float>& params, const std::vector<Tensor<float>>& grads) {
  Check(params.size() == names_.size() && grads.size() == names_.size(),
        ErrorCode::kInternal, "optimizer state does not match the parameters");
  ++t_;
  const double lr = cfg_.learning_rate;
  if (cfg_.optimizer == OptimizerKind::kAdam) {
    const double b1 = cfg_.adam_beta1, b2 = cfg_.adam_beta2;
    const double c1 = 1.0 - std::pow(b1, double(t_));
    const double c2 = 1.0 - std::pow(b2, double(t_));
    for (std::size_t k = 0; k < params.size(); ++k) {
      float* p = params[k].value.data();
      float* m = m_[k].data();
      float* v = v_[k].data();
      const float* g = grads[k].data();
      for (std::size_t i = 0; i < params[k].value.size(); ++i) {
        const double gi = g[i];
        const double mi = b1 * m[i] + (1.0 - b1) * gi;
        const double vi = b2 * v[i] + (1.0 - b2) * gi * gi;
        m[i] = static_cast<float>(mi);
        v[i] = static_cast<float>(vi);
        const double step = lr * (mi / c1) / (std::sqrt(vi / c2) + cfg_.adam_eps);
        p[i] = static_cast<float>(p[i] - step);
      }
    }
  } else {
    const double mu = cfg_.momentum;
    for (std::size_t k = 0; k < params.size(); ++k) {
      float* p = params[k].value.data();
      float* m = m_[k].data();
      const float* g = grads[k].data();
      for (std::size_t i = 0; i < params[k].value.size(); ++i) {
        const double vi = mu * m[i] + g[i];
        m[i] = static_cast<float>(vi);
        p[i] = static_cast<float>(p[i] - lr * vi);
      }
    }
  }
}

void Optimizer::Save(io::CheckpointRecord& rec) const {
  rec.meta["opt.kind"] = OptimizerName(cfg_.optimizer);
  rec.meta["opt.t"] = std::to_string(t_);
  auto put = [&](const std::string& prefix, const std::vector<Tensor<float>>& ts) {
    for (std::size_t k = 0; k < ts.size(); ++k) {
      io::NamedBlock b;
      b.name = prefix + names_[k];
      for (auto d : ts[k].shape()) b.dims.push_back(static_cast<std::uint32_t>(d));
      b.data = ts[k].storage();
      rec.blocks.push_back(std::move(b));
    }
  };
  put("opt.m.", m_);
  put("opt.v.", v_);
}

void Optimizer::Load(const io::CheckpointRecord& rec, const ParamList<float>& params) {
  auto it = rec.meta.find("opt.kind");
  Check(it != rec.meta.end() && it->second == OptimizerName(cfg_.optimizer),
        ErrorCode::kData, "checkpoint optimizer does not match the configuration");
  t_ = std::stoull(rec.meta.at("opt.t"));
  auto get = [&](const std::string& prefix, std::vector<Tensor<float>>& ts) {
    for (std::size_t k = 0; k < ts.size(); ++k) {
      const io::NamedBlock* b = rec.Find(prefix + names_[k]);
      Check(b != nullptr && b->data.size() == params[k].value.size(),
            ErrorCode::kData, "checkpoint lacks optimizer state " + prefix + names_[k]);
      ts[k] = Tensor<float>(params[k].value.shape(), b->data);
    }
  };
  get("opt.m.", m_);
  get("opt.v.", v_);
}

// ---------------------------------------------------------------------------
// Trainer

namespace {

void AddInto(std::vector<Tensor<float>>& acc, const std::vector<Tensor<float>>& g) {
  if (acc.empty()) {
    acc = g;
    return;
  }
  for (std::size_t k = 0; k < acc.size(); ++k) {
    float* a = acc[k].data();
    const float* b = g[k].data();
    for (std::size_t i = 0; i < acc[k].size(); ++i) a[i] += b[i];
  }
}

void ScaleAll(std::vector<Tensor<float>>& acc, double factor) {
  const auto f = static_cast<float>(factor);
  for (auto& t : acc)
    for (auto& v : t.values()) v *= f;
}

ParamList<float> MakeHead(std::size_t classes, std::size_t dim, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(double(dim)));
  Tensor<float> w(Shape{classes, dim});
  for (auto& v : w.values()) v = static_cast<float>(normal(gen));
  return {{"head.w", std::move(w)}, {"head.b", Tensor<float>(Shape{classes})}};
}

struct FrameGrad {
  std::vector<Tensor<float>> grads;
  double loss = 0.0;
  bool correct = false;
};

}  // namespace

Trainer::Trainer(model::SpeakerModel model, TrainConfig config)
    : model_(std::move(model)), cfg_(std::move(config)) {
  cfg_.Validate();
}

std::string Trainer::LogPath() const { return cfg_.out_dir + "/train.log"; }

std::string Trainer::CheckpointPath(const std::string& phase, std::size_t epoch) const {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "/checkpoints/ckpt_%s_%04zu.dvck", phase.c_str(), epoch);
  return cfg_.out_dir + buf;
}

std::string Trainer::PretrainModelPath() const {
  return cfg_.out_dir + "/model_pretrain.dvck";
}

std::string Trainer::FinalModelPath() const { return cfg_.out_dir + "/model.dvck"; }

TrainResult Trainer::Run(std::span<const audio::SpeechFrame> frames,
                         const std::function<void(const EpochRecord&)>& on_epoch) {
  namespace fs = std::filesystem;
  Check(!frames.empty(), ErrorCode::kData, "no training frames");
  const bool write = !cfg_.out_dir.empty();
  if (write) fs::create_directories(fs::path(cfg_.out_dir) / "checkpoints");

  // Subject labels in sorted id order.
  std::vector<std::string> subjects;
  for (const auto& f : frames) subjects.push_back(f.source_id);
  std::vector<std::string> classes(subjects.begin(), subjects.end());
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
  std::map<std::string, std::size_t> class_of;
  for (std::size_t i = 0; i < classes.size(); ++i) class_of[classes[i]] = i;

  const std::size_t n_model = model_.ParamTensorCount();
  const std::size_t dim = model_.embed().config().embedding_dim;
  const std::size_t pre_epochs = cfg_.ScaledPretrainEpochs();
  const std::size_t ver_epochs = cfg_.ScaledVerifyEpochs();
  mining::MiningConfig mcfg = cfg_.ScaledMining();

  ParamList<float> params = model_.Init<float>(cfg_.seed);
  ParamList<float> head =
      MakeHead(classes.size(), dim, SubstreamSeed(cfg_.seed, "init.head"));
  std::string phase = "id";
  std::size_t start = 0;

  auto join = [&] {
    ParamList<float> all = params;
    all.insert(all.end(), head.begin(), head.end());
    return all;
  };
  ParamList<float> all = join();
  Optimizer opt(cfg_, all);

  if (!cfg_.resume_from.empty()) {
    const io::CheckpointRecord rec = io::ReadCheckpoint(cfg_.resume_from);
    Check(rec.meta.count("phase") && rec.meta.count("epoch") && rec.meta.count("seed"),
          ErrorCode::kData, "checkpoint lacks phase/epoch/seed metadata");
    Check(rec.meta.at("seed") == std::to_string(cfg_.seed), ErrorCode::kUsage,
          "checkpoint was written with seed " + rec.meta.at("seed"));
    phase = rec.meta.at("phase");
    start = std::stoul(rec.meta.at("epoch"));
    if (phase == "id") {
      all = model::FromBlocks(rec, all);
      opt.Load(rec, all);
    } else {
      Check(phase == "ver", ErrorCode::kData, "unknown checkpoint phase " + phase);
      params = model::FromBlocks(rec, params);
      opt = Optimizer(cfg_, params);
      opt.Load(rec, params);
    }
    DVX_LOG(kInfo) << "resuming " << phase << " phase at epoch " << start << " from "
                   << cfg_.resume_from;
  }

  std::ofstream log_file;
  if (write) {
    log_file.open(LogPath(), cfg_.resume_from.empty() ? std::ios::trunc : std::ios::app);
    Check(log_file.good(), ErrorCode::kIo, "cannot write " + LogPath());
  }
  TrainResult result;
  std::string last_checkpoint = cfg_.resume_from;
  auto emit = [&](const EpochRecord& r) {
    const std::string line = FormatLogLine(r);
    DVX_LOG(kInfo) << line;
    if (write) log_file << line << '\n' << std::flush;
    result.log.push_back(r);
    if (on_epoch) on_epoch(r);
  };
  auto save = [&](const std::string& ph, std::size_t next_epoch,
                  const ParamList<float>& ps, const Optimizer& o, double tau) {
    if (!write) return;
    io::CheckpointRecord rec;
    rec.meta = model_.Describe();
    rec.meta["phase"] = ph;
    rec.meta["epoch"] = std::to_string(next_epoch);
    rec.meta["seed"] = std::to_string(cfg_.seed);
    rec.meta["tau"] = Real(tau);
    rec.blocks = model::ToBlocks(ps);
    o.Save(rec);
    last_checkpoint = CheckpointPath(ph, next_epoch);
    io::WriteCheckpoint(last_checkpoint, rec);
  };
  auto guarded = [&](const std::string& ph, std::size_t epoch, const auto& body) {
    try {
      body();
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kNumeric) throw;
      Fail(ErrorCode::kNumeric,
           "training diverged in " + ph + " epoch " + std::to_string(epoch) + " (" +
               e.what() + "); last good checkpoint: " +
               (last_checkpoint.empty() ? std::string("none") : last_checkpoint));
    }
  };
  auto due = [&](std::size_t done, std::size_t total) {
    return done == total || (cfg_.checkpoint_every > 0 && done % cfg_.checkpoint_every == 0);
  };

  // ---- identification pretraining
  if (phase == "id") {
    const std::uint64_t order_base = SubstreamSeed(cfg_.seed, "pretrain.order");
    const std::uint64_t drop_base = SubstreamSeed(cfg_.seed, "dropout.id");
    for (std::size_t e = start; e < pre_epochs; ++e) {
      EpochRecord rec;
      rec.phase = "id";
      rec.epoch = e;
      guarded("id", e, [&] {
        std::vector<std::size_t> order(frames.size());
        std::iota(order.begin(), order.end(), 0);
        std::mt19937_64 gen(DeriveSeed(order_base, e));
        std::shuffle(order.begin(), order.end(), gen);
        double loss_sum = 0.0;
        std::size_t correct = 0;
        const std::size_t bsz = cfg_.pretrain_batch;
        for (std::size_t s = 0; s * bsz < order.size(); ++s) {
          const std::size_t b0 = s * bsz;
          const std::size_t nb = std::min(bsz, order.size() - b0);
          std::vector<FrameGrad> out(nb);
          ParallelFor(nb, [&](std::size_t i) {
            const audio::SpeechFrame& fr = frames[order[b0 + i]];
            Graph<float> g;
            const auto vars = model::BindParams(g, all, true);
            Var x = g.Input(model::FrameTensor<float>(fr));
            Var emb = model_.Embed(g, x, std::span(vars).first(n_model), true,
                                   DeriveSeed(drop_base, e, s, i));
            Var logits = nd::Linear(g, emb, vars[n_model], vars[n_model + 1]);
            const std::size_t label = class_of.at(fr.source_id);
            Var loss = nd::SoftmaxCrossEntropy(g, logits, std::span(&label, 1));
            g.Backward(loss);
            FrameGrad& fg = out[i];
            fg.loss = g.value(loss).item();
            const auto& lv = g.value(logits).storage();
            fg.correct = static_cast<std::size_t>(
                             std::max_element(lv.begin(), lv.end()) - lv.begin()) == label;
            for (Var v : vars) fg.grads.push_back(g.grad(v));
          });
          std::vector<Tensor<float>> sum;
          for (auto& fg : out) {
            AddInto(sum, fg.grads);
            loss_sum += fg.loss;
            correct += fg.correct;
          }
          ScaleAll(sum, 1.0 / double(nb));
          opt.Step(all, sum);
        }
        rec.loss = loss_sum / double(frames.size());
        rec.accuracy = double(correct) / double(frames.size());
      });
      emit(rec);
      if (due(e + 1, pre_epochs)) save("id", e + 1, all, opt, 0.0);
    }
    params.assign(all.begin(), all.begin() + n_model);
    phase = "ver";
    start = 0;
    opt = Optimizer(cfg_, params);
    result.pretrained = params;
    if (write) model::SaveModel(PretrainModelPath(), model_, params);
  }

  // ---- verification training
  std::set<std::string> qualified;
  {
    std::map<std::string, std::size_t> counts;
    for (const auto& s : subjects) ++counts[s];
    for (const auto& [s, c] : counts)
      if (c >= mcfg.samples_per_subject) qualified.insert(s);
  }
  if (start < ver_epochs) {
    Check(qualified.size() >= 2, ErrorCode::kData,
          "verification training needs two subjects with " +
              std::to_string(mcfg.samples_per_subject) + " frames each");
    if (qualified.size() < mcfg.subjects_per_batch) {
      DVX_LOG(kInfo) << "only " << qualified.size()
                     << " subjects qualify; batches use all of them instead of "
                     << mcfg.subjects_per_batch;
      mcfg.subjects_per_batch = qualified.size();
    }
  }
  const std::uint64_t batch_base = SubstreamSeed(cfg_.seed, "mining.batch");
  const std::uint64_t drop_base = SubstreamSeed(cfg_.seed, "dropout.ver");
  for (std::size_t e = start; e < ver_epochs; ++e) {
    EpochRecord rec;
    rec.phase = "ver";
    rec.epoch = e;
    rec.tau = mining::TauSchedule(e, mcfg);
    guarded("ver", e, [&] {
      double loss_sum = 0.0, neg_sum = 0.0, pos_sum = 0.0;
      for (std::size_t b = 0; b < cfg_.batches_per_epoch; ++b) {
        const mining::Batch batch =
            mining::BuildBatch(subjects, mcfg, DeriveSeed(batch_base, e, b));
        const std::size_t n = batch.items.size();
        auto seed_of = [&](std::size_t slot) { return DeriveSeed(drop_base, e, b, slot); };

        std::vector<std::vector<float>> emb(n);
        ParallelFor(n, [&](std::size_t i) {
          Graph<float> g;
          const auto vars = model::BindParams(g, params, false);
          Var x = g.Input(model::FrameTensor<float>(frames[batch.items[i]]));
          emb[i] = g.value(model_.Embed(g, x, vars, true, seed_of(i))).storage();
        });

        const auto mined = mining::MineTriplets(emb, batch.labels, rec.tau,
                                                mcfg.margin_alpha);
        Check(!mined.empty(), ErrorCode::kData, "mining produced no triplets");
        const auto stats = mining::Summarize(mined, mcfg.margin_alpha);
        const auto idx = mining::ToIndices(mined);
        const auto lg = objective::TripletLossWithGrad(emb, idx, cfg_.loss);

        std::vector<std::vector<Tensor<float>>> grads(n);
        ParallelFor(n, [&](std::size_t i) {
          const float* row = lg.grad.data() + i * dim;
          if (std::all_of(row, row + dim, [](float v) { return v == 0.0f; })) return;
          Graph<float> g;
          const auto vars = model::BindParams(g, params, true);
          Var x = g.Input(model::FrameTensor<float>(frames[batch.items[i]]));
          Var out = model_.Embed(g, x, vars, true, seed_of(i));
          g.Backward(out, Tensor<float>(Shape{1, dim}, std::vector<float>(row, row + dim)));
          for (Var v : vars) grads[i].push_back(g.grad(v));
        });
        std::vector<Tensor<float>> sum;
        for (auto& gi : grads)
          if (!gi.empty()) AddInto(sum, gi);
        if (sum.empty())
          for (const auto& p : params) sum.emplace_back(p.value.shape());
        opt.Step(params, sum);

        loss_sum += lg.loss;
        neg_sum += stats.mean_neg_similarity;
        pos_sum += stats.mean_pos_similarity;
        rec.triplets += stats.triplets;
      }
      const double nb = double(cfg_.batches_per_epoch);
      rec.loss = loss_sum / nb;
      rec.mean_neg_sim = neg_sum / nb;
      rec.mean_pos_sim = pos_sum / nb;
    });
    emit(rec);
    if (due(e + 1, ver_epochs)) save("ver", e + 1, params, opt, rec.tau);
  }

  result.params = params;
  if (write) model::SaveModel(FinalModelPath(), model_, params);
  return result;
}

}  // namespace deepvox::train
