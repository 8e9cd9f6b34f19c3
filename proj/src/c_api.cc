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

#include "deepvox/deepvox.h"

#include <algorithm>
#include <cmath>
#include <exception>
#include <fstream>
#include <map>
#include <new>
#include <string>

#include "commands.h"
#include "deepvox/audio.h"
#include "deepvox/common.h"
#include "deepvox/evalkit.h"
#include "deepvox/model.h"

struct dvx_config {
  std::map<std::string, std::string> values;
};

struct dvx_model {
  deepvox::model::LoadedModel loaded;
};

namespace {

using deepvox::ErrorCode;

thread_local std::string g_last_error;

dvx_status Record(dvx_status status, const std::string& message) {
  g_last_error = message;
  return status;
}

// Runs fn, translating exceptions into status codes.
template <typename Fn>
dvx_status Guard(Fn&& fn) {
  try {
    fn();
    return DVX_OK;
  } catch (const deepvox::Error& e) {
    return Record(static_cast<dvx_status>(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return Record(DVX_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return Record(DVX_ERR_INTERNAL, e.what());
  } catch (...) {
    return Record(DVX_ERR_INTERNAL, "unknown exception");
  }
}

void NotNull(const void* p, const char* what) {
  deepvox::Check(p != nullptr, ErrorCode::kUsage, std::string(what) + " is NULL");
}

deepvox::audio::SpeechFrame FrameFrom(const double* values) {
  deepvox::audio::SpeechFrame f;
  f.values.assign(values,
                  values + deepvox::audio::kUnitLength * deepvox::audio::kUnitsPerFrame);
  return f;
}

}  // namespace

extern "C" {

const char* dvx_version(void) { return "0.1.0"; }

const char* dvx_last_error(void) { return g_last_error.c_str(); }

const char* dvx_status_name(dvx_status status) {
  switch (status) {
    case DVX_OK: return "ok";
    case DVX_ERR_USAGE: return "usage error";
    case DVX_ERR_DATA: return "data error";
    case DVX_ERR_IO: return "i/o error";
    case DVX_ERR_NUMERIC: return "numeric error";
    case DVX_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

void dvx_set_threads(int threads) { deepvox::SetThreadCount(threads); }

int dvx_threads(void) { return deepvox::ThreadCount(); }

dvx_status dvx_set_log_level(const char* level) {
  return Guard([&] {
    NotNull(level, "level");
    const std::string v(level);
    if (v == "error") deepvox::SetLogLevel(deepvox::LogLevel::kError);
    else if (v == "info") deepvox::SetLogLevel(deepvox::LogLevel::kInfo);
    else if (v == "debug") deepvox::SetLogLevel(deepvox::LogLevel::kDebug);
    else deepvox::Fail(ErrorCode::kUsage, "unknown log level '" + v + "' (error|info|debug)");
  });
}

dvx_status dvx_config_create(dvx_config** out) {
  return Guard([&] {
    NotNull(out, "out");
    *out = new dvx_config;
  });
}

void dvx_config_free(dvx_config* config) { delete config; }

dvx_status dvx_config_set(dvx_config* config, const char* key, const char* value) {
  return Guard([&] {
    NotNull(config, "config");
    NotNull(key, "key");
    NotNull(value, "value");
    deepvox::Check(*key != '\0', ErrorCode::kUsage, "empty option key");
    config->values[key] = value;
  });
}

dvx_status dvx_config_load(dvx_config* config, const char* path, int keep_existing) {
  return Guard([&] {
    NotNull(config, "config");
    NotNull(path, "path");
    std::ifstream in(path);
    deepvox::Check(in.good(), ErrorCode::kIo, std::string("cannot open config ") + path);
    std::string line;
    for (std::size_t n = 1; std::getline(in, line); ++n) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      const auto first = line.find_first_not_of(" \t");
      if (first == std::string::npos || line[first] == '#') continue;
      const auto eq = line.find('=');
      const std::string where = std::string(path) + ":" + std::to_string(n) + ": ";
      deepvox::Check(eq != std::string::npos, ErrorCode::kUsage, where + "expected key=value");
      auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t");
        const auto e = s.find_last_not_of(" \t");
        return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
      };
      const std::string key = trim(line.substr(0, eq));
      deepvox::Check(!key.empty(), ErrorCode::kUsage, where + "empty key");
      if (keep_existing && config->values.count(key)) continue;
      config->values[key] = trim(line.substr(eq + 1));
    }
  });
}

dvx_status dvx_config_unset(dvx_config* config, const char* key) {
  return Guard([&] {
    NotNull(config, "config");
    NotNull(key, "key");
    config->values.erase(key);
  });
}

dvx_status dvx_config_get(const dvx_config* config, const char* key, const char** value) {
  return Guard([&] {
    NotNull(config, "config");
    NotNull(key, "key");
    NotNull(value, "value");
    const auto it = config->values.find(key);
    *value = it == config->values.end() ? nullptr : it->second.c_str();
  });
}

size_t dvx_command_count(void) { return deepvox::cmd::Commands().size(); }

const char* dvx_command_name(size_t index) {
  const auto& c = deepvox::cmd::Commands();
  return index < c.size() ? c[index].name.c_str() : nullptr;
}

const char* dvx_command_help(const char* command) {
  const auto* spec = command ? deepvox::cmd::FindCommand(command) : nullptr;
  return spec ? spec->help.c_str() : nullptr;
}

size_t dvx_option_count(const char* command) {
  const auto* spec = command ? deepvox::cmd::FindCommand(command) : nullptr;
  return spec ? spec->options.size() : 0;
}

dvx_status dvx_option_info(const char* command, size_t index, const char** key,
                           const char** default_value, const char** help, int* required) {
  return Guard([&] {
    NotNull(command, "command");
    const auto* spec = deepvox::cmd::FindCommand(command);
    deepvox::Check(spec != nullptr, ErrorCode::kUsage,
                   std::string("unknown command '") + command + "'");
    deepvox::Check(index < spec->options.size(), ErrorCode::kUsage,
                   "option index out of range");
    const auto& o = spec->options[index];
    if (key) *key = o.key.c_str();
    if (default_value) *default_value = o.default_value.c_str();
    if (help) *help = o.help.c_str();
    if (required) *required = o.required ? 1 : 0;
  });
}

dvx_status dvx_run(const char* command, const dvx_config* config) {
  return Guard([&] {
    NotNull(command, "command");
    static const dvx_config empty;
    deepvox::cmd::Run(command, (config ? config : &empty)->values);
  });
}

dvx_status dvx_model_load(const char* path, dvx_model** out) {
  return Guard([&] {
    NotNull(path, "path");
    NotNull(out, "out");
    *out = new dvx_model{deepvox::model::LoadModel(path)};
  });
}

dvx_status dvx_model_init(unsigned long long seed, dvx_model** out) {
  return Guard([&] {
    NotNull(out, "out");
    auto model = deepvox::model::SpeakerModel::Default();
    auto params = model.Init<float>(seed);
    *out = new dvx_model{{std::move(model), std::move(params)}};
  });
}

void dvx_model_free(dvx_model* model) { delete model; }

size_t dvx_model_embedding_dim(const dvx_model* model) {
  return model ? model->loaded.model.embed().config().embedding_dim : 0;
}

dvx_status dvx_model_save(const dvx_model* model, const char* path) {
  return Guard([&] {
    NotNull(model, "model");
    NotNull(path, "path");
    deepvox::model::SaveModel(path, model->loaded.model, model->loaded.params);
  });
}

dvx_status dvx_frame_from_clip(const double* clip, size_t samples, double* frame) {
  return Guard([&] {
    NotNull(clip, "clip");
    NotNull(frame, "frame");
    deepvox::Check(samples == deepvox::audio::kClipSamples, ErrorCode::kUsage,
                   "a clip must hold exactly 16000 samples");
    deepvox::audio::AudioBuffer buf;
    buf.samples.assign(clip, clip + samples);
    const auto f = deepvox::audio::FrameClip(buf);
    std::copy(f.values.begin(), f.values.end(), frame);
  });
}

dvx_status dvx_extract_features(const dvx_model* model, const double* frame,
                                float* features) {
  return Guard([&] {
    NotNull(model, "model");
    NotNull(frame, "frame");
    NotNull(features, "features");
    const auto v = deepvox::model::ExtractFeatures(model->loaded.model, model->loaded.params,
                                                   FrameFrom(frame));
    std::copy(v.begin(), v.end(), features);
  });
}

dvx_status dvx_embed_frame(const dvx_model* model, const double* frame, float* embedding) {
  return Guard([&] {
    NotNull(model, "model");
    NotNull(frame, "frame");
    NotNull(embedding, "embedding");
    const auto v = deepvox::model::EmbedFrame(model->loaded.model, model->loaded.params,
                                              FrameFrom(frame));
    std::copy(v.begin(), v.end(), embedding);
  });
}

dvx_status dvx_cosine(const float* a, const float* b, size_t dim, double* score) {
  return Guard([&] {
    NotNull(a, "a");
    NotNull(b, "b");
    NotNull(score, "score");
    *score = deepvox::eval::CosineScore({a, dim}, {b, dim});
  });
}

dvx_status dvx_evaluate_scores(const double* genuine, size_t n_genuine,
                               const double* impostor, size_t n_impostor,
                               dvx_metrics* out) {
  return Guard([&] {
    NotNull(out, "out");
    deepvox::Check((genuine || n_genuine == 0) && (impostor || n_impostor == 0),
                   ErrorCode::kUsage, "score array is NULL");
    deepvox::eval::ScoreSet s;
    s.genuine.assign(genuine, genuine + n_genuine);
    s.impostor.assign(impostor, impostor + n_impostor);
    for (double v : s.genuine)
      deepvox::Check(std::isfinite(v), ErrorCode::kData, "non-finite genuine score");
    for (double v : s.impostor)
      deepvox::Check(std::isfinite(v), ErrorCode::kData, "non-finite impostor score");
    const auto r = deepvox::eval::Evaluate(s);
    auto tmr = [&](double target) {
      const auto it = r.tmr_at_fmr.find(target);
      return it == r.tmr_at_fmr.end() ? -1.0 : 100.0 * it->second;
    };
    out->eer_pct = r.eer.eer_pct;
    out->eer_threshold = r.eer.threshold;
    out->tmr_pct_at_fmr_1pct = tmr(0.01);
    out->tmr_pct_at_fmr_10pct = tmr(0.1);
    out->min_dcf_p001 = r.min_dcf.at(0.001).normalized;
    out->min_dcf_p01 = r.min_dcf.at(0.01).normalized;
  });
}

}  // extern "C"
