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

// deepvox command-line tool. Subcommands and their options come from the
// library's command table, so flags, config keys and defaults stay in sync.

#include <CLI11.hpp>

#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include "deepvox/deepvox.h"

namespace {

int ExitCode(dvx_status status) {
  switch (status) {
    case DVX_OK: return 0;
    case DVX_ERR_USAGE: return 1;
    default: return 2;
  }
}

int Report(dvx_status status) {
  if (status != DVX_OK)
    std::fprintf(stderr, "deepvox: %s: %s\n", dvx_status_name(status), dvx_last_error());
  return ExitCode(status);
}

struct Subcommand {
  std::string name;
  CLI::App* app = nullptr;
  std::map<std::string, CLI::Option*> options;
  std::map<std::string, std::string> values;
  std::string config_path;
  int threads = 0;
};

// Flags given on the command line win over the config file; threads is
// handled here rather than by the command.
dvx_status Execute(Subcommand& sub) {
  dvx_config* cfg = nullptr;
  dvx_status st = dvx_config_create(&cfg);
  if (st != DVX_OK) return st;
  for (const auto& [key, opt] : sub.options)
    if (opt->count() > 0 && st == DVX_OK)
      st = dvx_config_set(cfg, key.c_str(), sub.values[key].c_str());
  int threads = sub.threads;
  if (st == DVX_OK && !sub.config_path.empty()) {
    st = dvx_config_load(cfg, sub.config_path.c_str(), 1);
    const char* file_threads = nullptr;
    if (st == DVX_OK) st = dvx_config_get(cfg, "threads", &file_threads);
    if (st == DVX_OK && file_threads != nullptr) {
      if (sub.app->get_option("--threads")->count() == 0) {
        try {
          threads = std::stoi(file_threads);
        } catch (const std::exception&) {
          std::fprintf(stderr, "deepvox: config threads='%s' is not an integer\n", file_threads);
          dvx_config_free(cfg);
          return DVX_ERR_USAGE;
        }
      }
      st = dvx_config_unset(cfg, "threads");
    }
  }
  if (st == DVX_OK) {
    dvx_set_threads(threads);
    st = dvx_run(sub.name.c_str(), cfg);
  }
  dvx_config_free(cfg);
  return st;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DeepVOX speaker verification toolkit"};
  app.set_version_flag("--version", std::string(dvx_version()));
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.footer("Environment: DEEPVOX_LOG=error|info|debug (default info).\n"
             "Exit status: 0 success, 1 usage error, 2 data or runtime error.");

  std::vector<Subcommand> subs(dvx_command_count());
  for (std::size_t c = 0; c < subs.size(); ++c) {
    Subcommand& sub = subs[c];
    sub.name = dvx_command_name(c);
    sub.app = app.add_subcommand(sub.name, dvx_command_help(sub.name.c_str()));
    sub.app->add_option("--config", sub.config_path,
                        "key=value file; any option below may be set there, flags win")
        ->check(CLI::ExistingFile);
    sub.app->add_option("--threads", sub.threads, "worker threads, 0 uses all cores")
        ->default_val(0);
    const std::size_t n = dvx_option_count(sub.name.c_str());
    for (std::size_t i = 0; i < n; ++i) {
      const char *key, *def, *help;
      int required = 0;
      dvx_option_info(sub.name.c_str(), i, &key, &def, &help, &required);
      sub.values[key] = def;
      CLI::Option* opt = sub.app->add_option(std::string("--") + key, sub.values[key], help);
      if (required) {
        opt->type_name("TEXT (required)");
      } else {
        opt->default_str(*def ? def : "\"\"");
      }
      sub.options[key] = opt;
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }
  for (auto& sub : subs)
    if (sub.app->parsed()) return Report(Execute(sub));
  return 1;
}
