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

// Pipeline commands behind the C interface and the CLI. Each command has a
// fixed table of dotted option keys with defaults.

#ifndef DEEPVOX_SRC_COMMANDS_H_
#define DEEPVOX_SRC_COMMANDS_H_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace deepvox::cmd {

struct OptionSpec {
  std::string key;
  std::string default_value;  // empty when required
  std::string help;
  bool required = false;
};

class Options {
 public:
  Options(std::string command, std::map<std::string, std::string> values)
      : command_(std::move(command)), values_(std::move(values)) {}

  const std::string& Str(const std::string& key) const;
  double Double(const std::string& key) const;
  std::size_t Size(const std::string& key) const;
  std::uint64_t U64(const std::string& key) const;
  bool Bool(const std::string& key) const;

 private:
  [[noreturn]] void Bad(const std::string& key, const std::string& expected) const;
  std::string command_;
  std::map<std::string, std::string> values_;
};

struct CommandSpec {
  std::string name;
  std::string help;
  std::vector<OptionSpec> options;
  void (*run)(const Options&) = nullptr;
};

const std::vector<CommandSpec>& Commands();
// nullptr for unknown names.
const CommandSpec* FindCommand(const std::string& name);

// Rejects unknown keys and missing required options, fills defaults, runs.
void Run(const std::string& command, const std::map<std::string, std::string>& given);

}  // namespace deepvox::cmd

#endif  // DEEPVOX_SRC_COMMANDS_H_
