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

#ifndef DEEPVOX_COMMON_H_
#define DEEPVOX_COMMON_H_

#include <cstdint>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>

namespace deepvox {

// Error categories. The numeric values are the C API status codes.
enum class ErrorCode : int {
  kUsage = 1,
  kData = 2,
  kIo = 3,
  kNumeric = 4,
  kInternal = 5,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void Fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

inline void Check(bool cond, ErrorCode code, const std::string& what) {
  if (!cond) Fail(code, what);
}

// ---------------------------------------------------------------------------
// Logging. Verbosity comes from DEEPVOX_LOG={error|info|debug}; default info.

enum class LogLevel { kError = 0, kInfo = 1, kDebug = 2 };

LogLevel CurrentLogLevel();
void SetLogLevel(LogLevel level);
void LogLine(LogLevel level, const std::string& line);

class LogMessage {
 public:
  explicit LogMessage(LogLevel level) : level_(level) {}
  ~LogMessage() { LogLine(level_, stream_.str()); }
  std::ostringstream& stream() { return stream_; }

 private:
  LogLevel level_;
  std::ostringstream stream_;
};

#define DVX_LOG(level)                                                \
  if (::deepvox::LogLevel::level > ::deepvox::CurrentLogLevel()) {    \
  } else                                                              \
    ::deepvox::LogMessage(::deepvox::LogLevel::level).stream()

// ---------------------------------------------------------------------------
// Seeds. Every random decision derives its generator seed from the master
// seed plus a named substream and integer coordinates, so changing one module
// never reshuffles another module's randomness.

std::uint64_t MixSeed(std::uint64_t a, std::uint64_t b);
std::uint64_t SubstreamSeed(std::uint64_t master, std::string_view stream);

template <typename... Rest>
std::uint64_t DeriveSeed(std::uint64_t seed, Rest... rest) {
  ((seed = MixSeed(seed, static_cast<std::uint64_t>(rest))), ...);
  return seed;
}

// ---------------------------------------------------------------------------
// Parallelism. Work is split over a fixed number of threads; callers that
// need bitwise-stable results write per-index outputs and reduce in order.

int ThreadCount();
void SetThreadCount(int threads);  // <= 0 selects hardware concurrency
void ParallelFor(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace deepvox

#endif  // DEEPVOX_COMMON_H_
