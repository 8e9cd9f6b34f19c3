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

// Binary containers. All integers are little-endian u32, all reals
// little-endian IEEE-754 binary32.
//
//   DVFR  "DVFR" rows cols f32[rows*cols] (row-major) meta_len meta_utf8
//         meta is "subject=<id>\nclip=<id>\n"
//   DVEM  "DVEM" dim f32[dim] prov_len prov_utf8
//   DVCK  "DVCK" version meta_len meta_utf8 block_count
//         { name_len name_utf8 rank dims[rank] f32[prod(dims)] }*  crc32
//         crc32 (zlib polynomial) covers every preceding byte.

#ifndef DEEPVOX_CONTAINER_H_
#define DEEPVOX_CONTAINER_H_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace deepvox::io {

struct MatrixRecord {
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
  std::vector<float> data;  // row-major
  std::string subject_id;
  std::string clip_id;
};

std::string EncodeMatrix(const MatrixRecord& m);
MatrixRecord DecodeMatrix(const std::string& bytes);
void WriteMatrix(const std::string& path, const MatrixRecord& m);
MatrixRecord ReadMatrix(const std::string& path);

struct EmbeddingRecord {
  std::vector<float> values;
  std::string provenance;
};

std::string EncodeEmbedding(const EmbeddingRecord& e);
EmbeddingRecord DecodeEmbedding(const std::string& bytes);
void WriteEmbedding(const std::string& path, const EmbeddingRecord& e);
EmbeddingRecord ReadEmbedding(const std::string& path);

struct NamedBlock {
  std::string name;
  std::vector<std::uint32_t> dims;
  std::vector<float> data;
};

struct CheckpointRecord {
  static constexpr std::uint32_t kVersion = 1;
  std::map<std::string, std::string> meta;
  std::vector<NamedBlock> blocks;

  const NamedBlock* Find(const std::string& name) const;
};

std::string EncodeCheckpoint(const CheckpointRecord& c);
// Rejects bad magic, unknown versions, truncation and CRC mismatches.
CheckpointRecord DecodeCheckpoint(const std::string& bytes);
void WriteCheckpoint(const std::string& path, const CheckpointRecord& c);
CheckpointRecord ReadCheckpoint(const std::string& path);

std::uint32_t Crc32(const std::string& bytes);

std::string ReadFileBytes(const std::string& path);
void WriteFileBytes(const std::string& path, const std::string& bytes);

}  // namespace deepvox::io

#endif  // DEEPVOX_CONTAINER_H_
