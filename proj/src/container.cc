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

#include "deepvox/container.h"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "deepvox/common.h"

namespace deepvox::io {
namespace {

static_assert(std::endian::native == std::endian::little,
              "containers assume a little-endian host");

class Writer {
 public:
  void Magic(const char* m) { out_.append(m, 4); }
  void U32(std::uint32_t v) { out_.append(reinterpret_cast<const char*>(&v), 4); }
  void Floats(const std::vector<float>& v) {
    out_.append(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(float));
  }
  void Text(const std::string& s) {
    U32(static_cast<std::uint32_t>(s.size()));
    out_ += s;
  }
  std::string& bytes() { return out_; }

 private:
  std::string out_;
};

class Reader {
 public:
  Reader(const std::string& bytes, std::string what)
      : bytes_(bytes), what_(std::move(what)) {}

  void Magic(const char* m) {
    Need(4);
    Check(std::memcmp(bytes_.data() + pos_, m, 4) == 0, ErrorCode::kData,
          what_ + ": bad magic, expected " + std::string(m, 4));
    pos_ += 4;
  }
  std::uint32_t U32() {
    Need(4);
    std::uint32_t v;
    std::memcpy(&v, bytes_.data() + pos_, 4);
    pos_ += 4;
    return v;
  }
  std::vector<float> Floats(std::size_t n) {
    Check(n <= (bytes_.size() - pos_) / sizeof(float), ErrorCode::kData,
          what_ + ": truncated payload");
    std::vector<float> v(n);
    std::memcpy(v.data(), bytes_.data() + pos_, n * sizeof(float));
    pos_ += n * sizeof(float);
    return v;
  }
  std::string Text() {
    const std::uint32_t len = U32();
    Need(len);
    std::string s = bytes_.substr(pos_, len);
    pos_ += len;
    return s;
  }
  std::size_t pos() const { return pos_; }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void Need(std::size_t n) {
    Check(bytes_.size() - pos_ >= n, ErrorCode::kData, what_ + ": truncated");
  }
  const std::string& bytes_;
  std::string what_;
  std::size_t pos_ = 0;
};

std::map<std::string, std::string> ParseMeta(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    Check(eq != std::string::npos, ErrorCode::kData,
          "malformed metadata line '" + line + "'");
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

std::string FormatMeta(const std::map<std::string, std::string>& kv) {
  std::string out;
  for (const auto& [k, v] : kv) {
    Check(k.find_first_of("=\n") == std::string::npos &&
              v.find('\n') == std::string::npos,
          ErrorCode::kUsage, "metadata key/value may not contain '=' or newline");
    out += k + "=" + v + "\n";
  }
  return out;
}

}  // namespace

std::uint32_t Crc32(const std::string& bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, reinterpret_cast<const Bytef*>(bytes.data()),
              static_cast<uInt>(bytes.size()));
  return static_cast<std::uint32_t>(crc);
}

std::string ReadFileBytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  Check(in.good(), ErrorCode::kIo, "cannot open " + path);
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

void WriteFileBytes(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  Check(out.good(), ErrorCode::kIo, "cannot write " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  Check(out.good(), ErrorCode::kIo, "write failed for " + path);
}

// ---------------------------------------------------------------------------
// DVFR

std::string EncodeMatrix(const MatrixRecord& m) {
  Check(m.data.size() == std::size_t(m.rows) * m.cols, ErrorCode::kUsage,
        "matrix payload does not match " + std::to_string(m.rows) + "x" +
            std::to_string(m.cols));
  Writer w;
  w.Magic("DVFR");
  w.U32(m.rows);
  w.U32(m.cols);
  w.Floats(m.data);
  w.Text(FormatMeta({{"subject", m.subject_id}, {"clip", m.clip_id}}));
  return std::move(w.bytes());
}

MatrixRecord DecodeMatrix(const std::string& bytes) {
  Reader r(bytes, "DVFR");
  r.Magic("DVFR");
  MatrixRecord m;
  m.rows = r.U32();
  m.cols = r.U32();
  m.data = r.Floats(std::size_t(m.rows) * m.cols);
  auto meta = ParseMeta(r.Text());
  m.subject_id = meta["subject"];
  m.clip_id = meta["clip"];
  Check(r.done(), ErrorCode::kData, "DVFR: trailing bytes");
  return m;
}

void WriteMatrix(const std::string& path, const MatrixRecord& m) {
  WriteFileBytes(path, EncodeMatrix(m));
}

MatrixRecord ReadMatrix(const std::string& path) {
  return DecodeMatrix(ReadFileBytes(path));
}

// ---------------------------------------------------------------------------
// DVEM

std::string EncodeEmbedding(const EmbeddingRecord& e) {
  Writer w;
  w.Magic("DVEM");
  w.U32(static_cast<std::uint32_t>(e.values.size()));
  w.Floats(e.values);
  w.Text(e.provenance);
  return std::move(w.bytes());
}

EmbeddingRecord DecodeEmbedding(const std::string& bytes) {
  Reader r(bytes, "DVEM");
  r.Magic("DVEM");
  EmbeddingRecord e;
  e.values = r.Floats(r.U32());
  e.provenance = r.Text();
  Check(r.done(), ErrorCode::kData, "DVEM: trailing bytes");
  return e;
}

void WriteEmbedding(const std::string& path, const EmbeddingRecord& e) {
  WriteFileBytes(path, EncodeEmbedding(e));
}

EmbeddingRecord ReadEmbedding(const std::string& path) {
  return DecodeEmbedding(ReadFileBytes(path));
}

// ---------------------------------------------------------------------------
// DVCK

const NamedBlock* CheckpointRecord::Find(const std::string& name) const {
  for (const auto& b : blocks)
    if (b.name == name) return &b;
  return nullptr;
}

std::string EncodeCheckpoint(const CheckpointRecord& c) {
  Writer w;
  w.Magic("DVCK");
  w.U32(CheckpointRecord::kVersion);
  w.Text(FormatMeta(c.meta));
  w.U32(static_cast<std::uint32_t>(c.blocks.size()));
  for (const auto& b : c.blocks) {
    std::size_t n = 1;
    for (auto d : b.dims) n *= d;
    Check(n == b.data.size(), ErrorCode::kUsage,
          "checkpoint block '" + b.name + "' payload does not match its dims");
    w.Text(b.name);
    w.U32(static_cast<std::uint32_t>(b.dims.size()));
    for (auto d : b.dims) w.U32(d);
    w.Floats(b.data);
  }
  const std::uint32_t crc = Crc32(w.bytes());
  w.U32(crc);
  return std::move(w.bytes());
}

CheckpointRecord DecodeCheckpoint(const std::string& bytes) {
  Check(bytes.size() >= 8, ErrorCode::kData, "DVCK: truncated");
  std::uint32_t stored;
  std::memcpy(&stored, bytes.data() + bytes.size() - 4, 4);
  const std::string body = bytes.substr(0, bytes.size() - 4);
  Reader r(body, "DVCK");
  r.Magic("DVCK");
  const std::uint32_t version = r.U32();
  Check(version == CheckpointRecord::kVersion, ErrorCode::kData,
        "DVCK: unsupported version " + std::to_string(version));
  Check(Crc32(body) == stored, ErrorCode::kData, "DVCK: CRC mismatch");
  CheckpointRecord c;
  c.meta = ParseMeta(r.Text());
  const std::uint32_t count = r.U32();
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedBlock b;
    b.name = r.Text();
    const std::uint32_t rank = r.U32();
    std::size_t n = 1;
    for (std::uint32_t k = 0; k < rank; ++k) {
      b.dims.push_back(r.U32());
      n *= b.dims.back();
    }
    b.data = r.Floats(n);
    c.blocks.push_back(std::move(b));
  }
  Check(r.done(), ErrorCode::kData, "DVCK: trailing bytes");
  return c;
}

void WriteCheckpoint(const std::string& path, const CheckpointRecord& c) {
  WriteFileBytes(path, EncodeCheckpoint(c));
}

CheckpointRecord ReadCheckpoint(const std::string& path) {
  return DecodeCheckpoint(ReadFileBytes(path));
}

}  // namespace deepvox::io
