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

#include <doctest.h>

#include <cstring>

#include "deepvox/common.h"
#include "deepvox/container.h"
#include "test_util.h"

namespace deepvox::io {
namespace {

TEST_CASE("DVFR records round trip with their metadata") {
  MatrixRecord m{2, 3, {1, 2, 3, 4, 5, 6.5f}, "spk001", "spk001_u02#0"};
  const std::string bytes = EncodeMatrix(m);
  CHECK(bytes.substr(0, 4) == "DVFR");
  std::uint32_t rows, cols;
  std::memcpy(&rows, bytes.data() + 4, 4);
  std::memcpy(&cols, bytes.data() + 8, 4);
  CHECK(rows == 2);
  CHECK(cols == 3);
  float third;
  std::memcpy(&third, bytes.data() + 12 + 2 * 4, 4);
  CHECK(third == 3.0f);  // row-major payload
  const auto back = DecodeMatrix(bytes);
  CHECK(back.rows == 2);
  CHECK(back.cols == 3);
  CHECK(back.data == m.data);
  CHECK(back.subject_id == "spk001");
  CHECK(back.clip_id == "spk001_u02#0");
}

TEST_CASE("DVFR decoding rejects damage") {
  MatrixRecord m{1, 2, {1, 2}, "a", "b"};
  std::string bytes = EncodeMatrix(m);
  CHECK_THROWS_AS(DecodeMatrix(bytes.substr(0, bytes.size() - 1)), Error);
  CHECK_THROWS_AS(DecodeMatrix(bytes + "x"), Error);
  std::string bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_AS(DecodeMatrix(bad), Error);
  m.data.pop_back();
  CHECK_THROWS_AS(EncodeMatrix(m), Error);
}

TEST_CASE("DVEM embeddings round trip") {
  EmbeddingRecord e{{0.25f, -1.0f, 3.0f}, "model=x utt=y"};
  const auto back = DecodeEmbedding(EncodeEmbedding(e));
  CHECK(back.values == e.values);
  CHECK(back.provenance == e.provenance);
}

CheckpointRecord SampleCheckpoint() {
  CheckpointRecord c;
  c.meta = {{"phase", "ver"}, {"epoch", "12"}};
  c.blocks.push_back({"dvx.conv0.w", {2, 1, 3}, {1, 2, 3, 4, 5, 6}});
  c.blocks.push_back({"dvx.conv0.b", {2}, {0.5f, -0.5f}});
  return c;
}

TEST_CASE("DVCK checkpoints round trip and carry a zlib CRC") {
  const auto c = SampleCheckpoint();
  const std::string bytes = EncodeCheckpoint(c);
  CHECK(bytes.substr(0, 4) == "DVCK");
  std::uint32_t crc;
  std::memcpy(&crc, bytes.data() + bytes.size() - 4, 4);
  CHECK(crc == Crc32(bytes.substr(0, bytes.size() - 4)));
  const auto back = DecodeCheckpoint(bytes);
  CHECK(back.meta == c.meta);
  REQUIRE(back.blocks.size() == 2);
  CHECK(back.Find("dvx.conv0.w")->dims == std::vector<std::uint32_t>{2, 1, 3});
  CHECK(back.Find("dvx.conv0.b")->data == c.blocks[1].data);
  CHECK(back.Find("missing") == nullptr);
}

TEST_CASE("zlib CRC-32 check value") {
  CHECK(Crc32("123456789") == 0xCBF43926u);
  CHECK(Crc32("") == 0u);
}

TEST_CASE("DVCK decoding detects corruption, truncation and versions") {
  const std::string bytes = EncodeCheckpoint(SampleCheckpoint());
  for (std::size_t pos : {std::size_t(20), bytes.size() / 2, bytes.size() - 6}) {
    std::string bad = bytes;
    bad[pos] ^= 0x01;
    CHECK_THROWS_AS(DecodeCheckpoint(bad), Error);
  }
  CHECK_THROWS_AS(DecodeCheckpoint(bytes.substr(0, bytes.size() - 3)), Error);
  CHECK_THROWS_AS(DecodeCheckpoint("DVCK"), Error);
  std::string v2 = bytes;
  v2[4] = 2;
  try {
    DecodeCheckpoint(v2);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("version") != std::string::npos);
  }
  auto c = SampleCheckpoint();
  c.blocks[0].dims = {7};
  CHECK_THROWS_AS(EncodeCheckpoint(c), Error);
}

TEST_CASE("container files go through the filesystem") {
  testing::TempDir dir("container");
  WriteCheckpoint(dir / "c.dvck", SampleCheckpoint());
  CHECK(ReadCheckpoint(dir / "c.dvck").blocks.size() == 2);
  try {
    ReadMatrix(dir / "nope.dvfr");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kIo);
  }
}

}  // namespace
}  // namespace deepvox::io
