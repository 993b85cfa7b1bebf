// tlab/tests/checkpoint_test.cpp
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "tlab/checkpoint.hpp"

#include <filesystem>
#include <fstream>
#include <string>

#include "gtest/gtest.h"

namespace tlab {
namespace {

std::string TempPath(const std::string& name) {
  return (std::filesystem::path(::testing::TempDir()) / name).string();
}

ModelConfig SmallConfig() {
  ModelConfig config;
  config.input_dim = 2;
  config.encoder_hidden = 3;
  config.pred_hidden = 3;
  config.embed_dim = 2;
  config.joint_dim = 3;
  config.vocab = 2;
  return config;
}

TEST(Checkpoint, RoundTripPreservesParamsConfigAndMeta) {
  ModelConfig config = SmallConfig();
  config.dropout_rate = 0.25;
  config.seed = 12345;
  TransducerModel model{config};
  const std::string path = TempPath("roundtrip.ckpt");
  SaveCheckpoint(path, model, {{"seed", "12345"}, {"epoch", "7"}});

  std::map<std::string, std::string> meta;
  const TransducerModel loaded = LoadCheckpoint(path, &meta);
  EXPECT_EQ(loaded.config(), model.config());
  EXPECT_EQ(loaded.params(), model.params());
  EXPECT_EQ(meta.at("seed"), "12345");
  EXPECT_EQ(meta.at("epoch"), "7");
}

TEST(Checkpoint, DoubleRoundTripIsByteIdentical) {
  TransducerModel model{SmallConfig()};
  model.InitParams(9);
  const std::string first = TempPath("first.ckpt");
  const std::string second = TempPath("second.ckpt");
  SaveCheckpoint(first, model, {{"k", "v"}});
  SaveCheckpoint(second, LoadCheckpoint(first), {{"k", "v"}});

  std::ifstream a(first, std::ios::binary);
  std::ifstream b(second, std::ios::binary);
  const std::string bytes_a((std::istreambuf_iterator<char>(a)),
                            std::istreambuf_iterator<char>());
  const std::string bytes_b((std::istreambuf_iterator<char>(b)),
                            std::istreambuf_iterator<char>());
  EXPECT_EQ(bytes_a, bytes_b);
}

TEST(Checkpoint, MissingFileThrowsIoError) {
  EXPECT_THROW(LoadCheckpoint(TempPath("does-not-exist.ckpt")), IoError);
}

TEST(Checkpoint, UnknownVersionThrows) {
  const std::string path = TempPath("badmagic.ckpt");
  std::ofstream(path) << "tlab-checkpoint v9\n";
  EXPECT_THROW(LoadCheckpoint(path), CheckpointVersionError);

  const std::string other = TempPath("notackpt.ckpt");
  std::ofstream(other) << "something else entirely\n";
  EXPECT_THROW(LoadCheckpoint(other), CheckpointVersionError);
}

TEST(Checkpoint, TruncatedPayloadThrowsCorruptError) {
  TransducerModel model{SmallConfig()};
  model.InitParams(3);
  const std::string path = TempPath("truncated.ckpt");
  SaveCheckpoint(path, model);

  const auto full_size = std::filesystem::file_size(path);
  std::filesystem::resize_file(path, full_size - 16);
  EXPECT_THROW(LoadCheckpoint(path), CheckpointCorruptError);
}

TEST(Checkpoint, TamperedSegmentTableThrowsCorruptError) {
  TransducerModel model{SmallConfig()};
  model.InitParams(3);
  const std::string path = TempPath("tampered.ckpt");
  SaveCheckpoint(path, model);

  std::ifstream in(path, std::ios::binary);
  std::string contents((std::istreambuf_iterator<char>(in)),
                       std::istreambuf_iterator<char>());
  in.close();
  const std::string needle = "segment enc.forget.w";
  const auto pos = contents.find(needle);
  ASSERT_NE(pos, std::string::npos);
  contents.replace(pos, needle.size(), "segment enc.fudged.w");
  std::ofstream(path, std::ios::binary | std::ios::trunc) << contents;

  EXPECT_THROW(LoadCheckpoint(path), CheckpointCorruptError);
}

TEST(Checkpoint, HeaderGarbageThrowsCorruptError) {
  const std::string path = TempPath("garbage.ckpt");
  std::ofstream(path) << "tlab-checkpoint v1\nconfig not-json\n";
  EXPECT_THROW(LoadCheckpoint(path), CheckpointCorruptError);
}

}  // namespace
}  // namespace tlab
