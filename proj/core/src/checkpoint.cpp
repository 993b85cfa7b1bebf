// tlab/checkpoint.cpp
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

#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

namespace tlab {

namespace {

constexpr const char* kMagicLine = "tlab-checkpoint v1";

nlohmann::json ConfigToJson(const ModelConfig& config) {
  return nlohmann::json{{"input_dim", config.input_dim},
                        {"encoder_hidden", config.encoder_hidden},
                        {"pred_hidden", config.pred_hidden},
                        {"embed_dim", config.embed_dim},
                        {"joint_dim", config.joint_dim},
                        {"vocab", config.vocab},
                        {"dropout_rate", config.dropout_rate},
                        {"seed", config.seed}};
}

ModelConfig ConfigFromJson(const nlohmann::json& j) {
  ModelConfig config;
  config.input_dim = j.at("input_dim").get<int>();
  config.encoder_hidden = j.at("encoder_hidden").get<int>();
  config.pred_hidden = j.at("pred_hidden").get<int>();
  config.embed_dim = j.at("embed_dim").get<int>();
  config.joint_dim = j.at("joint_dim").get<int>();
  config.vocab = j.at("vocab").get<int>();
  config.dropout_rate = j.at("dropout_rate").get<double>();
  config.seed = j.at("seed").get<std::uint64_t>();
  return config;
}

std::string ReadHeaderLine(std::istream& in, const std::string& path) {
  std::string line;
  if (!std::getline(in, line)) {
    throw CheckpointCorruptError(path + ": truncated header");
  }
  return line;
}

}  // namespace

void SaveCheckpoint(const std::string& path, const TransducerModel& model,
                    const std::map<std::string, std::string>& meta) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path);

  nlohmann::json meta_json(meta);
  out << kMagicLine << "\n";
  out << "config " << ConfigToJson(model.config()).dump() << "\n";
  out << "meta " << meta_json.dump() << "\n";
  for (const ParamSegment& seg : model.segments()) {
    out << "segment " << seg.name << " " << seg.offset << " " << seg.rows
        << " " << seg.cols << "\n";
  }
  const std::size_t bytes = model.params().size() * sizeof(double);
  out << "payload " << bytes << "\n";
  out.write(reinterpret_cast<const char*>(model.params().data()),
            static_cast<std::streamsize>(bytes));
  if (!out) throw IoError("short write: " + path);
}

TransducerModel LoadCheckpoint(const std::string& path,
                               std::map<std::string, std::string>* meta) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path);

  const std::string magic = ReadHeaderLine(in, path);
  if (magic != kMagicLine) {
    throw CheckpointVersionError(path + ": unsupported header '" + magic +
                                 "'");
  }

  auto expect_keyword = [&](const std::string& line, const char* keyword) {
    const std::string prefix = std::string(keyword) + " ";
    if (!line.starts_with(prefix)) {
      throw CheckpointCorruptError(path + ": expected '" + keyword +
                                   "' line, got '" + line + "'");
    }
    return line.substr(prefix.size());
  };

  ModelConfig config;
  std::map<std::string, std::string> parsed_meta;
  try {
    config = ConfigFromJson(
        nlohmann::json::parse(expect_keyword(ReadHeaderLine(in, path), "config")));
    const nlohmann::json meta_json =
        nlohmann::json::parse(expect_keyword(ReadHeaderLine(in, path), "meta"));
    parsed_meta = meta_json.get<std::map<std::string, std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointCorruptError(path + ": bad header json: " + e.what());
  }

  TransducerModel model(config);

  for (const ParamSegment& expected : model.segments()) {
    const std::string body =
        expect_keyword(ReadHeaderLine(in, path), "segment");
    std::istringstream fields(body);
    std::string name;
    std::size_t offset = 0;
    int rows = 0;
    int cols = 0;
    if (!(fields >> name >> offset >> rows >> cols)) {
      throw CheckpointCorruptError(path + ": malformed segment line '" + body +
                                   "'");
    }
    if (name != expected.name || offset != expected.offset ||
        rows != expected.rows || cols != expected.cols) {
      throw CheckpointCorruptError(path + ": segment '" + name +
                                   "' does not match the config layout");
    }
  }

  const std::string payload_body =
      expect_keyword(ReadHeaderLine(in, path), "payload");
  std::size_t bytes = 0;
  try {
    bytes = std::stoull(payload_body);
  } catch (const std::exception&) {
    throw CheckpointCorruptError(path + ": bad payload size '" + payload_body +
                                 "'");
  }
  if (bytes != model.params().size() * sizeof(double)) {
    throw CheckpointCorruptError(path + ": payload size " +
                                 std::to_string(bytes) +
                                 " does not match the parameter count");
  }
  in.read(reinterpret_cast<char*>(model.params().data()),
          static_cast<std::streamsize>(bytes));
  if (in.gcount() != static_cast<std::streamsize>(bytes)) {
    throw CheckpointCorruptError(path + ": truncated payload");
  }

  if (meta != nullptr) *meta = std::move(parsed_meta);
  return model;
}

}  // namespace tlab
