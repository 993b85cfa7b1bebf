// tlab/dataset_io.cpp
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

#include "tlab/dataset_io.hpp"

#include <cstdint>
#include <fstream>
#include <limits>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace tlab {

namespace {

constexpr const char* kDatasetMagic = "tlab-dataset v1";
constexpr const char* kHypothesisMagic = "tlab-hyps v1";

void RequireWord(const std::string& value, const char* what) {
  if (value.empty() || value.find_first_of(" \t\n") != std::string::npos) {
    throw ValidationError(std::string(what) +
                          " must be a non-empty whitespace-free word: '" +
                          value + "'");
  }
}

}  // namespace

void SaveDataset(const std::string& base_path, const Dataset& dataset) {
  const std::string index_path = base_path + ".idx";
  const std::string blob_path = base_path + ".bin";

  std::ofstream blob(blob_path, std::ios::binary | std::ios::trunc);
  if (!blob) throw IoError("cannot open for writing: " + blob_path);
  std::ofstream index(index_path, std::ios::trunc);
  if (!index) throw IoError("cannot open for writing: " + index_path);

  RequireWord(dataset.split, "dataset split");
  index << kDatasetMagic << "\n";
  index << "vocab " << dataset.vocab << "\n";
  index << "dim " << dataset.feature_dim << "\n";
  index << "split " << dataset.split << "\n";
  index << "count " << dataset.utterances.size() << "\n";

  std::uint64_t offset = 0;
  std::vector<float> frame_buffer;
  std::set<std::string> written_ids;
  for (const Utterance& utt : dataset.utterances) {
    RequireWord(utt.id, "utterance id");
    RequireWord(utt.condition, "utterance condition");
    if (!written_ids.insert(utt.id).second) {
      throw ValidationError("dataset save: duplicate utterance id '" +
                            utt.id + "'");
    }
    if (utt.features.dim != dataset.feature_dim) {
      throw ValidationError("dataset save: utterance '" + utt.id +
                            "' has dim " + std::to_string(utt.features.dim));
    }
    index << "utt " << utt.id << " " << utt.condition << " " << offset << " "
          << utt.features.frame_count;
    if (utt.transcript.has_value()) {
      index << " " << utt.transcript->length();
      for (int y : utt.transcript->labels()) index << " " << y;
    } else {
      index << " -";
    }
    index << "\n";

    frame_buffer.assign(utt.features.data.begin(), utt.features.data.end());
    const std::uint64_t bytes = frame_buffer.size() * sizeof(float);
    blob.write(reinterpret_cast<const char*>(frame_buffer.data()),
               static_cast<std::streamsize>(bytes));
    offset += bytes;
  }
  if (!blob || !index) throw IoError("short write under " + base_path);
}

Dataset LoadDataset(const std::string& base_path) {
  const std::string index_path = base_path + ".idx";
  const std::string blob_path = base_path + ".bin";

  std::ifstream index(index_path);
  if (!index) throw IoError("cannot open for reading: " + index_path);
  std::ifstream blob(blob_path, std::ios::binary);
  if (!blob) throw IoError("cannot open for reading: " + blob_path);

  std::string line;
  if (!std::getline(index, line) || line != kDatasetMagic) {
    throw IoError(index_path + ": bad magic line");
  }

  auto read_field = [&](const char* key) -> std::string {
    if (!std::getline(index, line)) {
      throw IoError(index_path + ": truncated header");
    }
    std::istringstream fields(line);
    std::string name, value;
    if (!(fields >> name >> value) || name != key) {
      throw IoError(index_path + ": expected '" + key + "', got '" + line +
                    "'");
    }
    return value;
  };
  auto read_kv = [&](const char* key) -> std::int64_t {
    const std::string value = read_field(key);
    try {
      return std::stoll(value);
    } catch (const std::exception&) {
      throw IoError(index_path + ": bad integer for '" + std::string(key) +
                    "': '" + value + "'");
    }
  };

  Dataset dataset;
  dataset.vocab = static_cast<int>(read_kv("vocab"));
  dataset.feature_dim = static_cast<int>(read_kv("dim"));
  dataset.split = read_field("split");
  const std::int64_t count = read_kv("count");
  if (dataset.vocab < 1 || dataset.feature_dim < 1 || count < 0) {
    throw IoError(index_path + ": nonsensical header values");
  }

  std::set<std::string> seen_ids;
  std::vector<float> frame_buffer;
  for (std::int64_t i = 0; i < count; ++i) {
    if (!std::getline(index, line)) {
      throw IoError(index_path + ": truncated utterance table");
    }
    std::istringstream fields(line);
    std::string keyword, id, condition, label_field;
    std::uint64_t offset = 0;
    int frame_count = 0;
    if (!(fields >> keyword >> id >> condition >> offset >> frame_count >>
          label_field) ||
        keyword != "utt") {
      throw IoError(index_path + ": malformed utterance line '" + line + "'");
    }
    if (frame_count < 1) {
      throw IoError(index_path + ": bad shape for utterance '" + id + "'");
    }
    if (!seen_ids.insert(id).second) {
      throw IoError(index_path + ": duplicate utterance id '" + id + "'");
    }

    std::optional<std::vector<int>> labels;
    if (label_field != "-") {
      int label_count = 0;
      try {
        label_count = std::stoi(label_field);
      } catch (const std::exception&) {
        throw IoError(index_path + ": bad label count for utterance '" + id +
                      "'");
      }
      if (label_count < 0) {
        throw IoError(index_path + ": bad label count for utterance '" + id +
                      "'");
      }
      labels.emplace(static_cast<std::size_t>(label_count));
      for (int& y : *labels) {
        if (!(fields >> y)) {
          throw IoError(index_path + ": missing labels for utterance '" + id +
                        "'");
        }
      }
    }

    FeatureSequence features(frame_count, dataset.feature_dim);
    frame_buffer.resize(features.data.size());
    blob.seekg(static_cast<std::streamoff>(offset));
    blob.read(reinterpret_cast<char*>(frame_buffer.data()),
              static_cast<std::streamsize>(frame_buffer.size() *
                                           sizeof(float)));
    if (blob.gcount() !=
        static_cast<std::streamsize>(frame_buffer.size() * sizeof(float))) {
      throw IoError(blob_path + ": truncated features for utterance '" + id +
                    "'");
    }
    for (std::size_t j = 0; j < frame_buffer.size(); ++j) {
      features.data[j] = frame_buffer[j];
    }

    try {
      std::optional<Transcript> transcript;
      if (labels.has_value()) {
        transcript.emplace(*labels, dataset.vocab);
      }
      dataset.utterances.push_back(
          Utterance{id, condition, std::move(features), std::move(transcript)});
    } catch (const ValidationError& e) {
      throw IoError(index_path + ": utterance '" + id + "': " + e.what());
    }
  }
  return dataset;
}

void SaveHypotheses(const std::string& path,
                    const std::vector<HypothesisRecord>& records) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << kHypothesisMagic << "\n";
  out.precision(std::numeric_limits<double>::max_digits10);
  for (const HypothesisRecord& rec : records) {
    RequireWord(rec.utterance_id, "utterance id");
    RequireWord(rec.producer_id, "producer id");
    out << rec.utterance_id << " " << rec.producer_id << " " << rec.score
        << " " << rec.labels.size();
    for (int y : rec.labels) out << " " << y;
    out << "\n";
  }
  if (!out) throw IoError("short write: " + path);
}

std::vector<HypothesisRecord> LoadHypotheses(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open for reading: " + path);
  std::string line;
  if (!std::getline(in, line) || line != kHypothesisMagic) {
    throw IoError(path + ": bad magic line");
  }
  std::vector<HypothesisRecord> records;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream fields(line);
    HypothesisRecord rec;
    std::size_t label_count = 0;
    if (!(fields >> rec.utterance_id >> rec.producer_id >> rec.score >>
          label_count)) {
      throw IoError(path + ": malformed record '" + line + "'");
    }
    rec.labels.resize(label_count);
    for (int& y : rec.labels) {
      if (!(fields >> y)) {
        throw IoError(path + ": missing labels in record '" + line + "'");
      }
    }
    records.push_back(std::move(rec));
  }
  return records;
}

}  // namespace tlab
