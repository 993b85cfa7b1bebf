// tlab/dataset_io.hpp
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

#ifndef TLAB_DATASET_IO_HPP_
#define TLAB_DATASET_IO_HPP_

#include <string>
#include <vector>

#include "tlab/datagen.hpp"

namespace tlab {

// Datasets are stored as a text index (base + ".idx") naming a binary blob
// (base + ".bin") of little-endian float32 frames. Generation quantizes to
// the float32 grid, so a save/load round trip reproduces the features
// exactly. Each index row carries the utterance id, its condition tag, the
// blob offset, the frame count, and either the transcript or "-" for
// unlabeled audio. Loading rejects duplicate ids.
void SaveDataset(const std::string& base_path, const Dataset& dataset);
Dataset LoadDataset(const std::string& base_path);

// One decoded transcript for one utterance, tagged with the model that
// produced it and the decoder's log-probability score.
struct HypothesisRecord {
  std::string utterance_id;
  std::string producer_id;
  double score = 0.0;
  std::vector<int> labels;
};

// Hypothesis files are plain text: a magic line, then one line per record.
void SaveHypotheses(const std::string& path,
                    const std::vector<HypothesisRecord>& records);
std::vector<HypothesisRecord> LoadHypotheses(const std::string& path);

}  // namespace tlab

#endif  // TLAB_DATASET_IO_HPP_
