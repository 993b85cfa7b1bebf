// tlab/checkpoint.hpp
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

#ifndef TLAB_CHECKPOINT_HPP_
#define TLAB_CHECKPOINT_HPP_

#include <map>
#include <string>

#include "tlab/model.hpp"

namespace tlab {

// Checkpoint files carry a text header (magic and version line, config line,
// meta line, one line per parameter segment, payload size line) followed by
// the raw little-endian float64 parameter payload.
//
// Loading throws CheckpointVersionError for an unknown magic or version,
// CheckpointCorruptError for a malformed header, a segment table that does
// not match the config, or a payload of the wrong size, and IoError when the
// file cannot be read at all.
void SaveCheckpoint(const std::string& path, const TransducerModel& model,
                    const std::map<std::string, std::string>& meta = {});

TransducerModel LoadCheckpoint(
    const std::string& path,
    std::map<std::string, std::string>* meta = nullptr);

}  // namespace tlab

#endif  // TLAB_CHECKPOINT_HPP_
