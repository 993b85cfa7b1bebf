// tlab/datagen.hpp
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

#ifndef TLAB_DATAGEN_HPP_
#define TLAB_DATAGEN_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tlab/types.hpp"

namespace tlab {

// Recipe for one synthetic split. Every label has a fixed prototype feature
// vector (a function of the label and the feature dim only, shared by all
// datasets); an utterance renders each of its labels as a run of frames
// drawn as prototype + channel shift + Gaussian noise. One copy of the
// utterance is produced per speed factor, with the run length scaled by the
// factor. All values are quantized to the float32 grid at generation time so
// that saving and loading a dataset is lossless. The condition name tags
// every utterance so mixed-condition sets stay traceable.
struct DatasetSpec {
  int vocab = 12;
  int feature_dim = 8;
  int min_length = 3;
  int max_length = 6;
  int frames_per_label = 4;
  std::vector<double> speed_factors = {1.0};
  double noise_stddev = 0.1;
  double channel_shift = 0.0;
  int utterance_count = 1;
  std::uint64_t seed = 1;
  std::string split = "train";
  std::string condition = "clean";
};

// An utterance without a transcript is unlabeled audio; that is distinct
// from an empty transcript, which asserts that nothing was said.
struct Utterance {
  std::string id;
  std::string condition;
  FeatureSequence features;
  std::optional<Transcript> transcript;
};

struct Dataset {
  int vocab = 0;
  int feature_dim = 0;
  std::string split;
  std::vector<Utterance> utterances;
};

Dataset GenerateDataset(const DatasetSpec& spec);

// Copy with every transcript removed, ids and order preserved. The input is
// untouched, so pairing the stripped copy back up with the original's labels
// by id restores it.
Dataset StripLabels(const Dataset& dataset);

// The prototype feature vector for one label. Depends only on the label and
// the dimension, so every dataset over the same feature space shares it.
std::vector<double> LabelPrototype(int label, int dim);

// The constant per-frame offset for a channel condition: a vector with all
// coordinates equal and Euclidean norm |shift|.
std::vector<double> ChannelShiftVector(double shift, int dim);

// The label in [1, vocab] whose prototype is nearest to the frame after the
// channel shift is removed. An oracle for frame separability in tests.
int NearestPrototypeLabel(const double* frame, int dim, int vocab,
                          double channel_shift);

}  // namespace tlab

#endif  // TLAB_DATAGEN_HPP_
