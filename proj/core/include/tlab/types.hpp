// tlab/types.hpp
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

#ifndef TLAB_TYPES_HPP_
#define TLAB_TYPES_HPP_

#include <string>
#include <utility>
#include <vector>

#include "tlab/errors.hpp"

namespace tlab {

// Output index reserved for the blank symbol everywhere in the project:
// joint output distributions, alignments, and serialized files.
constexpr int kBlank = 0;

// A label sequence over the alphabet [1, vocab]. Blank never appears in a
// transcript; an empty transcript is legal.
class Transcript {
 public:
  Transcript() = default;

  Transcript(std::vector<int> labels, int vocab)
      : labels_(std::move(labels)), vocab_(vocab) {
    if (vocab_ < 1) throw ValidationError("Transcript: vocab must be >= 1");
    for (int y : labels_) {
      if (y < 1 || y > vocab_) {
        throw ValidationError("Transcript: label " + std::to_string(y) +
                              " outside [1, " + std::to_string(vocab_) + "]");
      }
    }
  }

  int length() const { return static_cast<int>(labels_.size()); }
  int vocab() const { return vocab_; }
  const std::vector<int>& labels() const { return labels_; }
  int label(int l) const { return labels_[static_cast<std::size_t>(l)]; }

  bool operator==(const Transcript& other) const {
    return labels_ == other.labels_;
  }

 private:
  std::vector<int> labels_;
  int vocab_ = 1;
};

// T frames of dim-dimensional features, stored row-major.
struct FeatureSequence {
  int frame_count = 0;
  int dim = 0;
  std::vector<double> data;  // frame_count * dim

  FeatureSequence() = default;
  FeatureSequence(int t, int d)
      : frame_count(t), dim(d), data(static_cast<std::size_t>(t) * d, 0.0) {
    if (t < 1 || d < 1) {
      throw ValidationError("FeatureSequence: need frame_count >= 1, dim >= 1");
    }
  }

  double* frame(int t) { return data.data() + static_cast<std::size_t>(t) * dim; }
  const double* frame(int t) const {
    return data.data() + static_cast<std::size_t>(t) * dim;
  }
};

// Dense (T, L+1, V+1) lattice tensor indexed (t, u, k). Produced as
// log-softmax output by the joint network, in which case every (t, u) slice
// log-sum-exps to zero; also reused for same-shaped gradient tensors, which
// carry no such invariant.
struct LatticeTensor {
  int frame_count = 0;   // T
  int label_count = 0;   // L; the u axis has L+1 entries
  int vocab = 0;         // V; the k axis has V+1 entries, k = 0 is blank
  std::vector<double> values;

  LatticeTensor() = default;
  LatticeTensor(int t, int l, int v)
      : frame_count(t),
        label_count(l),
        vocab(v),
        values(static_cast<std::size_t>(t) * (l + 1) * (v + 1), 0.0) {
    if (t < 1 || l < 0 || v < 1) {
      throw ValidationError("LatticeTensor: bad dimensions");
    }
  }

  std::size_t index(int t, int u, int k) const {
    return (static_cast<std::size_t>(t) * (label_count + 1) + u) * (vocab + 1) +
           k;
  }
  double at(int t, int u, int k) const { return values[index(t, u, k)]; }
  double& at(int t, int u, int k) { return values[index(t, u, k)]; }
};

using JointLogits = LatticeTensor;

// A lattice path serialized as symbols: exactly frame_count blanks, and the
// non-blank subsequence equals the target transcript. The final symbol is
// always the terminating blank.
using Alignment = std::vector<int>;

// Decoder output: a transcript with its log-probability score and the
// identity of the model that produced it.
struct ScoredHypothesis {
  Transcript transcript;
  double score = 0.0;
  std::string producer_id;
};

}  // namespace tlab

#endif  // TLAB_TYPES_HPP_
