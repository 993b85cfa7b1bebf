// tlab/wer.hpp
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

#ifndef TLAB_WER_HPP_
#define TLAB_WER_HPP_

#include <vector>

namespace tlab {

struct EditCounts {
  int substitutions = 0;
  int insertions = 0;
  int deletions = 0;
  int hits = 0;

  int edits() const { return substitutions + insertions + deletions; }
};

// Unit-cost Levenshtein alignment between reference and hypothesis token
// sequences. Among all minimum-edit alignments the reported split is the one
// with the most substitutions, which keeps the decomposition symmetric:
// swapping the arguments swaps insertions and deletions and preserves the
// substitution count.
EditCounts AlignTokens(const std::vector<int>& reference,
                       const std::vector<int>& hypothesis);

// Pools edit counts over a corpus. The error rate is
// 100 * (S + I + D) / total reference tokens.
class WerScorer {
 public:
  void Add(const std::vector<int>& reference,
           const std::vector<int>& hypothesis);

  const EditCounts& counts() const { return counts_; }
  int reference_tokens() const { return reference_tokens_; }
  int utterance_count() const { return utterance_count_; }
  int wrong_utterances() const { return wrong_utterances_; }

  // Percent word error rate. Throws ValidationError when no reference
  // tokens have been added.
  double wer() const;

 private:
  EditCounts counts_;
  int reference_tokens_ = 0;
  int utterance_count_ = 0;
  int wrong_utterances_ = 0;
};

}  // namespace tlab

#endif  // TLAB_WER_HPP_
