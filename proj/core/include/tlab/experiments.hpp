// tlab/experiments.hpp
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
//
// Preset desk-scale experiments. Each runner builds its datasets and models
// from a single seed, so the experiment is reproducible end to end, and
// returns the seed's WERs on the held-out condition. The interesting claims
// (multi-teacher beats single-teacher, and both beat the untuned base) hold
// as averages over several seeds, not necessarily on any single one.

#ifndef TLAB_EXPERIMENTS_HPP_
#define TLAB_EXPERIMENTS_HPP_

#include <cstdint>

#include "tlab/pipeline.hpp"

namespace tlab {

// Unsupervised fine-tuning on a shifted test condition. Two base models
// (dropout variants) train on clean data; the single-hypothesis run
// fine-tunes base 1 on its own beam output over the test audio for two
// iterations, and the multi-hypothesis run fine-tunes on both models'
// streams. WERs are for base 1's lineage.
struct FinetuneOrderingOutcome {
  double base1_wer = 0.0;
  double base2_wer = 0.0;
  double sh_wer = 0.0;
  double mh_wer = 0.0;
};
FinetuneOrderingOutcome RunFinetuneOrdering(std::uint64_t seed,
                                            ExperimentRecord* record =
                                                nullptr);

// Same shape with stronger teachers: bases 3 and 4 train on speed-perturbed
// copies of the clean data (three factors, triple the utterances) and so
// hold up better on the shifted condition. The two-hypothesis run pairs
// base 1 with base 3; the four-hypothesis run uses all four bases.
struct StrongTeacherOutcome {
  double base1_wer = 0.0;
  double base2_wer = 0.0;
  double base3_wer = 0.0;
  double base4_wer = 0.0;
  double mh2_wer = 0.0;
  double mh4_wer = 0.0;
};
StrongTeacherOutcome RunStrongTeacherOrdering(std::uint64_t seed,
                                              ExperimentRecord* record =
                                                  nullptr);

// Semi-supervised self-training: four sibling bases train on a small
// supervised set, pseudo-label an unlabeled pool recorded under a noisy
// shifted condition, and a final model trains from scratch on supervised
// plus pseudo-labeled data. The single-hypothesis pool carries base 1's
// labels only, the multi-hypothesis pool all four streams, and the upper
// bound uses the pool's withheld true transcripts.
struct SelfTrainOutcome {
  double base_wer = 0.0;
  double sh_wer = 0.0;
  double mh_wer = 0.0;
  double supervised_wer = 0.0;
};
SelfTrainOutcome RunSelfTrainOrdering(std::uint64_t seed,
                                      ExperimentRecord* record = nullptr);

// One clean-trained base evaluated on the clean test condition and on the
// shifted one; the gap is what every experiment above exploits.
struct ConditionGapOutcome {
  double clean_wer = 0.0;
  double shifted_wer = 0.0;
};
ConditionGapOutcome RunConditionGap(std::uint64_t seed);

}  // namespace tlab

#endif  // TLAB_EXPERIMENTS_HPP_
