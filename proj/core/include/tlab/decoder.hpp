// tlab/decoder.hpp
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

#ifndef TLAB_DECODER_HPP_
#define TLAB_DECODER_HPP_

#include <string>
#include <vector>

#include "tlab/model.hpp"

namespace tlab {

struct BeamConfig {
  int beam_size = 20;
  int n_best = 1;
  // Non-blank symbols allowed per frame before blank is forced, in both the
  // greedy and the beam decoder.
  int max_emissions_per_frame = 4;
  // With prefix merging, hypotheses that reach the same label sequence at
  // the same frame are combined by log-sum-exp during the search, and the
  // returned scores are recomputed exactly as the full marginal
  // log-probability of each label sequence. Without it, scores are best
  // single-path scores, which makes beam_size=1 reproduce the greedy score
  // bit for bit.
  bool prefix_merge = true;
};

// Frame-synchronous argmax decoding: at each step take the most probable
// symbol (blank wins ties); blank advances to the next frame, a label
// extends the hypothesis, and after max_emissions_per_frame labels on one
// frame blank is forced. The score is the log-probability of the single
// decoded path.
ScoredHypothesis GreedyDecode(const TransducerModel& model,
                              const FeatureSequence& features,
                              const std::string& producer_id = "",
                              int max_emissions_per_frame = 4);

// Breadth-synchronous beam search. All hypotheses advance through frames in
// lockstep; within a frame, label extensions deepen one symbol at a time and
// compete with blank-finished hypotheses inside a single pool pruned to
// beam_size; the frame ends when no unfinished hypothesis survives the
// pruning. Returns n_best distinct label sequences, best first.
std::vector<ScoredHypothesis> BeamDecode(const TransducerModel& model,
                                         const FeatureSequence& features,
                                         const BeamConfig& config,
                                         const std::string& producer_id = "");

}  // namespace tlab

#endif  // TLAB_DECODER_HPP_
