// tlab/rnnt_loss.hpp
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

#ifndef TLAB_RNNT_LOSS_HPP_
#define TLAB_RNNT_LOSS_HPP_

#include <vector>

#include "tlab/types.hpp"

namespace tlab {

// Every (t, u) slice of a joint log-probability tensor must log-sum-exp to
// zero within this tolerance when normalization checking is requested.
constexpr double kNormalizationTolerance = 1e-9;

// Exact negative log marginal probability of the target transcript under the
// per-node output distributions in `logits`. The lattice has nodes (t, u)
// with t in [0, T) and u in [0, L]; emitting label u+1 moves (t, u) to
// (t, u+1), emitting blank moves (t, u) to (t+1, u), and every complete path
// ends with the blank emitted at (T-1, L). `logits` must hold log
// probabilities; with `check_normalization` set, each (t, u) slice is
// verified to log-sum-exp to zero within kNormalizationTolerance.
double TransducerLoss(const JointLogits& logits, const Transcript& target,
                      bool check_normalization = false);

struct TransducerLossResult {
  double loss = 0.0;
  // Derivative of the loss with respect to the pre-softmax activations that
  // produced `logits`, same shape as `logits`. Every (t, u) slice sums to
  // zero up to rounding.
  LatticeTensor grad;
};

TransducerLossResult TransducerLossWithGrad(const JointLogits& logits,
                                            const Transcript& target,
                                            bool check_normalization = false);

// Joint likelihood of several (hypothesis, lattice) pairs: the plain sum of
// the per-pair losses, with no averaging over the hypothesis count.
double MultiHypothesisLoss(const std::vector<JointLogits>& logits,
                           const std::vector<Transcript>& targets,
                           bool check_normalization = false);

struct MultiHypothesisLossResult {
  double loss = 0.0;
  std::vector<LatticeTensor> grads;
};

MultiHypothesisLossResult MultiHypothesisLossWithGrad(
    const std::vector<JointLogits>& logits,
    const std::vector<Transcript>& targets,
    bool check_normalization = false);

// All alignments of the target into `frame_count` frames: sequences holding
// exactly `frame_count` blanks whose non-blank subsequence equals the target,
// ending with the terminating blank. Throws ValidationError when
// frame_count + target.length() exceeds `max_total`, which keeps the
// enumeration small enough to be usable as a test oracle.
std::vector<Alignment> EnumerateAlignments(int frame_count,
                                           const Transcript& target,
                                           int max_total = 12);

// Log probability of one explicit alignment, accumulated by walking the
// lattice symbol by symbol. Throws ValidationError if the alignment does not
// spell the target or does not fit the lattice dimensions.
double AlignmentScore(const JointLogits& logits, const Transcript& target,
                      const Alignment& alignment);

// The loss recomputed by enumerating every alignment and accumulating the
// scores with a direct max-shifted sum. Shares no code with the lattice
// recursion, so it serves as an independent oracle for small cases. Subject
// to the same `max_total` bound as EnumerateAlignments.
double BruteForceLoss(const JointLogits& logits, const Transcript& target,
                      int max_total = 12);

// Forward and backward node scores, exposed for diagnostics and tests.
// log_alpha(t, u) sums all partial paths from (0, 0) into (t, u);
// log_beta(t, u) sums all completions from (t, u) through the final blank.
// Both are stored row-major with L+1 columns. total_log_prob equals
// log_beta(0, 0) and -loss.
struct LatticeDiagnostics {
  int frame_count = 0;
  int label_count = 0;
  std::vector<double> log_alpha;
  std::vector<double> log_beta;
  double total_log_prob = 0.0;

  double alpha(int t, int u) const {
    return log_alpha[static_cast<std::size_t>(t) * (label_count + 1) + u];
  }
  double beta(int t, int u) const {
    return log_beta[static_cast<std::size_t>(t) * (label_count + 1) + u];
  }
};

LatticeDiagnostics ComputeLatticeDiagnostics(const JointLogits& logits,
                                             const Transcript& target);

}  // namespace tlab

#endif  // TLAB_RNNT_LOSS_HPP_
