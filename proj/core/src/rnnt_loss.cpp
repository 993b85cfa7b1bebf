// tlab/rnnt_loss.cpp
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

#include "tlab/rnnt_loss.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "tlab/logmath.hpp"

namespace tlab {

namespace {

void ValidateShapes(const JointLogits& logits, const Transcript& target) {
  if (logits.frame_count < 1 || logits.vocab < 1) {
    throw ValidationError("transducer loss: empty lattice");
  }
  if (logits.label_count != target.length()) {
    throw ValidationError(
        "transducer loss: lattice label axis " +
        std::to_string(logits.label_count) + " does not match target length " +
        std::to_string(target.length()));
  }
  for (int y : target.labels()) {
    if (y < 1 || y > logits.vocab) {
      throw ValidationError("transducer loss: target label " +
                            std::to_string(y) + " outside lattice vocab [1, " +
                            std::to_string(logits.vocab) + "]");
    }
  }
}

void CheckSliceNormalization(const JointLogits& logits) {
  const int vocab_size = logits.vocab + 1;
  std::vector<double> slice(static_cast<std::size_t>(vocab_size));
  for (int t = 0; t < logits.frame_count; ++t) {
    for (int u = 0; u <= logits.label_count; ++u) {
      for (int k = 0; k < vocab_size; ++k) {
        slice[static_cast<std::size_t>(k)] = logits.at(t, u, k);
      }
      double total = LogSumExp(slice);
      if (!(std::abs(total) <= kNormalizationTolerance)) {
        throw ValidationError(
            "transducer loss: slice (" + std::to_string(t) + ", " +
            std::to_string(u) + ") is not normalized, log mass " +
            std::to_string(total));
      }
    }
  }
}

// Row-major (T) x (L+1) scratch for the node scores.
struct NodeGrid {
  int cols;
  std::vector<double> v;
  NodeGrid(int t, int l)
      : cols(l + 1),
        v(static_cast<std::size_t>(t) * (l + 1), kLogZero) {}
  double& at(int t, int u) {
    return v[static_cast<std::size_t>(t) * cols + u];
  }
  double at(int t, int u) const {
    return v[static_cast<std::size_t>(t) * cols + u];
  }
};

NodeGrid ComputeLogAlpha(const JointLogits& lp, const Transcript& target) {
  const int T = lp.frame_count;
  const int L = lp.label_count;
  NodeGrid alpha(T, L);
  alpha.at(0, 0) = 0.0;
  for (int t = 0; t < T; ++t) {
    for (int u = 0; u <= L; ++u) {
      if (t == 0 && u == 0) continue;
      double score = kLogZero;
      if (t > 0) {
        score = LogSumExp(score, alpha.at(t - 1, u) + lp.at(t - 1, u, kBlank));
      }
      if (u > 0) {
        score = LogSumExp(score,
                          alpha.at(t, u - 1) + lp.at(t, u - 1, target.label(u - 1)));
      }
      alpha.at(t, u) = score;
    }
  }
  return alpha;
}

NodeGrid ComputeLogBeta(const JointLogits& lp, const Transcript& target) {
  const int T = lp.frame_count;
  const int L = lp.label_count;
  NodeGrid beta(T, L);
  beta.at(T - 1, L) = lp.at(T - 1, L, kBlank);
  for (int t = T - 1; t >= 0; --t) {
    for (int u = L; u >= 0; --u) {
      if (t == T - 1 && u == L) continue;
      double score = kLogZero;
      if (t < T - 1) {
        score = LogSumExp(score, lp.at(t, u, kBlank) + beta.at(t + 1, u));
      }
      if (u < L) {
        score = LogSumExp(score,
                          lp.at(t, u, target.label(u)) + beta.at(t, u + 1));
      }
      beta.at(t, u) = score;
    }
  }
  return beta;
}

}  // namespace

double TransducerLoss(const JointLogits& logits, const Transcript& target,
                      bool check_normalization) {
  ValidateShapes(logits, target);
  if (check_normalization) CheckSliceNormalization(logits);
  NodeGrid alpha = ComputeLogAlpha(logits, target);
  const int T = logits.frame_count;
  const int L = logits.label_count;
  return -(alpha.at(T - 1, L) + logits.at(T - 1, L, kBlank));
}

TransducerLossResult TransducerLossWithGrad(const JointLogits& logits,
                                            const Transcript& target,
                                            bool check_normalization) {
  ValidateShapes(logits, target);
  if (check_normalization) CheckSliceNormalization(logits);
  const int T = logits.frame_count;
  const int L = logits.label_count;
  const int V = logits.vocab;

  NodeGrid alpha = ComputeLogAlpha(logits, target);
  NodeGrid beta = ComputeLogBeta(logits, target);
  const double log_total = alpha.at(T - 1, L) + logits.at(T - 1, L, kBlank);

  TransducerLossResult result;
  result.loss = -log_total;
  result.grad = LatticeTensor(T, L, V);

  // With p the softmax slice at (t, u), node occupancy n(t, u) and arc
  // occupancy m(t, u, k), the activation gradient is
  //   n(t, u) * p_k - m(t, u, k).
  for (int t = 0; t < T; ++t) {
    for (int u = 0; u <= L; ++u) {
      const double occupancy = alpha.at(t, u) + beta.at(t, u) - log_total;
      for (int k = 0; k <= V; ++k) {
        result.grad.at(t, u, k) = std::exp(occupancy + logits.at(t, u, k));
      }
      if (t < T - 1) {
        result.grad.at(t, u, kBlank) -=
            std::exp(alpha.at(t, u) + logits.at(t, u, kBlank) +
                     beta.at(t + 1, u) - log_total);
      } else if (u == L) {
        result.grad.at(t, u, kBlank) -=
            std::exp(alpha.at(t, u) + logits.at(t, u, kBlank) - log_total);
      }
      if (u < L) {
        const int y = target.label(u);
        result.grad.at(t, u, y) -=
            std::exp(alpha.at(t, u) + logits.at(t, u, y) +
                     beta.at(t, u + 1) - log_total);
      }
    }
  }
  return result;
}

double MultiHypothesisLoss(const std::vector<JointLogits>& logits,
                           const std::vector<Transcript>& targets,
                           bool check_normalization) {
  if (logits.size() != targets.size()) {
    throw ValidationError("multi-hypothesis loss: " +
                          std::to_string(logits.size()) + " lattices vs " +
                          std::to_string(targets.size()) + " targets");
  }
  if (logits.empty()) {
    throw ValidationError("multi-hypothesis loss: no hypotheses");
  }
  double total = 0.0;
  for (std::size_t m = 0; m < logits.size(); ++m) {
    total += TransducerLoss(logits[m], targets[m], check_normalization);
  }
  return total;
}

MultiHypothesisLossResult MultiHypothesisLossWithGrad(
    const std::vector<JointLogits>& logits,
    const std::vector<Transcript>& targets, bool check_normalization) {
  if (logits.size() != targets.size()) {
    throw ValidationError("multi-hypothesis loss: " +
                          std::to_string(logits.size()) + " lattices vs " +
                          std::to_string(targets.size()) + " targets");
  }
  if (logits.empty()) {
    throw ValidationError("multi-hypothesis loss: no hypotheses");
  }
  MultiHypothesisLossResult result;
  result.grads.reserve(logits.size());
  for (std::size_t m = 0; m < logits.size(); ++m) {
    TransducerLossResult one =
        TransducerLossWithGrad(logits[m], targets[m], check_normalization);
    result.loss += one.loss;
    result.grads.push_back(std::move(one.grad));
  }
  return result;
}

namespace {

void EnumerateFrom(int t, int u, int frame_count, const Transcript& target,
                   Alignment* current, std::vector<Alignment>* out) {
  if (t == frame_count - 1 && u == target.length()) {
    current->push_back(kBlank);
    out->push_back(*current);
    current->pop_back();
    return;
  }
  if (u < target.length()) {
    current->push_back(target.label(u));
    EnumerateFrom(t, u + 1, frame_count, target, current, out);
    current->pop_back();
  }
  if (t < frame_count - 1) {
    current->push_back(kBlank);
    EnumerateFrom(t + 1, u, frame_count, target, current, out);
    current->pop_back();
  }
}

}  // namespace

std::vector<Alignment> EnumerateAlignments(int frame_count,
                                           const Transcript& target,
                                           int max_total) {
  if (frame_count < 1) {
    throw ValidationError("alignment enumeration: need at least one frame");
  }
  if (frame_count + target.length() > max_total) {
    throw ValidationError(
        "alignment enumeration: frame_count + target length = " +
        std::to_string(frame_count + target.length()) + " exceeds bound " +
        std::to_string(max_total));
  }
  std::vector<Alignment> out;
  Alignment current;
  current.reserve(static_cast<std::size_t>(frame_count) + target.length());
  EnumerateFrom(0, 0, frame_count, target, &current, &out);
  return out;
}

double AlignmentScore(const JointLogits& logits, const Transcript& target,
                      const Alignment& alignment) {
  ValidateShapes(logits, target);
  const int T = logits.frame_count;
  const int L = logits.label_count;
  if (static_cast<int>(alignment.size()) != T + L) {
    throw ValidationError("alignment score: expected " + std::to_string(T + L) +
                          " symbols, got " + std::to_string(alignment.size()));
  }
  int t = 0;
  int u = 0;
  double score = 0.0;
  for (std::size_t i = 0; i < alignment.size(); ++i) {
    const int sym = alignment[i];
    if (t >= T) {
      throw ValidationError("alignment score: symbols continue past the lattice");
    }
    score += logits.at(t, u, sym);
    if (sym == kBlank) {
      ++t;
    } else {
      if (u >= L || sym != target.label(u)) {
        throw ValidationError("alignment score: symbol " + std::to_string(sym) +
                              " at position " + std::to_string(i) +
                              " does not spell the target");
      }
      ++u;
    }
  }
  if (t != T || u != L || alignment.back() != kBlank) {
    throw ValidationError("alignment score: path does not terminate at the "
                          "final blank");
  }
  return score;
}

double BruteForceLoss(const JointLogits& logits, const Transcript& target,
                      int max_total) {
  ValidateShapes(logits, target);
  std::vector<Alignment> alignments =
      EnumerateAlignments(logits.frame_count, target, max_total);
  std::vector<double> scores;
  scores.reserve(alignments.size());
  for (const Alignment& a : alignments) {
    scores.push_back(AlignmentScore(logits, target, a));
  }
  double best = *std::max_element(scores.begin(), scores.end());
  if (std::isinf(best)) return -best;
  double accum = 0.0;
  for (double s : scores) accum += std::exp(s - best);
  return -(best + std::log(accum));
}

LatticeDiagnostics ComputeLatticeDiagnostics(const JointLogits& logits,
                                             const Transcript& target) {
  ValidateShapes(logits, target);
  NodeGrid alpha = ComputeLogAlpha(logits, target);
  NodeGrid beta = ComputeLogBeta(logits, target);
  LatticeDiagnostics out;
  out.frame_count = logits.frame_count;
  out.label_count = logits.label_count;
  out.log_alpha = std::move(alpha.v);
  out.log_beta = std::move(beta.v);
  out.total_log_prob = out.beta(0, 0);
  return out;
}

}  // namespace tlab
