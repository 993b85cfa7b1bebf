// tlab/decoder.cpp
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

#include "tlab/decoder.hpp"

#include <algorithm>
#include <map>
#include <utility>
#include <vector>

#include "tlab/errors.hpp"
#include "tlab/logmath.hpp"
#include "tlab/rnnt_loss.hpp"

namespace tlab {
namespace {

struct SearchHyp {
  std::vector<int> labels;
  Vector pred_state;
  double score = 0.0;
  bool done = false;
};

// A candidate is a cheap reference to a parent hypothesis plus one decision:
// token < 0 carries an already finished parent through unchanged, token == 0
// finishes the parent with blank, token > 0 extends it by one label. The
// prediction state is only advanced for candidates that survive pruning.
struct Candidate {
  double score = 0.0;
  bool done = false;
  int parent = 0;
  int token = -1;
};

int LabelCount(const std::vector<SearchHyp>& pool, const Candidate& c) {
  return static_cast<int>(pool[c.parent].labels.size()) + (c.token > 0 ? 1 : 0);
}

// Total order: higher score first, finished before unfinished on ties, then
// shorter and lexicographically smaller label sequences. The tie rules keep
// the search deterministic and make blank win exact ties, matching the
// greedy argmax.
bool CandidateBefore(const std::vector<SearchHyp>& pool, const Candidate& a,
                     const Candidate& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.done != b.done) return a.done;
  const int la = LabelCount(pool, a);
  const int lb = LabelCount(pool, b);
  if (la != lb) return la < lb;
  const std::vector<int>& pa = pool[a.parent].labels;
  const std::vector<int>& pb = pool[b.parent].labels;
  for (int i = 0; i < la; ++i) {
    const int xa = i < static_cast<int>(pa.size()) ? pa[i] : a.token;
    const int xb = i < static_cast<int>(pb.size()) ? pb[i] : b.token;
    if (xa != xb) return xa < xb;
  }
  return false;
}

std::vector<int> CandidateLabels(const std::vector<SearchHyp>& pool,
                                 const Candidate& c) {
  std::vector<int> labels = pool[c.parent].labels;
  if (c.token > 0) labels.push_back(c.token);
  return labels;
}

// Finished candidates that spell the same label sequence occupy the same
// state, so they are combined into one candidate. Unfinished candidates are
// always distinct within a depth and pass through untouched.
void MergeFinished(const std::vector<SearchHyp>& pool, bool prefix_merge,
                   std::vector<Candidate>* candidates) {
  std::map<std::vector<int>, int> seen;
  std::vector<Candidate> merged;
  merged.reserve(candidates->size());
  for (const Candidate& c : *candidates) {
    if (!c.done) {
      merged.push_back(c);
      continue;
    }
    std::vector<int> key = CandidateLabels(pool, c);
    auto [it, inserted] = seen.emplace(std::move(key), merged.size());
    if (inserted) {
      merged.push_back(c);
      continue;
    }
    Candidate& kept = merged[it->second];
    if (prefix_merge) {
      kept.score = LogSumExp(kept.score, c.score);
    } else if (c.score > kept.score) {
      kept = c;
    }
  }
  *candidates = std::move(merged);
}

std::vector<SearchHyp> Materialize(const TransducerModel& model,
                                   const std::vector<SearchHyp>& pool,
                                   const std::vector<Candidate>& candidates) {
  std::vector<SearchHyp> out;
  out.reserve(candidates.size());
  for (const Candidate& c : candidates) {
    SearchHyp hyp;
    hyp.labels = CandidateLabels(pool, c);
    hyp.score = c.score;
    hyp.done = c.done;
    if (c.token > 0) {
      hyp.pred_state = model.StepPredState(pool[c.parent].pred_state, c.token);
    } else {
      hyp.pred_state = pool[c.parent].pred_state;
    }
    out.push_back(std::move(hyp));
  }
  return out;
}

double ExactSequenceLogProb(const TransducerModel& model,
                            const FeatureSequence& features,
                            const Transcript& transcript) {
  JointLogits logits = model.ForwardLattice(features, transcript, false, 0);
  return -TransducerLoss(logits, transcript);
}

}  // namespace

ScoredHypothesis GreedyDecode(const TransducerModel& model,
                              const FeatureSequence& features,
                              const std::string& producer_id,
                              int max_emissions_per_frame) {
  if (max_emissions_per_frame < 1) {
    throw ValidationError("greedy decode: emission cap must be positive");
  }
  const Matrix encoded = model.Encode(features);
  Vector state = model.StartPredState();
  std::vector<int> labels;
  double score = 0.0;
  for (int t = 0; t < features.frame_count; ++t) {
    int emitted = 0;
    for (;;) {
      const Vector log_probs = model.JointLogProbs(encoded.col(t), state);
      if (emitted == max_emissions_per_frame) {
        score += log_probs(kBlank);
        break;
      }
      int best = 0;
      for (int k = 1; k < log_probs.size(); ++k) {
        if (log_probs(k) > log_probs(best)) best = k;
      }
      score += log_probs(best);
      if (best == kBlank) break;
      labels.push_back(best);
      state = model.StepPredState(state, best);
      ++emitted;
    }
  }
  return ScoredHypothesis{Transcript(labels, model.config().vocab), score,
                          producer_id};
}

std::vector<ScoredHypothesis> BeamDecode(const TransducerModel& model,
                                         const FeatureSequence& features,
                                         const BeamConfig& config,
                                         const std::string& producer_id) {
  if (config.beam_size < 1) {
    throw ValidationError("beam decode: beam_size must be positive");
  }
  if (config.n_best < 1 || config.n_best > config.beam_size) {
    throw ValidationError("beam decode: n_best must be in [1, beam_size]");
  }
  if (config.max_emissions_per_frame < 1) {
    throw ValidationError("beam decode: emission cap must be positive");
  }

  const Matrix encoded = model.Encode(features);
  std::vector<SearchHyp> pool(1);
  pool[0].pred_state = model.StartPredState();

  for (int t = 0; t < features.frame_count; ++t) {
    for (SearchHyp& hyp : pool) hyp.done = false;
    for (int depth = 0; depth <= config.max_emissions_per_frame; ++depth) {
      bool any_active = false;
      for (const SearchHyp& hyp : pool) any_active |= !hyp.done;
      if (!any_active) break;

      std::vector<Candidate> candidates;
      candidates.reserve(pool.size() * (model.config().vocab + 1));
      for (int i = 0; i < static_cast<int>(pool.size()); ++i) {
        const SearchHyp& hyp = pool[i];
        if (hyp.done) {
          candidates.push_back({hyp.score, true, i, -1});
          continue;
        }
        const Vector log_probs =
            model.JointLogProbs(encoded.col(t), hyp.pred_state);
        candidates.push_back({hyp.score + log_probs(kBlank), true, i, kBlank});
        if (depth < config.max_emissions_per_frame) {
          for (int k = 1; k <= model.config().vocab; ++k) {
            candidates.push_back({hyp.score + log_probs(k), false, i, k});
          }
        }
      }

      MergeFinished(pool, config.prefix_merge, &candidates);
      std::sort(candidates.begin(), candidates.end(),
                [&pool](const Candidate& a, const Candidate& b) {
                  return CandidateBefore(pool, a, b);
                });
      if (static_cast<int>(candidates.size()) > config.beam_size) {
        candidates.resize(config.beam_size);
      }
      pool = Materialize(model, pool, candidates);
    }
  }

  std::vector<ScoredHypothesis> results;
  results.reserve(pool.size());
  for (const SearchHyp& hyp : pool) {
    Transcript transcript(hyp.labels, model.config().vocab);
    const double score =
        config.prefix_merge
            ? ExactSequenceLogProb(model, features, transcript)
            : hyp.score;
    results.push_back(
        ScoredHypothesis{std::move(transcript), score, producer_id});
  }
  std::sort(results.begin(), results.end(),
            [](const ScoredHypothesis& a, const ScoredHypothesis& b) {
              if (a.score != b.score) return a.score > b.score;
              if (a.transcript.length() != b.transcript.length()) {
                return a.transcript.length() < b.transcript.length();
              }
              return a.transcript.labels() < b.transcript.labels();
            });
  if (static_cast<int>(results.size()) > config.n_best) {
    results.resize(config.n_best);
  }
  return results;
}

}  // namespace tlab
