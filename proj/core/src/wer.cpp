// tlab/wer.cpp
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

#include "tlab/wer.hpp"

#include <cstddef>
#include <vector>

#include "tlab/errors.hpp"

namespace tlab {

namespace {

// Cell of the alignment table: minimum edit cost first, then the maximum
// substitution count achievable at that cost.
struct Cell {
  int cost = 0;
  int subs = 0;

  bool BetterThan(const Cell& other) const {
    if (cost != other.cost) return cost < other.cost;
    return subs > other.subs;
  }
};

}  // namespace

EditCounts AlignTokens(const std::vector<int>& reference,
                       const std::vector<int>& hypothesis) {
  const int n = static_cast<int>(reference.size());
  const int m = static_cast<int>(hypothesis.size());

  std::vector<Cell> prev(static_cast<std::size_t>(m) + 1);
  std::vector<Cell> row(static_cast<std::size_t>(m) + 1);
  for (int j = 0; j <= m; ++j) prev[j] = {j, 0};

  for (int i = 1; i <= n; ++i) {
    row[0] = {i, 0};
    for (int j = 1; j <= m; ++j) {
      const bool match = reference[static_cast<std::size_t>(i) - 1] ==
                         hypothesis[static_cast<std::size_t>(j) - 1];
      Cell best{prev[j - 1].cost + (match ? 0 : 1),
                prev[j - 1].subs + (match ? 0 : 1)};
      const Cell del{prev[j].cost + 1, prev[j].subs};
      if (del.BetterThan(best)) best = del;
      const Cell ins{row[j - 1].cost + 1, row[j - 1].subs};
      if (ins.BetterThan(best)) best = ins;
      row[j] = best;
    }
    std::swap(prev, row);
  }

  const Cell final_cell = prev[static_cast<std::size_t>(m)];
  EditCounts counts;
  counts.substitutions = final_cell.subs;
  // With S fixed, I + D = cost - S and I - D = |hyp| - |ref| pin the rest.
  const int remaining = final_cell.cost - final_cell.subs;
  counts.insertions = (remaining + (m - n)) / 2;
  counts.deletions = (remaining - (m - n)) / 2;
  counts.hits = n - counts.substitutions - counts.deletions;
  return counts;
}

void WerScorer::Add(const std::vector<int>& reference,
                    const std::vector<int>& hypothesis) {
  const EditCounts one = AlignTokens(reference, hypothesis);
  counts_.substitutions += one.substitutions;
  counts_.insertions += one.insertions;
  counts_.deletions += one.deletions;
  counts_.hits += one.hits;
  reference_tokens_ += static_cast<int>(reference.size());
  ++utterance_count_;
  if (one.edits() > 0) ++wrong_utterances_;
}

double WerScorer::wer() const {
  if (reference_tokens_ == 0) {
    throw ValidationError("wer: no reference tokens scored");
  }
  return 100.0 * counts_.edits() / reference_tokens_;
}

}  // namespace tlab
