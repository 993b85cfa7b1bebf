// tlab/decoder_test.cpp
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
#include <cmath>
#include <functional>
#include <limits>
#include <set>
#include <utility>
#include <vector>

#include <gtest/gtest.h>

#include "tlab/errors.hpp"
#include "tlab/model.hpp"
#include "tlab/rng.hpp"
#include "tlab/rnnt_loss.hpp"
#include "test_util.hpp"

namespace tlab {
namespace {

ModelConfig SmallConfig() {
  ModelConfig config;
  config.input_dim = 3;
  config.encoder_hidden = 6;
  config.pred_hidden = 5;
  config.embed_dim = 3;
  config.joint_dim = 6;
  config.vocab = 4;
  return config;
}

FeatureSequence RandomFeatures(Rng& rng, int frame_count, int dim) {
  FeatureSequence features;
  features.frame_count = frame_count;
  features.dim = dim;
  features.data.resize(static_cast<std::size_t>(frame_count) * dim);
  for (double& x : features.data) x = rng.Gaussian();
  return features;
}

// Zeroes every parameter and sets single entries of one bias segment, which
// pins the joint logits to a constant vector regardless of the input.
void SetConstantLogitBias(TransducerModel* model,
                          const std::vector<std::pair<int, double>>& entries) {
  std::vector<double>& params = model->params();
  std::fill(params.begin(), params.end(), 0.0);
  for (const ParamSegment& segment : model->segments()) {
    if (segment.name != "joint.out.b") continue;
    for (const auto& [index, value] : entries) {
      params[segment.offset + index] = value;
    }
  }
}

// Writes one entry of a named segment, column major.
void SetParam(TransducerModel* model, const std::string& name, int row,
              int col, double value) {
  for (const ParamSegment& segment : model->segments()) {
    if (segment.name != name) continue;
    model->params()[segment.offset +
                    static_cast<std::size_t>(col) * segment.rows + row] =
        value;
    return;
  }
  FAIL() << "no segment named " << name;
}

double ExactScore(const TransducerModel& model, const FeatureSequence& features,
                  const Transcript& transcript) {
  return -TransducerLoss(model.ForwardLattice(features, transcript, false, 0),
                         transcript);
}

void EnumerateSequences(int vocab, int max_length, std::vector<int>* current,
                        const std::function<void(const std::vector<int>&)>& fn) {
  fn(*current);
  if (static_cast<int>(current->size()) == max_length) return;
  for (int k = 1; k <= vocab; ++k) {
    current->push_back(k);
    EnumerateSequences(vocab, max_length, current, fn);
    current->pop_back();
  }
}

TEST(BeamConfigTest, DefaultsMatchConventions) {
  BeamConfig config;
  EXPECT_EQ(config.beam_size, 20);
  EXPECT_EQ(config.n_best, 1);
  EXPECT_EQ(config.max_emissions_per_frame, 4);
  EXPECT_TRUE(config.prefix_merge);
}

TEST(GreedyDecodeTest, BlankDominatedModelReturnsEmptyTranscript) {
  ModelConfig config = SmallConfig();
  TransducerModel model(config);
  model.InitParams(3);
  SetConstantLogitBias(&model, {{kBlank, 5.0}});

  Rng rng(41);
  const int frame_count = 6;
  FeatureSequence features = RandomFeatures(rng, frame_count, config.input_dim);
  ScoredHypothesis hyp = GreedyDecode(model, features, "greedy");

  EXPECT_EQ(hyp.transcript.length(), 0);
  EXPECT_EQ(hyp.producer_id, "greedy");
  const double blank_log_prob =
      5.0 - std::log(std::exp(5.0) + config.vocab);
  EXPECT_NEAR(hyp.score, frame_count * blank_log_prob, 1e-12);
}

TEST(GreedyDecodeTest, EmissionCapForcesBlankAfterFourLabels) {
  ModelConfig config = SmallConfig();
  TransducerModel model(config);
  model.InitParams(3);
  SetConstantLogitBias(&model, {{1, 5.0}});

  Rng rng(42);
  const int frame_count = 3;
  FeatureSequence features = RandomFeatures(rng, frame_count, config.input_dim);
  ScoredHypothesis hyp = GreedyDecode(model, features);

  ASSERT_EQ(hyp.transcript.length(), 4 * frame_count);
  for (int label : hyp.transcript.labels()) EXPECT_EQ(label, 1);
  const double normalizer = std::log(std::exp(5.0) + config.vocab);
  const double label_log_prob = 5.0 - normalizer;
  const double blank_log_prob = -normalizer;
  EXPECT_NEAR(hyp.score, frame_count * (4 * label_log_prob + blank_log_prob),
              1e-12);
}

// A hand-built program: saturating the prediction forget gate makes the
// prediction state an (almost exact) one-hot of the last token, and the
// joint reads a transition table saying start -> 1, 1 -> 2, 2 -> blank.
// Greedy decoding must walk that program, then hold blank until the frames
// run out, so the transcript is "1 2" for any frame count.
TEST(GreedyDecodeTest, EmitsTargetFromHandBuiltTransitionModel) {
  ModelConfig config;
  config.input_dim = 2;
  config.encoder_hidden = 3;
  config.pred_hidden = 4;
  config.embed_dim = 4;
  config.joint_dim = 4;
  config.vocab = 3;
  TransducerModel model(config);
  std::fill(model.params().begin(), model.params().end(), 0.0);

  const int vs = config.vocab + 1;
  for (int k = 0; k < vs; ++k) {
    SetParam(&model, "embed", k, k, 8.0);
    SetParam(&model, "pred.cand.w", k, k, 8.0);
    SetParam(&model, "joint.out.w", k, k, 12.0);
  }
  for (int h = 0; h < config.pred_hidden; ++h) {
    SetParam(&model, "pred.forget.b", h, 0, 10.0);
  }
  const std::vector<std::pair<int, int>> transitions = {
      {0, 1}, {1, 2}, {2, kBlank}, {3, kBlank}};
  for (const auto& [token, next] : transitions) {
    SetParam(&model, "joint.pred.w", next, token, 8.0);
  }

  Rng rng(90);
  const std::vector<int> expected = {1, 2};
  for (int frame_count : {1, 4, 7}) {
    FeatureSequence features =
        RandomFeatures(rng, frame_count, config.input_dim);
    ScoredHypothesis greedy = GreedyDecode(model, features);
    EXPECT_EQ(greedy.transcript.labels(), expected);
    EXPECT_GT(greedy.score, -0.01);

    std::vector<ScoredHypothesis> beam = BeamDecode(model, features, {});
    ASSERT_EQ(beam.size(), 1u);
    EXPECT_EQ(beam[0].transcript.labels(), expected);
  }
}

TEST(BeamDecodeTest, BeamOfOneMatchesGreedyExactly) {
  ModelConfig config = SmallConfig();
  TransducerModel model(config);
  model.InitParams(7);

  BeamConfig raw;
  raw.beam_size = 1;
  raw.n_best = 1;
  raw.prefix_merge = false;
  BeamConfig merged = raw;
  merged.prefix_merge = true;

  Rng rng(2025);
  for (int i = 0; i < 100; ++i) {
    const int frame_count = 2 + static_cast<int>(rng.UniformInt(0, 6));
    FeatureSequence features =
        RandomFeatures(rng, frame_count, config.input_dim);
    ScoredHypothesis greedy = GreedyDecode(model, features);

    std::vector<ScoredHypothesis> beam = BeamDecode(model, features, raw);
    ASSERT_EQ(beam.size(), 1u);
    EXPECT_EQ(beam[0].transcript.labels(), greedy.transcript.labels());
    EXPECT_DOUBLE_EQ(beam[0].score, greedy.score);

    std::vector<ScoredHypothesis> rescored = BeamDecode(model, features, merged);
    ASSERT_EQ(rescored.size(), 1u);
    EXPECT_EQ(rescored[0].transcript.labels(), greedy.transcript.labels());
  }
}

TEST(BeamDecodeTest, OneBestMatchesExhaustiveSearchOnTinyInstances) {
  ModelConfig config;
  config.input_dim = 2;
  config.encoder_hidden = 4;
  config.pred_hidden = 4;
  config.embed_dim = 2;
  config.joint_dim = 4;
  config.vocab = 3;

  BeamConfig beam_config;
  beam_config.beam_size = 8;
  beam_config.n_best = 1;

  Rng rng(515);
  for (int i = 0; i < 50; ++i) {
    TransducerModel model(config);
    model.InitParams(1000 + i);
    const int frame_count = 1 + static_cast<int>(rng.UniformInt(0, 2));
    FeatureSequence features =
        RandomFeatures(rng, frame_count, config.input_dim);

    std::vector<int> best_labels;
    double best_score = -std::numeric_limits<double>::infinity();
    std::vector<int> current;
    EnumerateSequences(config.vocab, 5, &current,
                       [&](const std::vector<int>& labels) {
                         Transcript transcript(labels, config.vocab);
                         const double score =
                             ExactScore(model, features, transcript);
                         if (score > best_score) {
                           best_score = score;
                           best_labels = labels;
                         }
                       });
    // The enumeration covers sequences past the compared range so a winner
    // longer than three labels would be caught rather than missed.
    ASSERT_LE(best_labels.size(), 3u);

    std::vector<ScoredHypothesis> beam =
        BeamDecode(model, features, beam_config);
    ASSERT_EQ(beam.size(), 1u);
    EXPECT_EQ(beam[0].transcript.labels(), best_labels) << "case " << i;
    EXPECT_NEAR(beam[0].score, best_score, 1e-9);
  }
}

TEST(BeamDecodeTest, OneBestScoreNonDecreasingInBeamSize) {
  ModelConfig config = SmallConfig();
  TransducerModel model(config);
  model.InitParams(11);

  Rng rng(606);
  for (int i = 0; i < 100; ++i) {
    const int frame_count = 2 + static_cast<int>(rng.UniformInt(0, 4));
    FeatureSequence features =
        RandomFeatures(rng, frame_count, config.input_dim);
    double previous = -std::numeric_limits<double>::infinity();
    for (int beam_size : {1, 2, 4, 8}) {
      BeamConfig beam_config;
      beam_config.beam_size = beam_size;
      std::vector<ScoredHypothesis> beam =
          BeamDecode(model, features, beam_config);
      ASSERT_EQ(beam.size(), 1u);
      EXPECT_GE(beam[0].score, previous - 1e-12)
          << "utterance " << i << " beam " << beam_size;
      previous = beam[0].score;
    }
  }
}

TEST(BeamDecodeTest, ReturnedScoresMatchExactRescoring) {
  ModelConfig config = SmallConfig();
  TransducerModel model(config);
  model.InitParams(13);

  BeamConfig beam_config;
  beam_config.beam_size = 8;
  beam_config.n_best = 4;

  Rng rng(707);
  for (int i = 0; i < 20; ++i) {
    const int frame_count = 2 + static_cast<int>(rng.UniformInt(0, 4));
    FeatureSequence features =
        RandomFeatures(rng, frame_count, config.input_dim);
    std::vector<ScoredHypothesis> beam =
        BeamDecode(model, features, beam_config, "beam");

    ASSERT_GE(beam.size(), 1u);
    ASSERT_LE(beam.size(), 4u);
    std::set<std::vector<int>> seen;
    double previous = 0.0;
    for (std::size_t j = 0; j < beam.size(); ++j) {
      const ScoredHypothesis& hyp = beam[j];
      EXPECT_EQ(hyp.producer_id, "beam");
      EXPECT_LE(hyp.score, 0.0);
      if (j > 0) EXPECT_LE(hyp.score, previous);
      previous = hyp.score;
      EXPECT_TRUE(seen.insert(hyp.transcript.labels()).second)
          << "duplicate label sequence in n-best";
      EXPECT_NEAR(hyp.score, ExactScore(model, features, hyp.transcript), 1e-6);
    }
  }
}

TEST(BeamDecodeTest, MergedScoreAtLeastBestPathScore) {
  ModelConfig config = SmallConfig();
  TransducerModel model(config);
  model.InitParams(17);

  Rng rng(808);
  for (int i = 0; i < 30; ++i) {
    const int frame_count = 2 + static_cast<int>(rng.UniformInt(0, 4));
    FeatureSequence features =
        RandomFeatures(rng, frame_count, config.input_dim);

    BeamConfig raw;
    raw.beam_size = 4;
    raw.prefix_merge = false;
    std::vector<ScoredHypothesis> path_scored = BeamDecode(model, features, raw);
    ASSERT_EQ(path_scored.size(), 1u);

    const double marginal =
        ExactScore(model, features, path_scored[0].transcript);
    EXPECT_GE(marginal, path_scored[0].score - 1e-12);
  }
}

TEST(BeamDecodeTest, ValidatesArguments) {
  ModelConfig config = SmallConfig();
  TransducerModel model(config);
  model.InitParams(19);
  Rng rng(909);
  FeatureSequence features = RandomFeatures(rng, 3, config.input_dim);

  BeamConfig bad;
  bad.beam_size = 0;
  EXPECT_THROW(BeamDecode(model, features, bad), ValidationError);

  bad = BeamConfig{};
  bad.n_best = 0;
  EXPECT_THROW(BeamDecode(model, features, bad), ValidationError);

  bad = BeamConfig{};
  bad.beam_size = 2;
  bad.n_best = 3;
  EXPECT_THROW(BeamDecode(model, features, bad), ValidationError);

  bad = BeamConfig{};
  bad.max_emissions_per_frame = 0;
  EXPECT_THROW(BeamDecode(model, features, bad), ValidationError);

  EXPECT_THROW(GreedyDecode(model, features, "", 0), ValidationError);
}

}  // namespace
}  // namespace tlab
