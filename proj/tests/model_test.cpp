// tlab/tests/model_test.cpp
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

#include "tlab/model.hpp"

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "gtest/gtest.h"
#include "test_util.hpp"
#include "tlab/rng.hpp"
#include "tlab/rnnt_loss.hpp"

namespace tlab {
namespace {

ModelConfig TinyConfig() {
  ModelConfig config;
  config.input_dim = 3;
  config.encoder_hidden = 5;
  config.pred_hidden = 4;
  config.embed_dim = 3;
  config.joint_dim = 4;
  config.vocab = 3;
  return config;
}

FeatureSequence RandomFeatures(Rng& rng, int frames, int dim) {
  FeatureSequence features(frames, dim);
  for (double& x : features.data) x = rng.Gaussian();
  return features;
}

// Independent tally of the parameter budget, written out term by term.
std::size_t ExpectedParamCount(const ModelConfig& c) {
  const std::size_t enc = static_cast<std::size_t>(c.encoder_hidden) *
                              (c.input_dim + c.encoder_hidden + 1) * 2;
  const std::size_t embed =
      static_cast<std::size_t>(c.vocab + 1) * c.embed_dim;
  const std::size_t pred = static_cast<std::size_t>(c.pred_hidden) *
                               (c.embed_dim + c.pred_hidden + 1) * 2;
  const std::size_t joint =
      static_cast<std::size_t>(c.joint_dim) *
          (c.encoder_hidden + c.pred_hidden + 1) +
      static_cast<std::size_t>(c.vocab + 1) * (c.joint_dim + 1);
  return enc + embed + pred + joint;
}

TEST(TransducerModel, ParamLayoutIsContiguousAndCountsMatch) {
  const TransducerModel model{ModelConfig{}};
  EXPECT_EQ(model.param_count(), 7861u);
  EXPECT_EQ(model.param_count(), ExpectedParamCount(model.config()));
  ASSERT_EQ(model.segments().size(), 18u);
  std::size_t offset = 0;
  for (const ParamSegment& seg : model.segments()) {
    EXPECT_EQ(seg.offset, offset);
    offset += seg.size();
  }
  EXPECT_EQ(offset, model.param_count());

  const TransducerModel tiny{TinyConfig()};
  EXPECT_EQ(tiny.param_count(), ExpectedParamCount(tiny.config()));
}

TEST(TransducerModel, InitParamsIsDeterministicAndBounded) {
  TransducerModel a{TinyConfig()};
  TransducerModel b{TinyConfig()};
  a.InitParams(99);
  b.InitParams(99);
  EXPECT_EQ(a.params(), b.params());

  ModelConfig seeded = TinyConfig();
  seeded.seed = 99;
  EXPECT_EQ(TransducerModel{seeded}.params(), a.params());

  TransducerModel c{TinyConfig()};
  c.InitParams(100);
  EXPECT_NE(a.params(), c.params());

  for (const ParamSegment& seg : a.segments()) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(seg.cols));
    for (std::size_t i = 0; i < seg.size(); ++i) {
      const double value = a.params()[seg.offset + i];
      if (seg.name.ends_with(".b")) {
        EXPECT_EQ(value, 0.0) << seg.name;
      } else {
        EXPECT_LT(std::abs(value), bound) << seg.name << " entry " << i;
      }
    }
  }
}

void CheckGradientAgainstCentralDifferences(
    const std::vector<Transcript>& targets, double dropout_rate,
    std::uint64_t dropout_seed) {
  Rng rng(314);
  ModelConfig config = TinyConfig();
  config.dropout_rate = dropout_rate;
  config.seed = 8;
  TransducerModel model{config};
  const FeatureSequence features = RandomFeatures(rng, 4, 3);

  std::vector<double> grad;
  const double loss =
      model.ItemLossAndGrad(features, targets, true, dropout_seed, &grad);
  ASSERT_TRUE(std::isfinite(loss));
  ASSERT_EQ(grad.size(), model.param_count());

  const double eps = 1e-5;
  for (std::size_t i = 0; i < model.param_count(); ++i) {
    const double saved = model.params()[i];
    model.params()[i] = saved + eps;
    const double up =
        model.ItemLossAndGrad(features, targets, true, dropout_seed, nullptr);
    model.params()[i] = saved - eps;
    const double down =
        model.ItemLossAndGrad(features, targets, true, dropout_seed, nullptr);
    model.params()[i] = saved;
    const double numeric = (up - down) / (2.0 * eps);
    EXPECT_NEAR(grad[i], numeric, 1e-6 * std::max(1.0, std::abs(grad[i])))
        << "param " << i;
  }
}

TEST(TransducerModelGrad, MatchesCentralDifferencesSingleHypothesis) {
  CheckGradientAgainstCentralDifferences({Transcript({2, 1}, 3)}, 0.0, 0);
}

TEST(TransducerModelGrad, MatchesCentralDifferencesWithDropout) {
  CheckGradientAgainstCentralDifferences({Transcript({2, 1}, 3)}, 0.4, 555);
}

TEST(TransducerModelGrad, MatchesCentralDifferencesMultiHypothesis) {
  CheckGradientAgainstCentralDifferences(
      {Transcript({2, 1}, 3), Transcript({3}, 3), Transcript({}, 3)}, 0.25,
      77);
}

TEST(TransducerModelGrad, MultiHypothesisGradientIsSumOfSingles) {
  Rng rng(2718);
  ModelConfig config = TinyConfig();
  config.dropout_rate = 0.3;
  config.seed = 4;
  TransducerModel model{config};
  const FeatureSequence features = RandomFeatures(rng, 5, 3);
  const std::vector<Transcript> hyps = {Transcript({1, 2, 3}, 3),
                                        Transcript({2}, 3),
                                        Transcript({1, 1}, 3)};

  std::vector<double> combined;
  const double combined_loss =
      model.ItemLossAndGrad(features, hyps, true, 99, &combined);

  std::vector<double> summed(model.param_count(), 0.0);
  double summed_loss = 0.0;
  for (const Transcript& hyp : hyps) {
    std::vector<double> one;
    summed_loss += model.ItemLossAndGrad(features, {hyp}, true, 99, &one);
    for (std::size_t i = 0; i < one.size(); ++i) summed[i] += one[i];
  }

  EXPECT_NEAR(combined_loss, summed_loss, 1e-10);
  for (std::size_t i = 0; i < summed.size(); ++i) {
    ASSERT_NEAR(combined[i], summed[i], 1e-10) << "param " << i;
  }
}

TEST(TransducerModel, LatticeSlicesAreNormalized) {
  Rng rng(12);
  ModelConfig config = TinyConfig();
  config.dropout_rate = 0.2;
  config.seed = 3;
  TransducerModel model{config};
  const FeatureSequence features = RandomFeatures(rng, 6, 3);
  const Transcript target({3, 1, 2}, 3);
  const JointLogits lattice = model.ForwardLattice(features, target, true, 5);
  EXPECT_NO_THROW(TransducerLoss(lattice, target, true));
}

TEST(TransducerModel, LatticeMatchesIncrementalEvaluation) {
  Rng rng(71);
  ModelConfig config = TinyConfig();
  config.dropout_rate = 0.35;
  config.seed = 21;
  TransducerModel model{config};
  const FeatureSequence features = RandomFeatures(rng, 5, 3);
  const Transcript target({2, 3}, 3);

  // Eval mode never applies dropout, so the batched lattice must agree with
  // the incremental joint even though the config carries a nonzero rate.
  const JointLogits lattice = model.ForwardLattice(features, target, false, 7);
  const Matrix encoded = model.Encode(features);
  ASSERT_EQ(encoded.cols(), 5);

  std::vector<Vector> pred_states;
  pred_states.push_back(model.StartPredState());
  for (int y : target.labels()) {
    pred_states.push_back(model.StepPredState(pred_states.back(), y));
  }

  for (int t = 0; t < 5; ++t) {
    for (int u = 0; u <= target.length(); ++u) {
      const Vector slice = model.JointLogProbs(
          encoded.col(t), pred_states[static_cast<std::size_t>(u)]);
      for (int k = 0; k <= 3; ++k) {
        EXPECT_NEAR(lattice.at(t, u, k), slice(k), 1e-12)
            << "(" << t << ", " << u << ", " << k << ")";
      }
    }
  }
}

TEST(DropoutMaskFn, IsDeterministicPerPositionAndSeed) {
  const Vector a = DropoutMask(16, 0.5, 42, 3);
  const Vector b = DropoutMask(16, 0.5, 42, 3);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, DropoutMask(16, 0.5, 42, 4));
  EXPECT_NE(a, DropoutMask(16, 0.5, 43, 3));
  for (int i = 0; i < a.size(); ++i) {
    EXPECT_TRUE(a(i) == 0.0 || std::abs(a(i) - 2.0) < 1e-15) << a(i);
  }
  const Vector off = DropoutMask(16, 0.0, 42, 3);
  EXPECT_EQ(off, Vector::Ones(16));
  EXPECT_THROW(DropoutMask(16, 1.0, 42, 3), ValidationError);
}

TEST(TransducerModel, ValidatesInput) {
  TransducerModel model{TinyConfig()};
  Rng rng(9);
  EXPECT_THROW(model.Encode(RandomFeatures(rng, 3, 2)), ValidationError);
  EXPECT_THROW(model.StepPredState(model.StartPredState(), 0),
               ValidationError);
  EXPECT_THROW(model.StepPredState(model.StartPredState(), 4),
               ValidationError);
  const FeatureSequence features = RandomFeatures(rng, 3, 3);
  EXPECT_THROW(model.ItemLossAndGrad(features, {}, false, 0, nullptr),
               ValidationError);
}

TEST(TransducerModel, ValidatesConfig) {
  ModelConfig bad = TinyConfig();
  bad.dropout_rate = 1.0;
  EXPECT_THROW(TransducerModel{bad}, ValidationError);
  bad = TinyConfig();
  bad.dropout_rate = -0.1;
  EXPECT_THROW(TransducerModel{bad}, ValidationError);
  bad = TinyConfig();
  bad.vocab = 0;
  EXPECT_THROW(TransducerModel{bad}, ValidationError);
  bad = TinyConfig();
  bad.joint_dim = 0;
  EXPECT_THROW(TransducerModel{bad}, ValidationError);
}

TEST(TransducerModel, NonFiniteLossRaisesDivergenceError) {
  Rng rng(77);
  TransducerModel model{TinyConfig()};
  model.params()[0] = std::numeric_limits<double>::quiet_NaN();
  const FeatureSequence features = RandomFeatures(rng, 3, 3);
  std::vector<double> grad;
  EXPECT_THROW(
      model.ItemLossAndGrad(features, {Transcript({1}, 3)}, false, 0, &grad),
      DivergenceError);
}

TEST(TransducerModelGrad, GradientBufferIsOverwrittenOnEveryCall) {
  Rng rng(62);
  TransducerModel model{TinyConfig()};
  const FeatureSequence features = RandomFeatures(rng, 4, 3);
  const std::vector<Transcript> targets = {Transcript({1, 2}, 3)};

  std::vector<double> first;
  model.ItemLossAndGrad(features, targets, false, 0, &first);

  std::vector<double> reused = first;
  model.ItemLossAndGrad(features, targets, false, 0, &reused);
  EXPECT_EQ(reused, first);

  std::vector<double> wrong_size(3, 7.0);
  model.ItemLossAndGrad(features, targets, false, 0, &wrong_size);
  EXPECT_EQ(wrong_size, first);
}

TEST(TransducerModelGrad, EmptyTargetTouchesOnlyStartTokenEmbedding) {
  Rng rng(41);
  TransducerModel model{TinyConfig()};
  const FeatureSequence features = RandomFeatures(rng, 3, 3);
  std::vector<double> grad;
  const double loss =
      model.ItemLossAndGrad(features, {Transcript({}, 3)}, false, 0, &grad);
  EXPECT_GT(loss, 0.0);

  const ParamSegment* embed = nullptr;
  for (const ParamSegment& seg : model.segments()) {
    if (seg.name == "embed") embed = &seg;
  }
  ASSERT_NE(embed, nullptr);
  for (int r = 0; r < embed->rows; ++r) {
    double row_mass = 0.0;
    for (int c = 0; c < embed->cols; ++c) {
      const std::size_t at = embed->offset +
                             static_cast<std::size_t>(c) * embed->rows + r;
      row_mass += std::abs(grad[at]);
    }
    if (r == 0) {
      EXPECT_GT(row_mass, 0.0);
    } else {
      EXPECT_EQ(row_mass, 0.0) << "embed row " << r;
    }
  }
}

TEST(SgdStepFn, AppliesUpdate) {
  std::vector<double> params = {1.0, -2.0, 0.5};
  const std::vector<double> grad = {0.5, 0.25, -1.0};
  SgdStep(&params, grad, 0.1);
  EXPECT_DOUBLE_EQ(params[0], 0.95);
  EXPECT_DOUBLE_EQ(params[1], -2.025);
  EXPECT_DOUBLE_EQ(params[2], 0.6);
  EXPECT_THROW(SgdStep(&params, {1.0}, 0.1), ValidationError);
}

TEST(SgdStepFn, ZeroRateLeavesParamsUnchanged) {
  std::vector<double> params = {1.0, -2.0, 0.5};
  const std::vector<double> before = params;
  SgdStep(&params, {3.0, -1.0, 2.0}, 0.0);
  EXPECT_EQ(params, before);
}

TEST(SgdStepFn, TwoStepsMatchOneStepOnSummedGradients) {
  const std::vector<double> g1 = {0.5, 0.25, -1.0};
  const std::vector<double> g2 = {-0.125, 2.0, 0.75};
  std::vector<double> twice = {1.0, -2.0, 0.5};
  SgdStep(&twice, g1, 0.1);
  SgdStep(&twice, g2, 0.1);

  std::vector<double> once = {1.0, -2.0, 0.5};
  std::vector<double> sum(3);
  for (int i = 0; i < 3; ++i) sum[i] = g1[i] + g2[i];
  SgdStep(&once, sum, 0.1);

  for (int i = 0; i < 3; ++i) EXPECT_NEAR(twice[i], once[i], 1e-15) << i;
}

TEST(SgdStepFn, RejectsBadRatesAndDivergentGradients) {
  std::vector<double> params = {1.0};
  EXPECT_THROW(SgdStep(&params, {1.0}, -0.1), ValidationError);
  EXPECT_THROW(
      SgdStep(&params, {1.0}, std::numeric_limits<double>::infinity()),
      ValidationError);
  EXPECT_THROW(
      SgdStep(&params, {std::numeric_limits<double>::quiet_NaN()}, 0.1),
      DivergenceError);
  EXPECT_EQ(params[0], 1.0);
}

TEST(TransducerModel, SgdOnOneItemReducesLoss) {
  Rng rng(5150);
  ModelConfig config = TinyConfig();
  config.seed = 6;
  TransducerModel model{config};
  const FeatureSequence features = RandomFeatures(rng, 6, 3);
  const std::vector<Transcript> targets = {Transcript({1, 3}, 3)};

  const double initial = model.ItemLoss(features, targets);
  std::vector<double> grad;
  for (int step = 0; step < 40; ++step) {
    model.ItemLossAndGrad(features, targets, false, 0, &grad);
    SgdStep(&model.params(), grad, 0.2);
  }
  const double trained = model.ItemLoss(features, targets);
  EXPECT_LT(trained, 0.5 * initial);
}

}  // namespace
}  // namespace tlab
