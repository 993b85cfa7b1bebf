// tlab/model.hpp
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

#ifndef TLAB_MODEL_HPP_
#define TLAB_MODEL_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tlab/types.hpp"

namespace tlab {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

struct ModelConfig {
  int input_dim = 8;
  int encoder_hidden = 32;
  int pred_hidden = 32;
  int embed_dim = 8;
  int joint_dim = 32;
  int vocab = 12;
  // Applied to the prediction-output tap when a forward pass runs in train
  // mode; the variant knob that distinguishes sibling base models.
  double dropout_rate = 0.0;
  // Parameter initialization seed.
  std::uint64_t seed = 1;

  bool operator==(const ModelConfig&) const = default;
};

// One named, contiguous block of the flat parameter vector. Matrices are
// stored column major.
struct ParamSegment {
  std::string name;
  std::size_t offset = 0;
  int rows = 0;
  int cols = 0;

  std::size_t size() const {
    return static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols);
  }
};

// A small transducer: a single-gate recurrent encoder over feature frames, a
// single-gate recurrent prediction network over the label history (seeded by
// a start token), and a tanh joint network producing one log-probability
// slice per lattice node.
//
// The recurrent cell used by both networks is
//   f = sigmoid(Wf x + Uf h + bf)
//   c = tanh(Wh x + Uh (f*h) + bh)
//   h' = (1 - f)*h + f*c
// and the joint at node (t, u) is
//   z = tanh(We enc_t + Wp pred_u + bj),  a = Wo z + bo,
//   logits = log_softmax(a).
//
// During training an inverted-dropout mask can be applied to the prediction
// network output that feeds the joint (never to the recurrent state). The
// mask is a pure function of (dropout_seed, u), so every hypothesis in a
// multi-hypothesis batch sees the same mask at label position u.
class TransducerModel {
 public:
  // Validates the config and initializes parameters from config.seed.
  explicit TransducerModel(const ModelConfig& config);

  // Fills weight matrices with uniform draws in +-1/sqrt(fan_in) and zeroes
  // the biases. Deterministic per (seed, segment name).
  void InitParams(std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  const std::vector<ParamSegment>& segments() const { return segments_; }
  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }
  std::size_t param_count() const { return params_.size(); }

  // Encoder states for every frame, one column per frame.
  Matrix Encode(const FeatureSequence& features) const;

  // Prediction state after consuming the start token from the zero state.
  Vector StartPredState() const;

  // Advances the prediction state by one token (a label in [1, vocab]).
  Vector StepPredState(const Vector& state, int token) const;

  // Log-probability slice over {blank} + vocab for one lattice node. No
  // dropout is applied here; this is the evaluation-time joint.
  Vector JointLogProbs(const Vector& encoder_state,
                       const Vector& pred_state) const;

  // Full lattice of joint log probabilities for one utterance and one
  // target. In train mode the configured dropout is applied to the
  // prediction output tap.
  JointLogits ForwardLattice(const FeatureSequence& features,
                             const Transcript& target, bool train_mode = false,
                             std::uint64_t dropout_seed = 0) const;

  // Total loss over all hypotheses for one utterance: the sum of the exact
  // per-hypothesis losses. When `grad` is non-null it is overwritten with
  // the full parameter gradient (again the plain sum over hypotheses).
  // Throws DivergenceError if the loss is non-finite.
  double ItemLossAndGrad(const FeatureSequence& features,
                         const std::vector<Transcript>& targets,
                         bool train_mode, std::uint64_t dropout_seed,
                         std::vector<double>* grad) const;

  // Evaluation loss: no dropout, no gradient.
  double ItemLoss(const FeatureSequence& features,
                  const std::vector<Transcript>& targets) const;

 private:
  struct ForwardCache;

  JointLogits ForwardInternal(const FeatureSequence& features,
                              const Transcript& target, bool train_mode,
                              std::uint64_t dropout_seed,
                              ForwardCache* cache) const;
  void BackwardInternal(const ForwardCache& cache,
                        const LatticeTensor& activation_grad,
                        std::vector<double>* grad) const;

  ModelConfig config_;
  std::vector<ParamSegment> segments_;
  std::vector<double> params_;
};

// In-place SGD step: params -= lr * grad. lr must be finite and >= 0; a
// non-finite gradient entry raises DivergenceError so a runaway training run
// stops at the update rather than poisoning the parameters.
void SgdStep(std::vector<double>* params, const std::vector<double>& grad,
             double lr);

// The inverted-dropout mask applied to the prediction output at label
// position u: entries are 0 with probability rate, 1/(1 - rate) otherwise.
Vector DropoutMask(int dim, double rate, std::uint64_t dropout_seed, int u);

}  // namespace tlab

#endif  // TLAB_MODEL_HPP_
