// tlab/model.cpp
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
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tlab/logmath.hpp"
#include "tlab/rng.hpp"
#include "tlab/rnnt_loss.hpp"

namespace tlab {

namespace {

using ConstMap = Eigen::Map<const Matrix>;
using MutMap = Eigen::Map<Matrix>;

// Fixed segment order; the names are part of the checkpoint format.
enum SegmentIndex {
  kEncForgetW = 0,
  kEncForgetU,
  kEncForgetB,
  kEncCandW,
  kEncCandU,
  kEncCandB,
  kEmbed,
  kPredForgetW,
  kPredForgetU,
  kPredForgetB,
  kPredCandW,
  kPredCandU,
  kPredCandB,
  kJointEncW,
  kJointPredW,
  kJointB,
  kJointOutW,
  kJointOutB,
  kSegmentCount,
};

ConstMap SegMap(const std::vector<double>& storage, const ParamSegment& seg) {
  return ConstMap(storage.data() + seg.offset, seg.rows, seg.cols);
}

MutMap SegMap(std::vector<double>* storage, const ParamSegment& seg) {
  return MutMap(storage->data() + seg.offset, seg.rows, seg.cols);
}

struct MguWeights {
  ConstMap wf, uf, wh, uh, bf, bh;
};

struct MguGrads {
  MutMap wf, uf, wh, uh, bf, bh;
};

struct MguChainCache {
  Matrix inputs;  // in_dim x steps
  Matrix states;  // hidden x (steps + 1), column 0 is the initial state
  Matrix f, c, fh;  // hidden x steps
};

MguChainCache RunMgu(const MguWeights& w, Matrix inputs) {
  const int hidden = static_cast<int>(w.uf.rows());
  const int steps = static_cast<int>(inputs.cols());
  MguChainCache cache;
  cache.inputs = std::move(inputs);
  cache.states = Matrix::Zero(hidden, steps + 1);
  cache.f.resize(hidden, steps);
  cache.c.resize(hidden, steps);
  cache.fh.resize(hidden, steps);
  for (int s = 0; s < steps; ++s) {
    const auto h_prev = cache.states.col(s);
    const Vector af = w.wf * cache.inputs.col(s) + w.uf * h_prev + w.bf.col(0);
    cache.f.col(s) = (1.0 / (1.0 + (-af.array()).exp())).matrix();
    cache.fh.col(s) = cache.f.col(s).cwiseProduct(h_prev);
    const Vector ac =
        w.wh * cache.inputs.col(s) + w.uh * cache.fh.col(s) + w.bh.col(0);
    cache.c.col(s) = ac.array().tanh().matrix();
    cache.states.col(s + 1) =
        h_prev + cache.f.col(s).cwiseProduct(cache.c.col(s) - h_prev);
  }
  return cache;
}

Vector MguSingleStep(const MguWeights& w, const Vector& x,
                     const Vector& h_prev) {
  const Vector af = w.wf * x + w.uf * h_prev + w.bf.col(0);
  const Vector f = (1.0 / (1.0 + (-af.array()).exp())).matrix();
  const Vector ac = w.wh * x + w.uh * f.cwiseProduct(h_prev) + w.bh.col(0);
  const Vector c = ac.array().tanh().matrix();
  return h_prev + f.cwiseProduct(c - h_prev);
}

// Reverse pass over a whole chain. dstates holds the gradient arriving at
// each step's output state from outside the chain. Returns the gradient with
// respect to the inputs.
Matrix MguBackward(const MguWeights& w, const MguChainCache& cache,
                   const Matrix& dstates, MguGrads* g) {
  const int steps = static_cast<int>(cache.f.cols());
  Matrix dinputs(cache.inputs.rows(), steps);
  Vector dh = Vector::Zero(w.uf.rows());
  for (int s = steps - 1; s >= 0; --s) {
    dh += dstates.col(s);
    const Vector h_prev = cache.states.col(s);
    const Vector f = cache.f.col(s);
    const Vector c = cache.c.col(s);
    Vector df = dh.cwiseProduct(c - h_prev);
    const Vector dc = dh.cwiseProduct(f);
    Vector dhp = dh - dh.cwiseProduct(f);
    const Vector dac = (dc.array() * (1.0 - c.array().square())).matrix();
    const Vector dfh = w.uh.transpose() * dac;
    df += dfh.cwiseProduct(h_prev);
    dhp += dfh.cwiseProduct(f);
    const Vector daf = (df.array() * f.array() * (1.0 - f.array())).matrix();
    dhp.noalias() += w.uf.transpose() * daf;
    dinputs.col(s).noalias() = w.wf.transpose() * daf;
    dinputs.col(s).noalias() += w.wh.transpose() * dac;
    g->wf.noalias() += daf * cache.inputs.col(s).transpose();
    g->uf.noalias() += daf * h_prev.transpose();
    g->bf.col(0) += daf;
    g->wh.noalias() += dac * cache.inputs.col(s).transpose();
    g->uh.noalias() += dac * cache.fh.col(s).transpose();
    g->bh.col(0) += dac;
    dh = dhp;
  }
  return dinputs;
}

Matrix FramesAsColumns(const FeatureSequence& features) {
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                 Eigen::RowMajor>>
      rows(features.data.data(), features.frame_count, features.dim);
  return rows.transpose();
}

}  // namespace

struct TransducerModel::ForwardCache {
  MguChainCache enc;
  MguChainCache pred;
  std::vector<int> tokens;  // start token followed by the target labels
  Matrix masks;             // pred_hidden x (L + 1)
  Matrix masked_pred;       // pred_hidden x (L + 1)
  Matrix z;                 // joint_dim x (T * (L + 1))
  int frame_count = 0;
  int label_count = 0;
};

TransducerModel::TransducerModel(const ModelConfig& config) : config_(config) {
  if (config_.input_dim < 1 || config_.encoder_hidden < 1 ||
      config_.pred_hidden < 1 || config_.embed_dim < 1 ||
      config_.joint_dim < 1 || config_.vocab < 1) {
    throw ValidationError("model config: all dimensions must be >= 1");
  }
  if (!(config_.dropout_rate >= 0.0 && config_.dropout_rate < 1.0)) {
    throw ValidationError("model config: dropout rate must lie in [0, 1)");
  }
  const int d = config_.input_dim;
  const int he = config_.encoder_hidden;
  const int hp = config_.pred_hidden;
  const int e = config_.embed_dim;
  const int j = config_.joint_dim;
  const int vs = config_.vocab + 1;

  std::size_t offset = 0;
  auto add = [&](const char* name, int rows, int cols) {
    segments_.push_back(ParamSegment{name, offset, rows, cols});
    offset += segments_.back().size();
  };
  add("enc.forget.w", he, d);
  add("enc.forget.u", he, he);
  add("enc.forget.b", he, 1);
  add("enc.cand.w", he, d);
  add("enc.cand.u", he, he);
  add("enc.cand.b", he, 1);
  add("embed", vs, e);
  add("pred.forget.w", hp, e);
  add("pred.forget.u", hp, hp);
  add("pred.forget.b", hp, 1);
  add("pred.cand.w", hp, e);
  add("pred.cand.u", hp, hp);
  add("pred.cand.b", hp, 1);
  add("joint.enc.w", j, he);
  add("joint.pred.w", j, hp);
  add("joint.b", j, 1);
  add("joint.out.w", vs, j);
  add("joint.out.b", vs, 1);
  params_.assign(offset, 0.0);
  InitParams(config_.seed);
}

void TransducerModel::InitParams(std::uint64_t seed) {
  for (const ParamSegment& seg : segments_) {
    double* block = params_.data() + seg.offset;
    if (seg.name.ends_with(".b")) {
      std::fill(block, block + seg.size(), 0.0);
      continue;
    }
    Rng rng(MixSeed(seed, HashString(seg.name)));
    const double bound = 1.0 / std::sqrt(static_cast<double>(seg.cols));
    for (std::size_t i = 0; i < seg.size(); ++i) {
      block[i] = rng.Uniform(-bound, bound);
    }
  }
}

namespace {

MguWeights EncoderWeights(const std::vector<double>& p,
                          const std::vector<ParamSegment>& segs) {
  return MguWeights{SegMap(p, segs[kEncForgetW]), SegMap(p, segs[kEncForgetU]),
                    SegMap(p, segs[kEncCandW]),   SegMap(p, segs[kEncCandU]),
                    SegMap(p, segs[kEncForgetB]), SegMap(p, segs[kEncCandB])};
}

MguWeights PredWeights(const std::vector<double>& p,
                       const std::vector<ParamSegment>& segs) {
  return MguWeights{SegMap(p, segs[kPredForgetW]),
                    SegMap(p, segs[kPredForgetU]),
                    SegMap(p, segs[kPredCandW]),
                    SegMap(p, segs[kPredCandU]),
                    SegMap(p, segs[kPredForgetB]),
                    SegMap(p, segs[kPredCandB])};
}

}  // namespace

Matrix TransducerModel::Encode(const FeatureSequence& features) const {
  if (features.dim != config_.input_dim) {
    throw ValidationError("encode: feature dim " +
                          std::to_string(features.dim) + " does not match " +
                          std::to_string(config_.input_dim));
  }
  MguChainCache cache =
      RunMgu(EncoderWeights(params_, segments_), FramesAsColumns(features));
  return cache.states.rightCols(features.frame_count);
}

Vector TransducerModel::StartPredState() const {
  ConstMap embed = SegMap(params_, segments_[kEmbed]);
  return MguSingleStep(PredWeights(params_, segments_),
                       embed.row(kBlank).transpose(),
                       Vector::Zero(config_.pred_hidden));
}

Vector TransducerModel::StepPredState(const Vector& state, int token) const {
  if (token < 1 || token > config_.vocab) {
    throw ValidationError("prediction step: token " + std::to_string(token) +
                          " outside [1, " + std::to_string(config_.vocab) +
                          "]");
  }
  if (state.size() != config_.pred_hidden) {
    throw ValidationError("prediction step: bad state size");
  }
  ConstMap embed = SegMap(params_, segments_[kEmbed]);
  return MguSingleStep(PredWeights(params_, segments_),
                       embed.row(token).transpose(), state);
}

Vector TransducerModel::JointLogProbs(const Vector& encoder_state,
                                      const Vector& pred_state) const {
  if (encoder_state.size() != config_.encoder_hidden ||
      pred_state.size() != config_.pred_hidden) {
    throw ValidationError("joint: state sizes do not match the config");
  }
  ConstMap we = SegMap(params_, segments_[kJointEncW]);
  ConstMap wp = SegMap(params_, segments_[kJointPredW]);
  ConstMap bj = SegMap(params_, segments_[kJointB]);
  ConstMap wo = SegMap(params_, segments_[kJointOutW]);
  ConstMap bo = SegMap(params_, segments_[kJointOutB]);
  const Vector s = we * encoder_state + wp * pred_state + bj.col(0);
  const Vector z = s.array().tanh().matrix();
  Vector a = wo * z + bo.col(0);
  LogSoftmaxInPlace(std::span<double>(a.data(), static_cast<std::size_t>(a.size())));
  return a;
}

JointLogits TransducerModel::ForwardInternal(const FeatureSequence& features,
                                             const Transcript& target,
                                             bool train_mode,
                                             std::uint64_t dropout_seed,
                                             ForwardCache* cache) const {
  if (features.dim != config_.input_dim) {
    throw ValidationError("forward: feature dim does not match the config");
  }
  for (int y : target.labels()) {
    if (y > config_.vocab) {
      throw ValidationError("forward: target label " + std::to_string(y) +
                            " outside the model vocab");
    }
  }
  const double dropout_rate = train_mode ? config_.dropout_rate : 0.0;

  const int T = features.frame_count;
  const int L = target.length();
  const int hp = config_.pred_hidden;
  const int vs = config_.vocab + 1;

  cache->frame_count = T;
  cache->label_count = L;
  cache->enc =
      RunMgu(EncoderWeights(params_, segments_), FramesAsColumns(features));

  cache->tokens.assign(1, kBlank);
  for (int y : target.labels()) cache->tokens.push_back(y);
  ConstMap embed = SegMap(params_, segments_[kEmbed]);
  Matrix pred_inputs(config_.embed_dim, L + 1);
  for (int u = 0; u <= L; ++u) {
    pred_inputs.col(u) = embed.row(cache->tokens[static_cast<std::size_t>(u)])
                             .transpose();
  }
  cache->pred = RunMgu(PredWeights(params_, segments_), std::move(pred_inputs));

  cache->masks.resize(hp, L + 1);
  for (int u = 0; u <= L; ++u) {
    cache->masks.col(u) = DropoutMask(hp, dropout_rate, dropout_seed, u);
  }
  cache->masked_pred =
      cache->pred.states.rightCols(L + 1).cwiseProduct(cache->masks);

  ConstMap we = SegMap(params_, segments_[kJointEncW]);
  ConstMap wp = SegMap(params_, segments_[kJointPredW]);
  ConstMap bj = SegMap(params_, segments_[kJointB]);
  ConstMap wo = SegMap(params_, segments_[kJointOutW]);
  ConstMap bo = SegMap(params_, segments_[kJointOutB]);

  const Matrix enc_proj = we * cache->enc.states.rightCols(T);
  const Matrix pred_proj = wp * cache->masked_pred;
  cache->z.resize(config_.joint_dim, static_cast<Eigen::Index>(T) * (L + 1));

  JointLogits logits(T, L, config_.vocab);
  Vector a(vs);
  for (int t = 0; t < T; ++t) {
    for (int u = 0; u <= L; ++u) {
      const Eigen::Index idx = static_cast<Eigen::Index>(t) * (L + 1) + u;
      const Vector s = enc_proj.col(t) + pred_proj.col(u) + bj.col(0);
      cache->z.col(idx) = s.array().tanh().matrix();
      a.noalias() = wo * cache->z.col(idx);
      a += bo.col(0);
      LogSoftmaxInPlace(
          std::span<double>(a.data(), static_cast<std::size_t>(vs)));
      for (int k = 0; k < vs; ++k) logits.at(t, u, k) = a(k);
    }
  }
  return logits;
}

void TransducerModel::BackwardInternal(const ForwardCache& cache,
                                       const LatticeTensor& activation_grad,
                                       std::vector<double>* grad) const {
  const int T = cache.frame_count;
  const int L = cache.label_count;
  const int vs = config_.vocab + 1;

  ConstMap we = SegMap(params_, segments_[kJointEncW]);
  ConstMap wp = SegMap(params_, segments_[kJointPredW]);
  ConstMap wo = SegMap(params_, segments_[kJointOutW]);

  MutMap g_we = SegMap(grad, segments_[kJointEncW]);
  MutMap g_wp = SegMap(grad, segments_[kJointPredW]);
  MutMap g_bj = SegMap(grad, segments_[kJointB]);
  MutMap g_wo = SegMap(grad, segments_[kJointOutW]);
  MutMap g_bo = SegMap(grad, segments_[kJointOutB]);
  MutMap g_embed = SegMap(grad, segments_[kEmbed]);
  MguGrads g_enc{SegMap(grad, segments_[kEncForgetW]),
                 SegMap(grad, segments_[kEncForgetU]),
                 SegMap(grad, segments_[kEncCandW]),
                 SegMap(grad, segments_[kEncCandU]),
                 SegMap(grad, segments_[kEncForgetB]),
                 SegMap(grad, segments_[kEncCandB])};
  MguGrads g_pred{SegMap(grad, segments_[kPredForgetW]),
                  SegMap(grad, segments_[kPredForgetU]),
                  SegMap(grad, segments_[kPredCandW]),
                  SegMap(grad, segments_[kPredCandU]),
                  SegMap(grad, segments_[kPredForgetB]),
                  SegMap(grad, segments_[kPredCandB])};

  Matrix d_enc = Matrix::Zero(config_.encoder_hidden, T);
  Matrix d_tap = Matrix::Zero(config_.pred_hidden, L + 1);
  Vector da(vs);
  for (int t = 0; t < T; ++t) {
    for (int u = 0; u <= L; ++u) {
      const Eigen::Index idx = static_cast<Eigen::Index>(t) * (L + 1) + u;
      for (int k = 0; k < vs; ++k) da(k) = activation_grad.at(t, u, k);
      const auto z = cache.z.col(idx);
      g_wo.noalias() += da * z.transpose();
      g_bo.col(0) += da;
      const Vector dz = wo.transpose() * da;
      const Vector ds = (dz.array() * (1.0 - z.array().square())).matrix();
      g_we.noalias() += ds * cache.enc.states.col(t + 1).transpose();
      g_wp.noalias() += ds * cache.masked_pred.col(u).transpose();
      g_bj.col(0) += ds;
      d_enc.col(t).noalias() += we.transpose() * ds;
      d_tap.col(u).noalias() += wp.transpose() * ds;
    }
  }

  const Matrix d_pred_states = d_tap.cwiseProduct(cache.masks);
  const Matrix d_pred_inputs = MguBackward(PredWeights(params_, segments_),
                                           cache.pred, d_pred_states, &g_pred);
  for (int u = 0; u <= L; ++u) {
    g_embed.row(cache.tokens[static_cast<std::size_t>(u)]) +=
        d_pred_inputs.col(u).transpose();
  }
  MguBackward(EncoderWeights(params_, segments_), cache.enc, d_enc, &g_enc);
}

JointLogits TransducerModel::ForwardLattice(const FeatureSequence& features,
                                            const Transcript& target,
                                            bool train_mode,
                                            std::uint64_t dropout_seed) const {
  ForwardCache cache;
  return ForwardInternal(features, target, train_mode, dropout_seed, &cache);
}

double TransducerModel::ItemLossAndGrad(const FeatureSequence& features,
                                        const std::vector<Transcript>& targets,
                                        bool train_mode,
                                        std::uint64_t dropout_seed,
                                        std::vector<double>* grad) const {
  if (targets.empty()) {
    throw ValidationError("item loss: need at least one hypothesis");
  }
  if (grad != nullptr) grad->assign(param_count(), 0.0);
  double total = 0.0;
  ForwardCache cache;
  for (const Transcript& target : targets) {
    const JointLogits lattice =
        ForwardInternal(features, target, train_mode, dropout_seed, &cache);
    TransducerLossResult result = TransducerLossWithGrad(lattice, target);
    total += result.loss;
    if (grad != nullptr) BackwardInternal(cache, result.grad, grad);
  }
  if (!std::isfinite(total)) {
    throw DivergenceError(
        "item loss diverged: loss=" + std::to_string(total) + " over " +
        std::to_string(targets.size()) + " hypothesis(es), " +
        std::to_string(features.frame_count) + " frames");
  }
  return total;
}

double TransducerModel::ItemLoss(const FeatureSequence& features,
                                 const std::vector<Transcript>& targets) const {
  return ItemLossAndGrad(features, targets, false, 0, nullptr);
}

void SgdStep(std::vector<double>* params, const std::vector<double>& grad,
             double lr) {
  if (params->size() != grad.size()) {
    throw ValidationError("sgd: parameter and gradient sizes differ");
  }
  if (!std::isfinite(lr) || lr < 0.0) {
    throw ValidationError("sgd: learning rate must be finite and >= 0");
  }
  for (double g : grad) {
    if (!std::isfinite(g)) {
      throw DivergenceError("sgd: non-finite gradient entry");
    }
  }
  for (std::size_t i = 0; i < grad.size(); ++i) {
    (*params)[i] -= lr * grad[i];
  }
}

Vector DropoutMask(int dim, double rate, std::uint64_t dropout_seed, int u) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw ValidationError("dropout mask: rate must lie in [0, 1)");
  }
  Vector mask = Vector::Ones(dim);
  if (rate == 0.0) return mask;
  Rng rng(MixSeed(dropout_seed, 0x7461700aULL, static_cast<std::uint64_t>(u)));
  const double keep = 1.0 - rate;
  for (int i = 0; i < dim; ++i) {
    mask(i) = rng.Uniform() < rate ? 0.0 : 1.0 / keep;
  }
  return mask;
}

}  // namespace tlab
