// tlab/pipeline.hpp
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

#ifndef TLAB_PIPELINE_HPP_
#define TLAB_PIPELINE_HPP_

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "tlab/datagen.hpp"
#include "tlab/dataset_io.hpp"
#include "tlab/decoder.hpp"
#include "tlab/model.hpp"
#include "tlab/wer.hpp"

namespace tlab {

// One training example: borrowed features plus one or more target
// transcripts. A single target is ordinary supervised training; multiple
// targets make the per-item loss the sum of the per-hypothesis losses, which
// is how several pseudo-label streams teach one model at once.
struct TrainingItem {
  const FeatureSequence* features = nullptr;
  std::vector<Transcript> targets;
};

struct TrainingConfig {
  int epochs = 0;
  double lr = 0.04;
  int batch_size = 8;
  // Stddev of fresh Gaussian noise added to every feature value, redrawn per
  // visit. Zero disables it. Training with input noise forces the model to
  // fit its targets on a neighborhood of each input instead of the exact
  // point, which is what lets pseudo-label training generalize rather than
  // merely sharpen the decisions the teacher already made.
  double input_noise = 0.0;
  bool use_dropout = true;
  std::uint64_t run_seed = 0;
};

struct EpochStats {
  int epoch = 0;
  // Learning rate in effect during the epoch.
  double lr = 0.0;
  // Mean per-item loss over the training set, evaluated clean (no dropout,
  // no input noise) after the epoch's updates.
  double train_loss = 0.0;
  double dev_loss = std::numeric_limits<double>::quiet_NaN();
};

// Mean evaluation-mode loss per item.
double MeanItemLoss(const TransducerModel& model,
                    const std::vector<TrainingItem>& items);

// Minibatch SGD, in place. Each epoch reshuffles the items, averages the
// item gradients within a batch, and takes one step per batch. The learning
// rate halves whenever the post-epoch training loss fails to improve. With a
// dev set, the parameters with the best dev loss seen (the initial ones
// included) are restored at the end; without one the final parameters stand.
//
// Dropout masks and input noise are pure functions of (run_seed, step), so a
// run is reproducible bit for bit from its config. Zero epochs return the
// model untouched. Throws ValidationError for a malformed config or an empty
// training set and propagates DivergenceError from a non-finite loss or
// gradient.
std::vector<EpochStats> TrainModel(TransducerModel* model,
                                   const std::vector<TrainingItem>& train,
                                   const TrainingConfig& config,
                                   const std::vector<TrainingItem>* dev =
                                       nullptr);

// Supervised items, one target each. Throws ValidationError if any
// utterance lacks a transcript.
std::vector<TrainingItem> SupervisedItems(const Dataset& data);

// Beam-decodes every utterance with every model. Returns one record per
// (utterance, model), utterances in dataset order, the models' producer ids
// in the given order within each utterance. Deterministic.
std::vector<HypothesisRecord> PseudoLabel(
    const std::vector<const TransducerModel*>& models,
    const std::vector<std::string>& producer_ids, const Dataset& audio,
    const BeamConfig& beam);

// Pairs hypothesis records back onto the audio: every utterance gets one
// target per producer, in producer_ids order. Throws ValidationError when
// any (utterance, producer) hypothesis is missing or duplicated, or when a
// record names an unknown utterance.
std::vector<TrainingItem> PairHypotheses(
    const Dataset& audio, const std::vector<HypothesisRecord>& hypotheses,
    const std::vector<std::string>& producer_ids);

// A batch of hypotheses tagged with the pipeline stage that produced them.
struct HypothesisStage {
  std::string stage;
  std::vector<HypothesisRecord> hypotheses;
};

// Corpus-level score of one model on one dataset.
struct StageScore {
  std::string stage;
  std::string dataset;
  EditCounts counts;
  int reference_tokens = 0;
  int utterance_count = 0;
  double wer = 0.0;
};

// Everything an experiment leaves behind: each hypothesis batch used in a
// loss or a score, and each score. Reports render from this, and any score
// can be recomputed from the stored hypotheses alone.
struct ExperimentRecord {
  std::vector<HypothesisStage> hypothesis_stages;
  std::vector<StageScore> scores;
};

// Decodes `data` and scores it against the reference transcripts. When a
// record is given, the decoded hypotheses are stored under `stage` alongside
// the score. Throws ValidationError if an utterance has no reference.
StageScore ScoreDataset(const TransducerModel& model, const Dataset& data,
                        const BeamConfig& beam, const std::string& stage,
                        const std::string& producer_id,
                        ExperimentRecord* record = nullptr);

// Renders the record's scores as a plain-text table, stages down the rows
// and datasets across the columns. Throws ValidationError on a record with
// no scores.
std::string RenderReport(const ExperimentRecord& record);

struct FinetunePlan {
  // 1 or 2. A second iteration re-decodes the audio with every
  // iteration-one model to refresh the hypothesis streams, then fine-tunes
  // again from the iteration-one models.
  int iterations = 1;
  // Settings for each fine-tuning run. run_seed is ignored; each run's seed
  // derives from `seed`, the iteration, and the model index.
  TrainingConfig training;
  BeamConfig beam;
  std::uint64_t seed = 0;
};

// Unsupervised fine-tuning on untranscribed audio. Every iteration decodes
// the audio with all M current models and fine-tunes each of them on the
// union of the M hypothesis streams; with M = 1 the model simply trains on
// its own output. Returns the fine-tuned models in input order. When a
// record is given, each iteration's hypothesis batch is stored.
std::vector<TransducerModel> IterateFinetune(
    const std::vector<TransducerModel>& models,
    const std::vector<std::string>& producer_ids, const Dataset& audio,
    const FinetunePlan& plan, ExperimentRecord* record = nullptr);

struct SelfTrainPlan {
  // Initialization for the final model; ignored when continuing from the
  // first teacher.
  ModelConfig final_config;
  TrainingConfig training;
  BeamConfig beam;
  // The final model ordinarily trains from fresh initialization on the
  // pooled data. Set to continue from a copy of teachers[0] instead.
  bool continue_from_first_teacher = false;
};

// Semi-supervised training: the teachers pseudo-label the unlabeled audio,
// the pseudo-labeled items are pooled with the supervised ones into one
// training set (the per-epoch shuffle mixes them uniformly), and a final
// model trains on the pool. Each unlabeled utterance carries all M teacher
// hypotheses as targets. An empty unlabeled set reduces to plain supervised
// training. Throws ValidationError when the labeled and unlabeled ids
// overlap.
TransducerModel SelfTrain(const std::vector<const TransducerModel*>& teachers,
                          const std::vector<std::string>& producer_ids,
                          const Dataset& labeled, const Dataset& unlabeled,
                          const SelfTrainPlan& plan,
                          const std::vector<TrainingItem>* dev = nullptr,
                          ExperimentRecord* record = nullptr);

}  // namespace tlab

#endif  // TLAB_PIPELINE_HPP_
