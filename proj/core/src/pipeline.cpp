// tlab/pipeline.cpp
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

#include "tlab/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <utility>

#include "tlab/errors.hpp"
#include "tlab/rng.hpp"

namespace tlab {
namespace {

// Seed-stream tags. Changing any of these changes every training run.
constexpr std::uint64_t kShuffleStream = 0x0eafull;
constexpr std::uint64_t kNoiseStream = 0x9015eull;
constexpr std::uint64_t kDropoutStream = 0xd209ull;
constexpr std::uint64_t kFinetuneStream = 0xf17eull;

void ValidateTrainingInputs(const std::vector<TrainingItem>& train,
                            const TrainingConfig& config) {
  if (config.epochs < 0) throw ValidationError("training: epochs must be >= 0");
  if (config.batch_size < 1) {
    throw ValidationError("training: batch_size must be >= 1");
  }
  if (!std::isfinite(config.lr) || config.lr < 0.0) {
    throw ValidationError("training: lr must be finite and >= 0");
  }
  if (!std::isfinite(config.input_noise) || config.input_noise < 0.0) {
    throw ValidationError("training: input_noise must be finite and >= 0");
  }
  if (train.empty()) throw ValidationError("training: no items");
  for (const TrainingItem& item : train) {
    if (item.features == nullptr) {
      throw ValidationError("training: item without features");
    }
    if (item.targets.empty()) {
      throw ValidationError("training: item without targets");
    }
  }
}

}  // namespace

double MeanItemLoss(const TransducerModel& model,
                    const std::vector<TrainingItem>& items) {
  if (items.empty()) throw ValidationError("loss over an empty item set");
  double total = 0.0;
  for (const TrainingItem& item : items) {
    total += model.ItemLoss(*item.features, item.targets);
  }
  return total / static_cast<double>(items.size());
}

std::vector<EpochStats> TrainModel(TransducerModel* model,
                                   const std::vector<TrainingItem>& train,
                                   const TrainingConfig& config,
                                   const std::vector<TrainingItem>* dev) {
  ValidateTrainingInputs(train, config);
  std::vector<EpochStats> history;
  if (config.epochs == 0) return history;

  Rng shuffle_rng(MixSeed(config.run_seed, kShuffleStream));
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);

  double lr = config.lr;
  double prev_epoch_loss = MeanItemLoss(*model, train);
  std::vector<double> best_params;
  double best_dev = 0.0;
  if (dev) {
    best_dev = MeanItemLoss(*model, *dev);
    best_params = model->params();
  }

  std::vector<double> grad;
  std::vector<double> batch_grad;
  std::uint64_t step = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(
          shuffle_rng.UniformInt(0, static_cast<int>(i) - 1));
      std::swap(order[i - 1], order[j]);
    }
    const std::size_t batch = static_cast<std::size_t>(config.batch_size);
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(order.size(), start + batch);
      batch_grad.assign(model->param_count(), 0.0);
      for (std::size_t i = start; i < end; ++i) {
        const TrainingItem& item = train[order[i]];
        ++step;
        const std::uint64_t dropout_seed =
            MixSeed(config.run_seed, kDropoutStream, step);
        if (config.input_noise > 0.0) {
          FeatureSequence noisy = *item.features;
          Rng noise_rng(MixSeed(config.run_seed, kNoiseStream, step));
          for (double& v : noisy.data) {
            v += config.input_noise * noise_rng.Gaussian();
          }
          model->ItemLossAndGrad(noisy, item.targets, config.use_dropout,
                                 dropout_seed, &grad);
        } else {
          model->ItemLossAndGrad(*item.features, item.targets,
                                 config.use_dropout, dropout_seed, &grad);
        }
        for (std::size_t p = 0; p < grad.size(); ++p) batch_grad[p] += grad[p];
      }
      const double scale = 1.0 / static_cast<double>(end - start);
      for (double& g : batch_grad) g *= scale;
      SgdStep(&model->params(), batch_grad, lr);
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.lr = lr;
    stats.train_loss = MeanItemLoss(*model, train);
    if (stats.train_loss > prev_epoch_loss) lr *= 0.5;
    prev_epoch_loss = stats.train_loss;
    if (dev) {
      stats.dev_loss = MeanItemLoss(*model, *dev);
      if (stats.dev_loss < best_dev) {
        best_dev = stats.dev_loss;
        best_params = model->params();
      }
    }
    history.push_back(stats);
  }
  if (dev) model->params() = best_params;
  return history;
}

std::vector<TrainingItem> SupervisedItems(const Dataset& data) {
  std::vector<TrainingItem> items;
  items.reserve(data.utterances.size());
  for (const Utterance& utt : data.utterances) {
    if (!utt.transcript.has_value()) {
      throw ValidationError("supervised items: utterance '" + utt.id +
                            "' has no transcript");
    }
    items.push_back({&utt.features, {*utt.transcript}});
  }
  return items;
}

std::vector<HypothesisRecord> PseudoLabel(
    const std::vector<const TransducerModel*>& models,
    const std::vector<std::string>& producer_ids, const Dataset& audio,
    const BeamConfig& beam) {
  if (models.empty()) throw ValidationError("pseudo-label: no models");
  if (models.size() != producer_ids.size()) {
    throw ValidationError("pseudo-label: one producer id per model required");
  }
  std::vector<HypothesisRecord> records;
  records.reserve(audio.utterances.size() * models.size());
  for (const Utterance& utt : audio.utterances) {
    for (std::size_t m = 0; m < models.size(); ++m) {
      const ScoredHypothesis hyp =
          BeamDecode(*models[m], utt.features, beam, producer_ids[m])[0];
      records.push_back(
          {utt.id, producer_ids[m], hyp.score, hyp.transcript.labels()});
    }
  }
  return records;
}

std::vector<TrainingItem> PairHypotheses(
    const Dataset& audio, const std::vector<HypothesisRecord>& hypotheses,
    const std::vector<std::string>& producer_ids) {
  if (producer_ids.empty()) {
    throw ValidationError("hypothesis pairing: no producers");
  }
  std::map<std::string, std::size_t> utt_index;
  for (std::size_t i = 0; i < audio.utterances.size(); ++i) {
    utt_index[audio.utterances[i].id] = i;
  }
  std::map<std::string, std::size_t> producer_index;
  for (std::size_t m = 0; m < producer_ids.size(); ++m) {
    producer_index[producer_ids[m]] = m;
  }

  // targets[utterance][producer], filled exactly once each.
  std::vector<std::vector<std::optional<Transcript>>> targets(
      audio.utterances.size(),
      std::vector<std::optional<Transcript>>(producer_ids.size()));
  for (const HypothesisRecord& rec : hypotheses) {
    const auto utt_it = utt_index.find(rec.utterance_id);
    if (utt_it == utt_index.end()) {
      throw ValidationError("hypothesis pairing: unknown utterance '" +
                            rec.utterance_id + "'");
    }
    const auto prod_it = producer_index.find(rec.producer_id);
    if (prod_it == producer_index.end()) {
      throw ValidationError("hypothesis pairing: unknown producer '" +
                            rec.producer_id + "'");
    }
    std::optional<Transcript>& slot =
        targets[utt_it->second][prod_it->second];
    if (slot.has_value()) {
      throw ValidationError("hypothesis pairing: duplicate hypothesis for '" +
                            rec.utterance_id + "' from '" + rec.producer_id +
                            "'");
    }
    slot = Transcript(rec.labels, audio.vocab);
  }

  std::vector<TrainingItem> items;
  items.reserve(audio.utterances.size());
  for (std::size_t i = 0; i < audio.utterances.size(); ++i) {
    TrainingItem item;
    item.features = &audio.utterances[i].features;
    for (std::size_t m = 0; m < producer_ids.size(); ++m) {
      if (!targets[i][m].has_value()) {
        throw ValidationError("hypothesis pairing: utterance '" +
                              audio.utterances[i].id + "' has no hypothesis " +
                              "from '" + producer_ids[m] + "'");
      }
      item.targets.push_back(std::move(*targets[i][m]));
    }
    items.push_back(std::move(item));
  }
  return items;
}

StageScore ScoreDataset(const TransducerModel& model, const Dataset& data,
                        const BeamConfig& beam, const std::string& stage,
                        const std::string& producer_id,
                        ExperimentRecord* record) {
  WerScorer scorer;
  std::vector<HypothesisRecord> hyps;
  hyps.reserve(data.utterances.size());
  for (const Utterance& utt : data.utterances) {
    if (!utt.transcript.has_value()) {
      throw ValidationError("scoring: utterance '" + utt.id +
                            "' has no reference transcript");
    }
    const ScoredHypothesis hyp =
        BeamDecode(model, utt.features, beam, producer_id)[0];
    scorer.Add(utt.transcript->labels(), hyp.transcript.labels());
    hyps.push_back(
        {utt.id, producer_id, hyp.score, hyp.transcript.labels()});
  }
  StageScore score;
  score.stage = stage;
  score.dataset = data.split;
  score.counts = scorer.counts();
  score.reference_tokens = scorer.reference_tokens();
  score.utterance_count = scorer.utterance_count();
  score.wer = scorer.wer();
  if (record) {
    record->hypothesis_stages.push_back({stage, std::move(hyps)});
    record->scores.push_back(score);
  }
  return score;
}

std::string RenderReport(const ExperimentRecord& record) {
  if (record.scores.empty()) {
    throw ValidationError("report: record has no scores");
  }
  std::vector<std::string> stages;
  std::vector<std::string> datasets;
  std::map<std::pair<std::string, std::string>, const StageScore*> cells;
  for (const StageScore& score : record.scores) {
    if (std::find(stages.begin(), stages.end(), score.stage) == stages.end()) {
      stages.push_back(score.stage);
    }
    if (std::find(datasets.begin(), datasets.end(), score.dataset) ==
        datasets.end()) {
      datasets.push_back(score.dataset);
    }
    cells[{score.stage, score.dataset}] = &score;
  }

  std::size_t stage_width = 6;
  for (const std::string& s : stages) stage_width = std::max(stage_width, s.size());

  std::ostringstream out;
  out << "WER (%), " << record.scores.size() << " scored runs\n";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%-*s", static_cast<int>(stage_width),
                "stage");
  out << buf;
  for (const std::string& d : datasets) {
    std::snprintf(buf, sizeof(buf), "  %12s", d.c_str());
    out << buf;
  }
  out << "\n";
  for (const std::string& s : stages) {
    std::snprintf(buf, sizeof(buf), "%-*s", static_cast<int>(stage_width),
                  s.c_str());
    out << buf;
    for (const std::string& d : datasets) {
      const auto it = cells.find({s, d});
      if (it == cells.end()) {
        std::snprintf(buf, sizeof(buf), "  %12s", "-");
      } else {
        std::snprintf(buf, sizeof(buf), "  %12.2f", it->second->wer);
      }
      out << buf;
    }
    out << "\n";
  }
  return out.str();
}

std::vector<TransducerModel> IterateFinetune(
    const std::vector<TransducerModel>& models,
    const std::vector<std::string>& producer_ids, const Dataset& audio,
    const FinetunePlan& plan, ExperimentRecord* record) {
  if (models.empty()) throw ValidationError("fine-tuning: no models");
  if (models.size() != producer_ids.size()) {
    throw ValidationError("fine-tuning: one producer id per model required");
  }
  if (plan.iterations != 1 && plan.iterations != 2) {
    throw ValidationError("fine-tuning: iterations must be 1 or 2");
  }

  std::vector<TransducerModel> current = models;
  for (int iteration = 0; iteration < plan.iterations; ++iteration) {
    std::vector<const TransducerModel*> decoders;
    for (const TransducerModel& m : current) decoders.push_back(&m);
    std::vector<HypothesisRecord> hyps =
        PseudoLabel(decoders, producer_ids, audio, plan.beam);
    const std::vector<TrainingItem> items =
        PairHypotheses(audio, hyps, producer_ids);
    if (record) {
      record->hypothesis_stages.push_back(
          {"finetune-iteration-" + std::to_string(iteration + 1),
           std::move(hyps)});
    }
    std::vector<TransducerModel> next;
    next.reserve(current.size());
    for (std::size_t m = 0; m < current.size(); ++m) {
      TransducerModel tuned = current[m];
      TrainingConfig run = plan.training;
      run.run_seed = MixSeed(plan.seed, kFinetuneStream,
                             static_cast<std::uint64_t>(iteration) * 10 + m);
      TrainModel(&tuned, items, run);
      next.push_back(std::move(tuned));
    }
    current = std::move(next);
  }
  return current;
}

TransducerModel SelfTrain(const std::vector<const TransducerModel*>& teachers,
                          const std::vector<std::string>& producer_ids,
                          const Dataset& labeled, const Dataset& unlabeled,
                          const SelfTrainPlan& plan,
                          const std::vector<TrainingItem>* dev,
                          ExperimentRecord* record) {
  if (teachers.empty()) throw ValidationError("self-training: no teachers");
  if (teachers.size() != producer_ids.size()) {
    throw ValidationError(
        "self-training: one producer id per teacher required");
  }
  std::set<std::string> labeled_ids;
  for (const Utterance& utt : labeled.utterances) labeled_ids.insert(utt.id);
  for (const Utterance& utt : unlabeled.utterances) {
    if (labeled_ids.count(utt.id)) {
      throw ValidationError("self-training: utterance '" + utt.id +
                            "' appears in both the labeled and unlabeled "
                            "sets");
    }
  }

  std::vector<TrainingItem> pool = SupervisedItems(labeled);
  if (!unlabeled.utterances.empty()) {
    std::vector<HypothesisRecord> hyps =
        PseudoLabel(teachers, producer_ids, unlabeled, plan.beam);
    std::vector<TrainingItem> pseudo =
        PairHypotheses(unlabeled, hyps, producer_ids);
    if (record) {
      record->hypothesis_stages.push_back({"selftrain-pool", std::move(hyps)});
    }
    for (TrainingItem& item : pseudo) pool.push_back(std::move(item));
  }

  TransducerModel final_model = plan.continue_from_first_teacher
                                    ? *teachers[0]
                                    : TransducerModel(plan.final_config);
  TrainModel(&final_model, pool, plan.training, dev);
  return final_model;
}

}  // namespace tlab
