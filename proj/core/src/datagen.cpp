// tlab/datagen.cpp
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

#include "tlab/datagen.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <string>
#include <vector>

#include "tlab/rng.hpp"

namespace tlab {

namespace {

constexpr std::uint64_t kPrototypeTag = 0x70726f746fULL;
constexpr std::uint64_t kLabelStreamTag = 0xabe1ULL;

double QuantizeToFloat32(double x) { return static_cast<float>(x); }

void ValidateSpec(const DatasetSpec& spec) {
  if (spec.vocab < 1) throw ValidationError("dataset spec: vocab must be >= 1");
  if (spec.feature_dim < 1) {
    throw ValidationError("dataset spec: feature_dim must be >= 1");
  }
  if (spec.min_length < 1 || spec.max_length < spec.min_length) {
    throw ValidationError("dataset spec: need 1 <= min_length <= max_length");
  }
  if (spec.frames_per_label < 1) {
    throw ValidationError("dataset spec: frames_per_label must be >= 1");
  }
  if (spec.speed_factors.empty()) {
    throw ValidationError("dataset spec: need at least one speed factor");
  }
  for (double s : spec.speed_factors) {
    if (!(s > 0.0)) {
      throw ValidationError("dataset spec: speed factors must be positive");
    }
  }
  if (spec.noise_stddev < 0.0) {
    throw ValidationError("dataset spec: noise_stddev must be >= 0");
  }
  if (spec.utterance_count < 1) {
    throw ValidationError("dataset spec: utterance_count must be >= 1");
  }
  if (spec.split.empty() || spec.split.find(' ') != std::string::npos) {
    throw ValidationError("dataset spec: split must be a non-empty word");
  }
  if (spec.condition.empty() ||
      spec.condition.find(' ') != std::string::npos) {
    throw ValidationError("dataset spec: condition must be a non-empty word");
  }
}

int RunLength(int frames_per_label, double factor) {
  const long scaled = std::lround(frames_per_label * factor);
  return scaled < 1 ? 1 : static_cast<int>(scaled);
}

std::string FormatId(const std::string& split, int index, double factor) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s-%05d-x%g", split.c_str(), index, factor);
  return buf;
}

}  // namespace

std::vector<double> LabelPrototype(int label, int dim) {
  if (label < 1) throw ValidationError("prototype: label must be >= 1");
  if (dim < 1) throw ValidationError("prototype: dim must be >= 1");
  Rng rng(MixSeed(kPrototypeTag, static_cast<std::uint64_t>(label)));
  std::vector<double> proto(static_cast<std::size_t>(dim));
  for (double& x : proto) x = rng.Gaussian();
  return proto;
}

std::vector<double> ChannelShiftVector(double shift, int dim) {
  if (dim < 1) throw ValidationError("channel shift: dim must be >= 1");
  return std::vector<double>(static_cast<std::size_t>(dim),
                             shift / std::sqrt(static_cast<double>(dim)));
}

int NearestPrototypeLabel(const double* frame, int dim, int vocab,
                          double channel_shift) {
  const std::vector<double> shift = ChannelShiftVector(channel_shift, dim);
  int best_label = 1;
  double best_dist = std::numeric_limits<double>::infinity();
  for (int y = 1; y <= vocab; ++y) {
    const std::vector<double> proto = LabelPrototype(y, dim);
    double dist = 0.0;
    for (int i = 0; i < dim; ++i) {
      const double diff =
          frame[i] - shift[static_cast<std::size_t>(i)] -
          proto[static_cast<std::size_t>(i)];
      dist += diff * diff;
    }
    if (dist < best_dist) {
      best_dist = dist;
      best_label = y;
    }
  }
  return best_label;
}

Dataset GenerateDataset(const DatasetSpec& spec) {
  ValidateSpec(spec);
  Dataset dataset;
  dataset.vocab = spec.vocab;
  dataset.feature_dim = spec.feature_dim;
  dataset.split = spec.split;

  std::vector<std::vector<double>> prototypes;
  prototypes.reserve(static_cast<std::size_t>(spec.vocab));
  for (int y = 1; y <= spec.vocab; ++y) {
    prototypes.push_back(LabelPrototype(y, spec.feature_dim));
  }
  const std::vector<double> shift =
      ChannelShiftVector(spec.channel_shift, spec.feature_dim);
  const std::uint64_t split_hash = HashString(spec.split);

  for (int index = 0; index < spec.utterance_count; ++index) {
    Rng label_rng(MixSeed(spec.seed, split_hash,
                          static_cast<std::uint64_t>(index), kLabelStreamTag));
    const int length = label_rng.UniformInt(spec.min_length, spec.max_length);
    std::vector<int> labels(static_cast<std::size_t>(length));
    for (int& y : labels) y = label_rng.UniformInt(1, spec.vocab);
    const Transcript transcript(labels, spec.vocab);

    for (std::size_t factor_idx = 0; factor_idx < spec.speed_factors.size();
         ++factor_idx) {
      const double factor = spec.speed_factors[factor_idx];
      Rng noise_rng(MixSeed(spec.seed, split_hash,
                            static_cast<std::uint64_t>(index),
                            static_cast<std::uint64_t>(factor_idx)));
      const int run = RunLength(spec.frames_per_label, factor);
      FeatureSequence features(length * run, spec.feature_dim);
      int row = 0;
      for (int y : labels) {
        const std::vector<double>& proto =
            prototypes[static_cast<std::size_t>(y) - 1];
        for (int rep = 0; rep < run; ++rep, ++row) {
          double* frame = features.frame(row);
          for (int i = 0; i < spec.feature_dim; ++i) {
            frame[i] = QuantizeToFloat32(
                proto[static_cast<std::size_t>(i)] +
                shift[static_cast<std::size_t>(i)] +
                spec.noise_stddev * noise_rng.Gaussian());
          }
        }
      }
      dataset.utterances.push_back(
          Utterance{FormatId(spec.split, index, factor), spec.condition,
                    std::move(features), transcript});
    }
  }
  return dataset;
}

Dataset StripLabels(const Dataset& dataset) {
  Dataset stripped;
  stripped.vocab = dataset.vocab;
  stripped.feature_dim = dataset.feature_dim;
  stripped.split = dataset.split;
  stripped.utterances.reserve(dataset.utterances.size());
  for (const Utterance& utt : dataset.utterances) {
    stripped.utterances.push_back(
        Utterance{utt.id, utt.condition, utt.features, std::nullopt});
  }
  return stripped;
}

}  // namespace tlab
