// Copyright 2026 The blockmetric Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string_view>
#include <utility>
#include <vector>

#include "blockmetric/dataset.hpp"
#include "blockmetric/eval.hpp"
#include "blockmetric/losses.hpp"
#include "blockmetric/matrix.hpp"
#include "blockmetric/metric.hpp"
#include "blockmetric/prng.hpp"

namespace blockmetric {

enum class Optimizer { kSGD, kAdam };
enum class InitScheme { kIdentity, kRandom };

Optimizer parse_optimizer(std::string_view name);  // "sgd" | "adam"
InitScheme parse_init(std::string_view name);      // "identity" | "random"

struct TrainConfig {
  LossSpec loss;
  std::size_t epochs = 30;
  std::size_t batch_size = 128;
  double learning_rate = 5e-4;
  Optimizer optimizer = Optimizer::kAdam;
  double weight_decay = 0.0;    // L2 on stored weights
  double weight_dropout = 0.0;  // inverted dropout on stored weights
  std::uint64_t seed = 0;
  std::size_t eval_every = 0;   // 0 disables periodic evaluation
  InitScheme init = InitScheme::kIdentity;
  double grad_clip = 10.0;      // global L2 norm, <= 0 disables
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;

  // Throws ConfigError on batch_size < 2, learning_rate <= 0, negative
  // weight decay, or dropout outside [0, 1).
  void validate() const;
};

struct TrainState {
  MetricParams params;
  std::vector<float> first_moment;
  std::vector<float> second_moment;
  std::uint64_t step = 0;
  Pcg32 rng{0};
  std::vector<double> loss_history;

  static TrainState start(MetricParams params, std::uint64_t seed);
};

// B distinct pairs drawn with sample_without_replacement.
PairedDataset sample_batch(const PairedDataset& data, std::size_t batch_size, Pcg32& rng);

// One optimizer step on the stored weights. SGD: w -= lr * (g + wd * w).
// Adam: bias-corrected moments of g + wd * w. The gradient is clipped to
// config.grad_clip in global L2 norm first. Throws NumericError and leaves
// the state untouched when the gradient is non-finite.
void apply_update(TrainState& state, const MaskedGradient& grad, const TrainConfig& config);

// Per stored weight: 0 with probability p, else 1 / (1 - p). p == 0 draws
// nothing and returns all ones.
std::vector<float> weight_dropout_mask(const MetricParams& params, double p, Pcg32& rng);

struct EvalRecord {
  std::size_t epoch = 0;
  RetrievalReport report;
};

struct TrainResult {
  MetricParams params;
  std::vector<double> loss_history;  // mean batch loss per epoch
  std::vector<EvalRecord> evaluations;
};

using EpochCallback = std::function<void(std::size_t epoch, double mean_loss)>;

// Mini-batch training from init_identity (or init_random). Each epoch
// visits a fresh permutation in chunks of batch_size; a trailing chunk
// with fewer than 2 pairs is dropped. When `eval_set` is given and
// eval_every > 0, the model is evaluated before the first update and
// after every eval_every epochs. Deterministic for a fixed seed.
TrainResult train(const PairedDataset& data, const MetricConfig& metric,
                  const TrainConfig& config, const PairedDataset* eval_set = nullptr,
                  const EpochCallback& on_epoch = {});

RetrievalReport evaluate_pairs(const PairedDataset& data, const MetricParams& params);

}  // namespace blockmetric
