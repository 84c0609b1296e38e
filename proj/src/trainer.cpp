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

#include "blockmetric/trainer.hpp"

#include <cmath>
#include <string>

namespace blockmetric {

Optimizer parse_optimizer(std::string_view name) {
  if (name == "sgd") return Optimizer::kSGD;
  if (name == "adam") return Optimizer::kAdam;
  throw ConfigError("unknown optimizer '" + std::string(name) + "'");
}

InitScheme parse_init(std::string_view name) {
  if (name == "identity") return InitScheme::kIdentity;
  if (name == "random") return InitScheme::kRandom;
  throw ConfigError("unknown init scheme '" + std::string(name) + "'");
}

void TrainConfig::validate() const {
  loss.validate();
  if (batch_size < 2) throw ConfigError("batch size must be at least 2");
  if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight decay must be non-negative");
  if (!(weight_dropout >= 0.0 && weight_dropout < 1.0)) {
    throw ConfigError("weight dropout must lie in [0, 1)");
  }
}

TrainState TrainState::start(MetricParams params, std::uint64_t seed) {
  TrainState s;
  s.first_moment.assign(params.weights.size(), 0.0f);
  s.second_moment.assign(params.weights.size(), 0.0f);
  s.params = std::move(params);
  s.rng = Pcg32(seed);
  return s;
}

PairedDataset sample_batch(const PairedDataset& data, std::size_t batch_size, Pcg32& rng) {
  if (batch_size > data.size()) {
    throw ConfigError("batch size " + std::to_string(batch_size) + " exceeds dataset size " +
                      std::to_string(data.size()));
  }
  return data.gather(sample_without_replacement(data.size(), batch_size, rng));
}

void apply_update(TrainState& state, const MaskedGradient& grad, const TrainConfig& config) {
  auto& w = state.params.weights;
  if (grad.config != state.params.config || grad.values.size() != w.size()) {
    throw ConfigError("apply_update: gradient layout does not match parameters");
  }
  double norm_sq = 0.0;
  for (float g : grad.values) {
    if (!std::isfinite(g)) throw NumericError("apply_update: non-finite gradient, step rejected");
    norm_sq += static_cast<double>(g) * g;
  }
  double clip_scale = 1.0;
  const double norm = std::sqrt(norm_sq);
  if (config.grad_clip > 0.0 && norm > config.grad_clip) clip_scale = config.grad_clip / norm;

  const double lr = config.learning_rate;
  const double wd = config.weight_decay;
  const std::uint64_t step = state.step + 1;
  const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(step));
  const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(step));
  for (std::size_t k = 0; k < w.size(); ++k) {
    const double g = clip_scale * grad.values[k] + wd * w[k];
    if (config.optimizer == Optimizer::kSGD) {
      w[k] = static_cast<float>(w[k] - lr * g);
      continue;
    }
    auto& m = state.first_moment[k];
    auto& v = state.second_moment[k];
    m = static_cast<float>(config.beta1 * m + (1.0 - config.beta1) * g);
    v = static_cast<float>(config.beta2 * v + (1.0 - config.beta2) * g * g);
    const double m_hat = m / bc1;
    const double v_hat = v / bc2;
    w[k] = static_cast<float>(w[k] - lr * m_hat / (std::sqrt(v_hat) + config.adam_epsilon));
  }
  state.step = step;
}

std::vector<float> weight_dropout_mask(const MetricParams& params, double p, Pcg32& rng) {
  if (!(p >= 0.0 && p < 1.0)) throw ConfigError("weight dropout must lie in [0, 1)");
  std::vector<float> mask(params.weights.size(), 1.0f);
  if (p == 0.0) return mask;
  const auto keep_scale = static_cast<float>(1.0 / (1.0 - p));
  for (auto& m : mask) m = rng.uniform() < p ? 0.0f : keep_scale;
  return mask;
}

RetrievalReport evaluate_pairs(const PairedDataset& data, const MetricParams& params) {
  return evaluate_retrieval(score_matrix(data.x, data.y, params),
                            GroundTruth::identity(data.size()));
}

TrainResult train(const PairedDataset& data, const MetricConfig& metric,
                  const TrainConfig& config, const PairedDataset* eval_set,
                  const EpochCallback& on_epoch) {
  config.validate();
  if (data.x.dim() != metric.dim() || data.y.dim() != metric.dim()) {
    throw ConfigError("training features do not match metric dimension");
  }
  if (data.y.rows() != data.x.rows()) throw ConfigError("training sides have different sizes");
  if (data.size() < 2) throw ConfigError("training needs at least 2 pairs");
  const std::size_t batch = std::min(config.batch_size, data.size());

  Pcg32 rng(config.seed);
  MetricParams start = config.init == InitScheme::kRandom ? init_random<float>(metric, rng)
                                                          : init_identity<float>(metric);
  TrainState state = TrainState::start(std::move(start), config.seed);
  state.rng = rng;

  TrainResult result;
  const bool evaluating = eval_set != nullptr && config.eval_every > 0;
  if (evaluating) result.evaluations.push_back({0, evaluate_pairs(*eval_set, state.params)});

  const bool has_weights = !state.params.weights.empty();
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto order = sample_without_replacement(data.size(), data.size(), state.rng);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += batch) {
      const std::size_t end = std::min(order.size(), begin + batch);
      if (end - begin < 2) break;
      const PairedDataset b =
          data.gather(std::vector<std::size_t>(order.begin() + begin, order.begin() + end));

      MetricParams active = state.params;
      std::vector<float> mask;
      if (config.weight_dropout > 0.0 && has_weights) {
        mask = weight_dropout_mask(state.params, config.weight_dropout, state.rng);
        for (std::size_t k = 0; k < mask.size(); ++k) active.weights[k] *= mask[k];
      }
      auto [loss, grad] = batch_loss_and_grad(b.x, b.y, active, config.loss);
      if (!mask.empty()) {
        for (std::size_t k = 0; k < mask.size(); ++k) grad.values[k] *= mask[k];
      }
      if (has_weights) apply_update(state, grad, config);
      loss_sum += loss;
      ++batches;
    }
    const double mean = batches > 0 ? loss_sum / static_cast<double>(batches) : 0.0;
    state.loss_history.push_back(mean);
    if (on_epoch) on_epoch(epoch, mean);
    if (evaluating && epoch % config.eval_every == 0) {
      result.evaluations.push_back({epoch, evaluate_pairs(*eval_set, state.params)});
    }
  }
  result.params = std::move(state.params);
  result.loss_history = std::move(state.loss_history);
  return result;
}

}  // namespace blockmetric
