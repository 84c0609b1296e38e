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

#include "blockmetric/gradcheck.hpp"

#include <algorithm>

#include "blockmetric/prng.hpp"

namespace blockmetric {
namespace {

FeatureMatrix64 random_unit_rows(std::size_t rows, std::size_t dim, Pcg32& rng) {
  Matrix<double> raw(rows, dim);
  for (auto& v : raw.data()) v = rng.gaussian();
  return normalize_rows(raw);
}

}  // namespace

GradcheckResult run_gradcheck(const GradcheckOptions& options) {
  options.loss.validate();
  const auto config = MetricConfig::make(options.variant, options.dim,
                                         options.variant == Variant::kBlockDiag ? options.block_size : 0);
  if (param_count(config) == 0) throw ConfigError("gradcheck: cosine metric has no weights to check");
  if (options.batch < 2) throw ConfigError("gradcheck: batch must be at least 2");

  Pcg32 rng(options.seed);
  GradcheckResult result;
  result.parameters = param_count(config);
  constexpr std::size_t kMaxRedraws = 100000;
  while (result.trials < options.trials) {
    auto params = init_identity<double>(config);
    for (auto& w : params.weights) w += options.weight_noise * rng.gaussian();
    const auto x = random_unit_rows(options.batch, options.dim, rng);
    const auto y = random_unit_rows(options.batch, options.dim, rng);
    const auto scores = score_matrix(x, y, params);
    if (kink_distance(scores, options.loss) < options.kink_margin) {
      if (++result.redraws > kMaxRedraws) throw NumericError("gradcheck: too many redraws");
      continue;
    }
    const auto numeric = finite_diff_grad(options.loss, x, y, params, options.step);
    const auto chain = batch_loss_and_grad(x, y, params, options.loss).second;
    double err = max_relative_error(chain, numeric, options.relative_floor);
    if (options.loss.kind == LossKind::kTripletHardest) {
      const auto direct = triplet_grad_w(x, y, params, options.loss.margin);
      err = std::max(err, max_relative_error(direct, numeric, options.relative_floor));
    }
    result.max_relative_error = std::max(result.max_relative_error, err);
    ++result.trials;
  }
  return result;
}

}  // namespace blockmetric
