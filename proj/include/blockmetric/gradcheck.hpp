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

#include "blockmetric/losses.hpp"
#include "blockmetric/metric.hpp"

namespace blockmetric {

// Analytic-vs-central-difference comparison over random batches, all in
// double precision.
struct GradcheckOptions {
  Variant variant = Variant::kBlockDiag;
  std::size_t dim = 16;
  std::size_t block_size = 4;
  std::size_t batch = 8;
  LossSpec loss;
  std::size_t trials = 100;
  std::uint64_t seed = 7;
  double step = 1e-5;
  // Batches whose scores lie closer than this to a non-differentiable
  // point of the loss are redrawn; central differences are meaningless
  // across a kink.
  double kink_margin = 1e-4;
  // Denominator floor of the per-entry relative error.
  double relative_floor = 1e-4;
  // Spread of the random weights around the identity.
  double weight_noise = 0.3;
};

struct GradcheckResult {
  double max_relative_error = 0.0;
  std::size_t trials = 0;
  std::size_t redraws = 0;
  std::size_t parameters = 0;

  bool passed(double tolerance = 1e-4) const { return max_relative_error < tolerance; }
};

// For the triplet loss both the direct hinge form (triplet_grad_w) and the
// generic chain rule (grad_w_from_dS) are checked; other losses use the
// chain rule. Throws ConfigError for the cosine variant, which has no
// stored weights.
GradcheckResult run_gradcheck(const GradcheckOptions& options);

}  // namespace blockmetric
