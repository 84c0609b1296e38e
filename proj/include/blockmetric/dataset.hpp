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
#include <vector>

#include "blockmetric/matrix.hpp"

namespace blockmetric {

// Matched pairs: row i of x belongs with row i of y.
struct PairedDataset {
  FeatureMatrix x;
  FeatureMatrix y;

  std::size_t size() const noexcept { return x.rows(); }
  // Rows [begin, end) of both sides.
  PairedDataset slice(std::size_t begin, std::size_t end) const;
  PairedDataset gather(const std::vector<std::size_t>& indices) const;
};

}  // namespace blockmetric
