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

#include "blockmetric/dataset.hpp"

#include <algorithm>
#include <string>

#include "blockmetric/errors.hpp"

namespace blockmetric {

PairedDataset PairedDataset::slice(std::size_t begin, std::size_t end) const {
  if (begin > end || end > size()) throw ConfigError("dataset slice out of range");
  std::vector<std::size_t> idx;
  for (std::size_t i = begin; i < end; ++i) idx.push_back(i);
  return gather(idx);
}

PairedDataset PairedDataset::gather(const std::vector<std::size_t>& indices) const {
  Matrix<float> bx(indices.size(), x.dim()), by(indices.size(), y.dim());
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const std::size_t i = indices[r];
    if (i >= size()) throw ConfigError("pair index " + std::to_string(i) + " out of range");
    const auto xr = x.row(i);
    const auto yr = y.row(i);
    std::copy(xr.begin(), xr.end(), bx.row(r).begin());
    std::copy(yr.begin(), yr.end(), by.row(r).begin());
  }
  return {{std::move(bx), x.normalized}, {std::move(by), y.normalized}};
}

}  // namespace blockmetric
