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

#include "blockmetric/losses.hpp"

namespace blockmetric {

std::string_view to_string(LossKind kind) {
  switch (kind) {
    case LossKind::kTripletHardest: return "triplet";
    case LossKind::kInfoNCE: return "infonce";
    case LossKind::kCMPM: return "cmpm";
    case LossKind::kPoly: return "poly";
  }
  return "unknown";
}

LossKind parse_loss(std::string_view name) {
  if (name == "triplet") return LossKind::kTripletHardest;
  if (name == "infonce") return LossKind::kInfoNCE;
  if (name == "cmpm") return LossKind::kCMPM;
  if (name == "poly") return LossKind::kPoly;
  throw ConfigError("unknown loss '" + std::string(name) + "'");
}

void LossSpec::validate() const {
  if (!(margin >= 0.0)) throw ConfigError("loss margin must be non-negative");
  if (!(temperature > 0.0)) throw ConfigError("loss temperature must be positive");
  if (poly_order < 0) throw ConfigError("poly order must be non-negative");
  if (!(cmpm_epsilon > 0.0)) throw ConfigError("cmpm epsilon must be positive");
}

}  // namespace blockmetric
