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

#include "blockmetric/apps.hpp"

namespace blockmetric {

AlignmentKind parse_alignment(std::string_view name) {
  if (name == "maxave") return AlignmentKind::kMaxAve;
  if (name == "maxsum") return AlignmentKind::kMaxSum;
  if (name == "maxsoft") return AlignmentKind::kMaxSoft;
  throw ConfigError("unknown alignment strategy '" + std::string(name) + "'");
}

}  // namespace blockmetric
