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
#include <string>
#include <string_view>
#include <vector>

#include "blockmetric/dataset.hpp"
#include "blockmetric/eval.hpp"
#include "blockmetric/matrix.hpp"

namespace blockmetric {

enum class SynthStructure { kDiagReweight, kBlockMix };

// Paired-feature generator with a known cross-view transform.
//
// DiagReweight: y = normalize(w * z + noise), a per-channel reweighting.
// BlockMix:     y = normalize(blockdiag(M_1..M_N) z + noise) with
//               M_n = I + mix_scale * G_n / sqrt(d), G_n standard normal,
//               so matching needs cross-channel terms inside each block.
// In both cases x = normalize(z + noise), z standard normal.
struct SynthSpec {
  std::size_t pairs = 1000;
  std::size_t dim = 64;
  SynthStructure structure = SynthStructure::kBlockMix;
  std::vector<double> weights;  // DiagReweight; drawn when empty
  std::size_t block = 8;        // BlockMix true block size
  double mix_scale = 4.0;       // BlockMix
  double noise = 0.1;
  std::uint64_t seed = 42;

  // Throws ConfigError: zero pairs/dim, negative noise, weight count !=
  // dim, or block not dividing dim.
  void validate() const;

  // key=value text with keys pairs, dim, structure (diag_reweight |
  // block_mix), weights (comma list), block, mix_scale, noise, seed.
  static SynthSpec parse(std::string_view text);
  std::string to_text() const;
};

struct SynthData {
  PairedDataset pairs;
  GroundTruth truth;                    // 1:1
  std::vector<double> weights;          // DiagReweight transform
  std::vector<Matrix<double>> mixing;   // BlockMix blocks
};

// Draw order from Pcg32(seed):
//   1. transform: DiagReweight without explicit weights draws D values
//      w_m = uniform() in [0, 1), so low-weight channels are mostly noise
//      on the y side; BlockMix draws N blocks of d*d row-major G_n via
//      gaussian().
//   2. per pair i, via gaussian(): z (D draws), x noise (D draws), y noise
//      (D draws).
// Arithmetic is in double; rows are normalized, then rounded to float.
SynthData synth_gen(const SynthSpec& spec);

}  // namespace blockmetric
