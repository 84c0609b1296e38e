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
#include <vector>

namespace blockmetric {

// PCG32 (XSH-RR output, 64-bit LCG state). Every random draw in the
// library goes through this generator so that datasets, batches and
// dropout masks are reproducible across implementations.
//
//   multiplier  6364136223846793005
//   increment   (stream << 1) | 1, default stream 54
//   seeding     state = 0; step; state += seed; step
//   output      xorshifted = ((old >> 18) ^ old) >> 27, rot = old >> 59,
//               (xorshifted >> rot) | (xorshifted << ((-rot) & 31))
//
// uniform():  53-bit double in [0, 1) from two outputs a, b:
//             ((a >> 5) * 2^26 + (b >> 6)) / 2^53
// gaussian(): Box-Muller on two uniforms u1, u2 drawn in that order,
//             sqrt(-2 ln(1 - u1)) * cos(2 pi u2). No value is cached.
// bounded(n): rejection sampling, reject outputs below (2^32 - n) mod n,
//             return output mod n.
class Pcg32 {
 public:
  static constexpr std::uint64_t kMultiplier = 6364136223846793005ULL;
  static constexpr std::uint64_t kDefaultStream = 54;

  explicit Pcg32(std::uint64_t seed, std::uint64_t stream = kDefaultStream);

  std::uint32_t next_u32();
  std::uint64_t next_u64();
  double uniform();
  double gaussian();
  std::uint32_t bounded(std::uint32_t n);

  std::uint64_t state() const noexcept { return state_; }
  std::uint64_t increment() const noexcept { return inc_; }

  friend bool operator==(const Pcg32&, const Pcg32&) = default;

 private:
  std::uint64_t state_ = 0;
  std::uint64_t inc_ = 0;
};

// `count` distinct indices from [0, population) via a partial
// Fisher-Yates pass: for i in [0, count), swap slot i with slot
// i + bounded(population - i). count == population yields a permutation.
std::vector<std::size_t> sample_without_replacement(std::size_t population,
                                                    std::size_t count, Pcg32& rng);

}  // namespace blockmetric
