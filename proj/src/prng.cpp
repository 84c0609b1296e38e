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

#include "blockmetric/prng.hpp"

#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

#include "blockmetric/errors.hpp"

namespace blockmetric {

Pcg32::Pcg32(std::uint64_t seed, std::uint64_t stream) : inc_((stream << 1u) | 1u) {
  next_u32();
  state_ += seed;
  next_u32();
}

std::uint32_t Pcg32::next_u32() {
  const std::uint64_t old = state_;
  state_ = old * kMultiplier + inc_;
  const auto xorshifted = static_cast<std::uint32_t>(((old >> 18u) ^ old) >> 27u);
  const auto rot = static_cast<std::uint32_t>(old >> 59u);
  return (xorshifted >> rot) | (xorshifted << ((0u - rot) & 31u));
}

std::uint64_t Pcg32::next_u64() {
  const std::uint64_t hi = next_u32();
  return (hi << 32u) | next_u32();
}

double Pcg32::uniform() {
  const std::uint32_t a = next_u32() >> 5u;
  const std::uint32_t b = next_u32() >> 6u;
  return (a * 67108864.0 + b) / 9007199254740992.0;
}

double Pcg32::gaussian() {
  const double u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(1.0 - u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint32_t Pcg32::bounded(std::uint32_t n) {
  if (n == 0) throw ConfigError("Pcg32::bounded: empty range");
  const std::uint32_t threshold = (0u - n) % n;
  for (;;) {
    const std::uint32_t r = next_u32();
    if (r >= threshold) return r % n;
  }
}

std::vector<std::size_t> sample_without_replacement(std::size_t population,
                                                    std::size_t count, Pcg32& rng) {
  if (count > population) {
    throw ConfigError("cannot draw " + std::to_string(count) + " distinct items from " +
                      std::to_string(population));
  }
  std::vector<std::size_t> idx(population);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + rng.bounded(static_cast<std::uint32_t>(population - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(count);
  return idx;
}

}  // namespace blockmetric
