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

#include "blockmetric/synth.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "blockmetric/errors.hpp"
#include "blockmetric/io.hpp"
#include "blockmetric/metric.hpp"
#include "blockmetric/prng.hpp"

namespace blockmetric {

void SynthSpec::validate() const {
  if (pairs == 0) throw ConfigError("synth: pair count must be positive");
  if (dim == 0) throw ConfigError("synth: dimension must be positive");
  if (!(noise >= 0.0)) throw ConfigError("synth: noise must be non-negative");
  if (structure == SynthStructure::kDiagReweight) {
    if (!weights.empty() && weights.size() != dim) {
      throw ConfigError("synth: expected " + std::to_string(dim) + " weights, got " +
                        std::to_string(weights.size()));
    }
  } else {
    if (block == 0 || dim % block != 0) {
      throw ConfigError("synth: block " + std::to_string(block) + " does not divide " +
                        std::to_string(dim));
    }
  }
}

SynthSpec SynthSpec::parse(std::string_view text) {
  SynthSpec spec;
  const auto kv = parse_key_values(text);
  auto number = [](const std::string& key, const std::string& v) {
    std::size_t used = 0;
    double out = 0.0;
    try {
      out = std::stod(v, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != v.size() || v.empty()) {
      throw FormatError(FormatErrorKind::kMalformedText, "synth spec: bad value for " + key);
    }
    return out;
  };
  auto count = [&](const std::string& key, const std::string& v) {
    const double d = number(key, v);
    if (d < 0 || d != std::floor(d)) {
      throw FormatError(FormatErrorKind::kMalformedText, "synth spec: " + key + " must be a count");
    }
    return static_cast<std::uint64_t>(d);
  };
  for (const auto& [key, value] : kv) {
    if (key == "pairs") spec.pairs = count(key, value);
    else if (key == "dim") spec.dim = count(key, value);
    else if (key == "block") spec.block = count(key, value);
    else if (key == "seed") {
      std::size_t used = 0;
      try {
        spec.seed = std::stoull(value, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || used != value.size() || value[0] == '-') {
        throw FormatError(FormatErrorKind::kMalformedText, "synth spec: bad value for seed");
      }
    }
    else if (key == "noise") spec.noise = number(key, value);
    else if (key == "mix_scale") spec.mix_scale = number(key, value);
    else if (key == "structure") {
      if (value == "diag_reweight") spec.structure = SynthStructure::kDiagReweight;
      else if (value == "block_mix") spec.structure = SynthStructure::kBlockMix;
      else throw FormatError(FormatErrorKind::kMalformedText, "synth spec: unknown structure " + value);
    } else if (key == "weights") {
      spec.weights.clear();
      std::istringstream in(value);
      std::string tok;
      while (std::getline(in, tok, ',')) spec.weights.push_back(number(key, tok));
    } else {
      throw FormatError(FormatErrorKind::kMalformedText, "synth spec: unknown key " + key);
    }
  }
  spec.validate();
  return spec;
}

std::string SynthSpec::to_text() const {
  std::ostringstream out;
  out.precision(17);
  out << "pairs=" << pairs << "\n"
      << "dim=" << dim << "\n"
      << "structure=" << (structure == SynthStructure::kBlockMix ? "block_mix" : "diag_reweight")
      << "\n";
  if (structure == SynthStructure::kBlockMix) {
    out << "block=" << block << "\n" << "mix_scale=" << mix_scale << "\n";
  } else if (!weights.empty()) {
    out << "weights=";
    for (std::size_t i = 0; i < weights.size(); ++i) out << (i ? "," : "") << weights[i];
    out << "\n";
  }
  out << "noise=" << noise << "\n" << "seed=" << seed << "\n";
  return out.str();
}

SynthData synth_gen(const SynthSpec& spec) {
  spec.validate();
  Pcg32 rng(spec.seed);
  const std::size_t dim = spec.dim;
  SynthData out;

  if (spec.structure == SynthStructure::kDiagReweight) {
    out.weights = spec.weights;
    if (out.weights.empty()) {
      out.weights.resize(dim);
      for (auto& w : out.weights) w = rng.uniform();
    }
  } else {
    const std::size_t d = spec.block;
    const double scale = spec.mix_scale / std::sqrt(static_cast<double>(d));
    for (std::size_t n = 0; n < dim / d; ++n) {
      Matrix<double> m = Matrix<double>::identity(d);
      for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) m(i, j) += scale * rng.gaussian();
      out.mixing.push_back(std::move(m));
    }
  }

  Matrix<float> xs(spec.pairs, dim), ys(spec.pairs, dim);
  std::vector<double> z(dim), xv(dim), yv(dim);
  for (std::size_t p = 0; p < spec.pairs; ++p) {
    for (auto& v : z) v = rng.gaussian();
    for (std::size_t m = 0; m < dim; ++m) xv[m] = z[m] + spec.noise * rng.gaussian();
    if (spec.structure == SynthStructure::kDiagReweight) {
      for (std::size_t m = 0; m < dim; ++m) yv[m] = out.weights[m] * z[m];
    } else {
      const std::size_t d = spec.block;
      for (std::size_t n = 0; n < out.mixing.size(); ++n) {
        const auto& mix = out.mixing[n];
        for (std::size_t i = 0; i < d; ++i) {
          double acc = 0.0;
          for (std::size_t j = 0; j < d; ++j) acc += mix(i, j) * z[n * d + j];
          yv[n * d + i] = acc;
        }
      }
    }
    for (std::size_t m = 0; m < dim; ++m) yv[m] += spec.noise * rng.gaussian();
    const auto xn = l2_normalize<double>(xv);
    const auto yn = l2_normalize<double>(yv);
    for (std::size_t m = 0; m < dim; ++m) {
      xs(p, m) = static_cast<float>(xn[m]);
      ys(p, m) = static_cast<float>(yn[m]);
    }
  }
  out.pairs = {{std::move(xs), true}, {std::move(ys), true}};
  out.truth = GroundTruth::identity(spec.pairs);
  return out;
}

}  // namespace blockmetric
