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

#include "blockmetric/metric.hpp"

namespace blockmetric {

const char* to_string(FormatErrorKind kind) {
  switch (kind) {
    case FormatErrorKind::kBadMagic: return "bad magic";
    case FormatErrorKind::kBadVersion: return "unsupported version";
    case FormatErrorKind::kBadDtype: return "unsupported dtype";
    case FormatErrorKind::kBadVariant: return "unknown metric variant";
    case FormatErrorKind::kPayloadLengthMismatch: return "payload length mismatch";
    case FormatErrorKind::kDimensionOverflow: return "dimension overflow";
    case FormatErrorKind::kChecksumMismatch: return "checksum mismatch";
    case FormatErrorKind::kConfigMismatch: return "config mismatch";
    case FormatErrorKind::kMalformedText: return "malformed text";
    case FormatErrorKind::kNonFiniteValue: return "non-finite value";
  }
  return "format error";
}

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::kCosine: return "cosine";
    case Variant::kDiag: return "diag";
    case Variant::kBlockDiag: return "bdiag";
    case Variant::kDense: return "dense";
  }
  return "unknown";
}

Variant parse_variant(std::string_view name) {
  if (name == "cosine") return Variant::kCosine;
  if (name == "diag") return Variant::kDiag;
  if (name == "bdiag" || name == "blockdiag") return Variant::kBlockDiag;
  if (name == "dense") return Variant::kDense;
  throw ConfigError("unknown metric variant '" + std::string(name) + "'");
}

MetricConfig MetricConfig::make(Variant variant, std::size_t dim, std::size_t block_size) {
  if (dim == 0) throw ConfigError("metric dimension must be positive");
  if (variant != Variant::kBlockDiag) return MetricConfig(variant, dim, 0);
  if (block_size == 0 || block_size > dim) {
    throw ConfigError("block size " + std::to_string(block_size) + " outside [1, " +
                      std::to_string(dim) + "]");
  }
  if (dim % block_size != 0) {
    throw ConfigError("block size " + std::to_string(block_size) +
                      " does not divide dimension " + std::to_string(dim));
  }
  return MetricConfig(variant, dim, block_size);
}

std::size_t param_count(const MetricConfig& config) {
  switch (config.variant()) {
    case Variant::kCosine: return 0;
    case Variant::kDiag: return config.dim();
    case Variant::kBlockDiag: return config.dim() * config.block_size();
    case Variant::kDense: return config.dim() * config.dim();
  }
  return 0;
}

bool in_support(const MetricConfig& config, std::size_t row, std::size_t col) {
  switch (config.variant()) {
    case Variant::kCosine:
    case Variant::kDiag:
      return row == col;
    case Variant::kBlockDiag:
      return row / config.block_size() == col / config.block_size();
    case Variant::kDense:
      return true;
  }
  return false;
}

}  // namespace blockmetric
