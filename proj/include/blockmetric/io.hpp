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
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "blockmetric/eval.hpp"
#include "blockmetric/matrix.hpp"
#include "blockmetric/metric.hpp"

namespace blockmetric {

// Feature file, little-endian:
//   offset 0   "GSF1"
//   offset 4   u16 version (1)
//   offset 6   u8  dtype (1 = float32; 2 reserved for float64)
//   offset 7   u32 rows
//   offset 11  u32 cols
//   offset 15  rows * cols float32, row-major
//   optional   rows * (u32 byte length, UTF-8 bytes) row ids
inline constexpr char kFeatureMagic[4] = {'G', 'S', 'F', '1'};
inline constexpr std::uint16_t kFeatureVersion = 1;
inline constexpr std::uint8_t kDtypeFloat32 = 1;
inline constexpr std::uint8_t kDtypeFloat64 = 2;
inline constexpr std::size_t kFeatureHeaderSize = 15;

struct FeatureFile {
  FeatureMatrix features;
  std::vector<std::string> ids;  // empty, or one per row
};

std::vector<std::uint8_t> encode_features(const FeatureFile& file);
// `normalized` is set when every row has unit norm within 1e-5.
FeatureFile decode_features(std::span<const std::uint8_t> bytes);

void write_features(const std::string& path, const FeatureFile& file);
void write_features(const std::string& path, const FeatureMatrix& features);
FeatureFile read_features(const std::string& path);

// Checkpoint file, little-endian:
//   offset 0   "GSW1"
//   offset 4   u16 version (1)
//   offset 6   u8  variant (0 cosine, 1 diag, 2 bdiag, 3 dense)
//   offset 7   u32 D
//   offset 11  u32 d (0 unless bdiag)
//   offset 15  param_count * float32 in metric storage order
//   trailer    u32 CRC-32 (IEEE) of the payload bytes
inline constexpr char kCheckpointMagic[4] = {'G', 'S', 'W', '1'};
inline constexpr std::uint16_t kCheckpointVersion = 1;
inline constexpr std::size_t kCheckpointHeaderSize = 15;

std::vector<std::uint8_t> encode_checkpoint(const MetricParams& params);
MetricParams decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const std::string& path, const MetricParams& params);
MetricParams load_checkpoint(const std::string& path);
// Also throws FormatError(kConfigMismatch) when the stored config differs.
MetricParams load_checkpoint(const std::string& path, const MetricConfig& expected);

std::uint32_t crc32(std::span<const std::uint8_t> bytes);

// Ground truth text: one line per query holding whitespace-separated
// gallery indices. Blank lines and lines starting with '#' are skipped.
GroundTruth parse_ground_truth(std::string_view text);
GroundTruth read_ground_truth(const std::string& path);

// key=value lines; '#' starts a comment; surrounding whitespace trimmed.
std::map<std::string, std::string> parse_key_values(std::string_view text);

std::vector<std::uint8_t> read_file(const std::string& path);
void write_file(const std::string& path, std::span<const std::uint8_t> bytes);
void write_text(const std::string& path, std::string_view text);
std::string read_text(const std::string& path);

}  // namespace blockmetric
