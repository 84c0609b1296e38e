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

#include "blockmetric/io.hpp"

#include <zlib.h>

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include "blockmetric/errors.hpp"

namespace blockmetric {
namespace {

class ByteWriter {
 public:
  void raw(const char* data, std::size_t n) { bytes_.insert(bytes_.end(), data, data + n); }
  void u8(std::uint8_t v) { bytes_.push_back(v); }
  void u16(std::uint16_t v) {
    for (int i = 0; i < 2; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  std::vector<std::uint8_t>& bytes() { return bytes_; }

 private:
  std::vector<std::uint8_t> bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::size_t remaining() const { return bytes_.size() - pos_; }
  std::size_t position() const { return pos_; }

  void need(std::size_t n, const char* what) const {
    if (remaining() < n) {
      throw FormatError(FormatErrorKind::kPayloadLengthMismatch,
                        std::string("truncated ") + what + ": need " + std::to_string(n) +
                            " bytes, have " + std::to_string(remaining()));
    }
  }
  std::uint8_t u8() {
    need(1, "field");
    return bytes_[pos_++];
  }
  std::uint16_t u16() {
    need(2, "field");
    std::uint16_t v = 0;
    for (int i = 0; i < 2; ++i) v |= static_cast<std::uint16_t>(bytes_[pos_++]) << (8 * i);
    return v;
  }
  std::uint32_t u32() {
    need(4, "field");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_++]) << (8 * i);
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  std::span<const std::uint8_t> take(std::size_t n, const char* what) {
    need(n, what);
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

void check_magic(ByteReader& in, const char (&magic)[4]) {
  if (in.remaining() < 4) {
    throw FormatError(FormatErrorKind::kBadMagic, "file shorter than its magic number");
  }
  const auto m = in.take(4, "magic");
  if (std::memcmp(m.data(), magic, 4) != 0) {
    throw FormatError(FormatErrorKind::kBadMagic,
                      std::string("expected '") + std::string(magic, 4) + "'");
  }
}

bool rows_unit_norm(const Matrix<float>& m) {
  if (m.rows() == 0) return false;
  for (std::size_t r = 0; r < m.rows(); ++r) {
    double sq = 0.0;
    for (float v : m.row(r)) sq += static_cast<double>(v) * v;
    if (std::abs(std::sqrt(sq) - 1.0) > 1e-5) return false;
  }
  return true;
}

template <class Fn>
auto with_path(const std::string& path, Fn&& fn) {
  try {
    return fn();
  } catch (const FormatError& e) {
    throw FormatError(e.kind(), path + ": " + e.what());
  }
}

}  // namespace

std::uint32_t crc32(std::span<const std::uint8_t> bytes) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  std::size_t offset = 0;
  while (offset < bytes.size()) {
    const auto chunk = static_cast<uInt>(
        std::min<std::size_t>(bytes.size() - offset, std::numeric_limits<uInt>::max()));
    crc = ::crc32(crc, bytes.data() + offset, chunk);
    offset += chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

std::vector<std::uint8_t> encode_features(const FeatureFile& file) {
  const auto& m = file.features.values;
  if (m.rows() > std::numeric_limits<std::uint32_t>::max() ||
      m.cols() > std::numeric_limits<std::uint32_t>::max()) {
    throw FormatError(FormatErrorKind::kDimensionOverflow, "matrix too large for u32 header");
  }
  if (!file.ids.empty() && file.ids.size() != m.rows()) {
    throw ConfigError("feature ids: expected one per row");
  }
  ByteWriter out;
  out.raw(kFeatureMagic, 4);
  out.u16(kFeatureVersion);
  out.u8(kDtypeFloat32);
  out.u32(static_cast<std::uint32_t>(m.rows()));
  out.u32(static_cast<std::uint32_t>(m.cols()));
  for (float v : m.data()) out.f32(v);
  for (const auto& id : file.ids) {
    out.u32(static_cast<std::uint32_t>(id.size()));
    out.raw(id.data(), id.size());
  }
  return std::move(out.bytes());
}

FeatureFile decode_features(std::span<const std::uint8_t> bytes) {
  ByteReader in(bytes);
  check_magic(in, kFeatureMagic);
  if (in.remaining() < kFeatureHeaderSize - 4) {
    throw FormatError(FormatErrorKind::kPayloadLengthMismatch, "truncated header");
  }
  const std::uint16_t version = in.u16();
  if (version != kFeatureVersion) {
    throw FormatError(FormatErrorKind::kBadVersion, "feature file version " + std::to_string(version));
  }
  const std::uint8_t dtype = in.u8();
  if (dtype != kDtypeFloat32) {
    throw FormatError(FormatErrorKind::kBadDtype, "dtype code " + std::to_string(dtype));
  }
  const std::uint64_t rows = in.u32();
  const std::uint64_t cols = in.u32();
  const std::uint64_t count = rows * cols;
  if (count > std::numeric_limits<std::size_t>::max() / 4) {
    throw FormatError(FormatErrorKind::kDimensionOverflow,
                      std::to_string(rows) + "x" + std::to_string(cols));
  }
  if (in.remaining() < count * 4) {
    throw FormatError(FormatErrorKind::kPayloadLengthMismatch,
                      "expected " + std::to_string(count * 4) + " payload bytes, found " +
                          std::to_string(in.remaining()));
  }
  std::vector<float> data(count);
  for (auto& v : data) v = in.f32();
  FeatureFile file;
  file.features.values = Matrix<float>(rows, cols, std::move(data));
  file.features.normalized = rows_unit_norm(file.features.values);
  if (in.remaining() > 0) {
    file.ids.reserve(rows);
    for (std::uint64_t r = 0; r < rows; ++r) {
      const std::uint32_t len = in.u32();
      const auto s = in.take(len, "row id");
      file.ids.emplace_back(reinterpret_cast<const char*>(s.data()), s.size());
    }
    if (in.remaining() != 0) {
      throw FormatError(FormatErrorKind::kPayloadLengthMismatch,
                        std::to_string(in.remaining()) + " unexpected trailing bytes");
    }
  }
  return file;
}

std::vector<std::uint8_t> encode_checkpoint(const MetricParams& params) {
  const auto& cfg = params.config;
  if (cfg.dim() > std::numeric_limits<std::uint32_t>::max()) {
    throw FormatError(FormatErrorKind::kDimensionOverflow, "dimension too large for u32");
  }
  ByteWriter payload;
  for (float v : params.weights) payload.f32(v);
  ByteWriter out;
  out.raw(kCheckpointMagic, 4);
  out.u16(kCheckpointVersion);
  out.u8(static_cast<std::uint8_t>(cfg.variant()));
  out.u32(static_cast<std::uint32_t>(cfg.dim()));
  out.u32(static_cast<std::uint32_t>(cfg.block_size()));
  auto& p = payload.bytes();
  out.bytes().insert(out.bytes().end(), p.begin(), p.end());
  out.u32(crc32(p));
  return std::move(out.bytes());
}

MetricParams decode_checkpoint(std::span<const std::uint8_t> bytes) {
  ByteReader in(bytes);
  check_magic(in, kCheckpointMagic);
  if (in.remaining() < kCheckpointHeaderSize - 4) {
    throw FormatError(FormatErrorKind::kPayloadLengthMismatch, "truncated header");
  }
  const std::uint16_t version = in.u16();
  if (version != kCheckpointVersion) {
    throw FormatError(FormatErrorKind::kBadVersion, "checkpoint version " + std::to_string(version));
  }
  const std::uint8_t code = in.u8();
  if (code > static_cast<std::uint8_t>(Variant::kDense)) {
    throw FormatError(FormatErrorKind::kBadVariant, "variant code " + std::to_string(code));
  }
  const auto variant = static_cast<Variant>(code);
  const std::uint32_t dim = in.u32();
  const std::uint32_t block = in.u32();
  if (variant != Variant::kBlockDiag && block != 0) {
    throw FormatError(FormatErrorKind::kConfigMismatch, "block size set for a non-block metric");
  }
  MetricConfig cfg;
  try {
    cfg = MetricConfig::make(variant, dim, block);
  } catch (const ConfigError& e) {
    throw FormatError(FormatErrorKind::kConfigMismatch, e.what());
  }
  const std::uint64_t count = param_count(cfg);
  if (in.remaining() != count * 4 + 4) {
    throw FormatError(FormatErrorKind::kPayloadLengthMismatch,
                      "expected " + std::to_string(count * 4 + 4) +
                          " bytes of payload and checksum, found " + std::to_string(in.remaining()));
  }
  const auto payload = in.take(count * 4, "payload");
  const std::uint32_t stored = in.u32();
  const std::uint32_t actual = crc32(payload);
  if (stored != actual) {
    throw FormatError(FormatErrorKind::kChecksumMismatch,
                      "stored " + std::to_string(stored) + ", computed " + std::to_string(actual));
  }
  ByteReader body(payload);
  std::vector<float> w(count);
  for (auto& v : w) {
    v = body.f32();
    if (!std::isfinite(v)) {
      throw FormatError(FormatErrorKind::kNonFiniteValue, "non-finite weight in checkpoint");
    }
  }
  return {cfg, std::move(w)};
}

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path + ": cannot open for reading");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError(path + ": read failed");
  return bytes;
}

void write_file(const std::string& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path + ": cannot open for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError(path + ": write failed");
}

void write_text(const std::string& path, std::string_view text) {
  write_file(path, {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
}

std::string read_text(const std::string& path) {
  const auto bytes = read_file(path);
  return {bytes.begin(), bytes.end()};
}

void write_features(const std::string& path, const FeatureFile& file) {
  write_file(path, encode_features(file));
}

void write_features(const std::string& path, const FeatureMatrix& features) {
  write_features(path, FeatureFile{features, {}});
}

FeatureFile read_features(const std::string& path) {
  return with_path(path, [&] { return decode_features(read_file(path)); });
}

void save_checkpoint(const std::string& path, const MetricParams& params) {
  write_file(path, encode_checkpoint(params));
}

MetricParams load_checkpoint(const std::string& path) {
  return with_path(path, [&] { return decode_checkpoint(read_file(path)); });
}

MetricParams load_checkpoint(const std::string& path, const MetricConfig& expected) {
  auto params = load_checkpoint(path);
  if (params.config != expected) {
    throw FormatError(FormatErrorKind::kConfigMismatch,
                      path + ": checkpoint holds " + std::string(to_string(params.config.variant())) +
                          " D=" + std::to_string(params.config.dim()) +
                          " d=" + std::to_string(params.config.block_size()) +
                          ", expected " + std::string(to_string(expected.variant())) +
                          " D=" + std::to_string(expected.dim()) +
                          " d=" + std::to_string(expected.block_size()));
  }
  return params;
}

GroundTruth parse_ground_truth(std::string_view text) {
  GroundTruth gt;
  std::istringstream lines{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(lines, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream fields(line);
    std::vector<std::size_t> set;
    std::string tok;
    while (fields >> tok) {
      std::size_t used = 0;
      unsigned long long v = 0;
      try {
        v = std::stoull(tok, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != tok.size() || tok[0] == '-') {
        throw FormatError(FormatErrorKind::kMalformedText,
                          "ground truth line " + std::to_string(lineno) + ": bad index '" + tok + "'");
      }
      set.push_back(static_cast<std::size_t>(v));
    }
    gt.relevant.push_back(std::move(set));
  }
  return gt;
}

GroundTruth read_ground_truth(const std::string& path) {
  return with_path(path, [&] { return parse_ground_truth(read_text(path)); });
}

std::map<std::string, std::string> parse_key_values(std::string_view text) {
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return std::string();
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  };
  std::map<std::string, std::string> out;
  std::istringstream lines{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(lines, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw FormatError(FormatErrorKind::kMalformedText,
                        "line " + std::to_string(lineno) + ": expected key=value");
    }
    out[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return out;
}

}  // namespace blockmetric
