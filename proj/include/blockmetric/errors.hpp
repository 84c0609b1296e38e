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

#include <stdexcept>
#include <string>

namespace blockmetric {

// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration or shape mismatch between arguments.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Non-finite values, rejected optimizer steps, failed numeric checks.
class NumericError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

enum class FormatErrorKind {
  kBadMagic,
  kBadVersion,
  kBadDtype,
  kBadVariant,
  kPayloadLengthMismatch,
  kDimensionOverflow,
  kChecksumMismatch,
  kConfigMismatch,
  kMalformedText,
  kNonFiniteValue,
};

const char* to_string(FormatErrorKind kind);

// A file was readable but its contents violate the on-disk format.
class FormatError : public Error {
 public:
  FormatError(FormatErrorKind kind, const std::string& what)
      : Error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  FormatErrorKind kind() const noexcept { return kind_; }

 private:
  FormatErrorKind kind_;
};

}  // namespace blockmetric
