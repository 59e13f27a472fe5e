// Copyright 2026 The ISR Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef ISR_ERROR_HPP_
#define ISR_ERROR_HPP_

#include <stdexcept>
#include <string>
#include <string_view>

namespace isr {

enum class ErrorCode {
  InvalidMatrix,
  DimensionMismatch,
  EmptyInput,
  EmptyClass,
  InsufficientSamples,
  Unsupported,
  TooFewEnvironments,
  DegenerateEnvironments,
  InsufficientVariance,
  InvalidParameter,
  DegenerateLabels,
  InvalidSpec,
  ParseError,
  ConfigError,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidMatrix: return "InvalidMatrix";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::EmptyClass: return "EmptyClass";
    case ErrorCode::InsufficientSamples: return "InsufficientSamples";
    case ErrorCode::Unsupported: return "Unsupported";
    case ErrorCode::TooFewEnvironments: return "TooFewEnvironments";
    case ErrorCode::DegenerateEnvironments: return "DegenerateEnvironments";
    case ErrorCode::InsufficientVariance: return "InsufficientVariance";
    case ErrorCode::InvalidParameter: return "InvalidParameter";
    case ErrorCode::DegenerateLabels: return "DegenerateLabels";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

/// Exception carrying a machine-readable code. The message is prefixed with
/// the code name so `what()` alone is enough for logs and result rows.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail)
      : std::runtime_error(std::string(to_string(code)) + ": " + detail),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace isr

#endif  // ISR_ERROR_HPP_
