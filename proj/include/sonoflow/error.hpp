// Copyright 2026 The Sonoflow Authors
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

#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace sonoflow {

enum class Errc {
  kDimensionMismatch,
  kInvalidMetadata,
  kInvalidData,
  kIoError,
  kFormatError,
  kEmptyCoefficients,
  kAxisTooShort,
  kAllZeroInput,
  kNonPositiveRange,
  kUnknownOperator,
  kCycleDetected,
  kPortMismatch,
  kInsufficientFrames,
  kWindowTooLarge,
  kWrongStage,
  kNodeError,
};

std::string_view errc_name(Errc code);

// Single exception type for the library. The optional fields carry the
// structured part of the diagnostic (which axis, which byte, which nodes).
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(errc_name(code)) + ": " + message),
        code_(code) {}

  Errc code() const noexcept { return code_; }

  std::optional<std::size_t> axis;
  std::optional<std::size_t> offset;
  std::string field;
  std::vector<std::string> nodes;

  static Error dimension_mismatch(std::size_t axis, const std::string& what);
  static Error invalid_metadata(const std::string& field,
                                const std::string& what);
  static Error format_error(std::size_t offset, const std::string& reason);

 private:
  Errc code_;
};

}  // namespace sonoflow
