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

#include "sonoflow/error.hpp"

namespace sonoflow {

std::string_view errc_name(Errc code) {
  switch (code) {
    case Errc::kDimensionMismatch: return "DimensionMismatch";
    case Errc::kInvalidMetadata: return "InvalidMetadata";
    case Errc::kInvalidData: return "InvalidData";
    case Errc::kIoError: return "IoError";
    case Errc::kFormatError: return "FormatError";
    case Errc::kEmptyCoefficients: return "EmptyCoefficients";
    case Errc::kAxisTooShort: return "AxisTooShort";
    case Errc::kAllZeroInput: return "AllZeroInput";
    case Errc::kNonPositiveRange: return "NonPositiveRange";
    case Errc::kUnknownOperator: return "UnknownOperator";
    case Errc::kCycleDetected: return "CycleDetected";
    case Errc::kPortMismatch: return "PortMismatch";
    case Errc::kInsufficientFrames: return "InsufficientFrames";
    case Errc::kWindowTooLarge: return "WindowTooLarge";
    case Errc::kWrongStage: return "WrongStage";
    case Errc::kNodeError: return "NodeError";
  }
  return "Unknown";
}

Error Error::dimension_mismatch(std::size_t axis, const std::string& what) {
  Error e(Errc::kDimensionMismatch,
          "axis " + std::to_string(axis) + ": " + what);
  e.axis = axis;
  return e;
}

Error Error::invalid_metadata(const std::string& field,
                              const std::string& what) {
  Error e(Errc::kInvalidMetadata, field + ": " + what);
  e.field = field;
  return e;
}

Error Error::format_error(std::size_t offset, const std::string& reason) {
  Error e(Errc::kFormatError,
          reason + " (byte offset " + std::to_string(offset) + ")");
  e.offset = offset;
  return e;
}

}  // namespace sonoflow
