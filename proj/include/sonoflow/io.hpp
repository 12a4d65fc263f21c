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

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "sonoflow/environment.hpp"
#include "sonoflow/types.hpp"

namespace sonoflow {

// WFRF layout, all integers little-endian:
//   0   "WFRF"
//   4   u32 format version (1)
//   8   u32 frame count
//   12  u32 metadata byte length L
//   16  L bytes of UTF-8 JSON: {"dtype", "shape": [n_tx, n_rx, n_samples],
//       "context": {...}}
//   16+L  frame payloads, [tx][rx][sample] with sample fastest, IEEE-754
//         little-endian f32 or f64.
inline constexpr std::uint32_t kWfrfVersion = 1;
inline constexpr std::size_t kWfrfHeaderBytes = 16;

template <typename T>
void write_wfrf(const std::filesystem::path& path,
                const std::vector<RfFrame<T>>& frames,
                const AcquisitionContext& ctx);

struct WfrfHeader {
  std::uint32_t version = 0;
  std::uint32_t frame_count = 0;
  SampleType sample_type = SampleType::kF64;
  std::array<std::size_t, 3> shape{0, 0, 0};
  AcquisitionContext ctx;
  std::size_t payload_offset = 0;

  std::size_t frame_bytes() const;
};

// Parses and checks the header; leaves the stream at the first payload.
WfrfHeader read_wfrf_header(std::istream& in, std::uintmax_t file_size);

template <typename T>
RfFrame<T> read_wfrf_frame(std::istream& in, const WfrfHeader& header);

// P5 with maxval 255; value v in [0, 1] becomes round-half-up(v * 255).
template <typename T>
void write_pgm(const Image<T>& img, const std::filesystem::path& path);

template <typename T>
std::vector<std::uint8_t> encode_pgm(const Image<T>& img);

nlohmann::json context_to_json(const AcquisitionContext& ctx);
// Accepts the exact form written by context_to_json plus conveniences:
// "angles_deg", "elements": "all", "rx_aperture": n.
AcquisitionContext context_from_json(const nlohmann::json& j);

nlohmann::json phantom_to_json(const Phantom& phantom);
Phantom phantom_from_json(const nlohmann::json& j);

// Reads a JSON document; throws IoError naming the path.
nlohmann::json read_json_file(const std::filesystem::path& path);

}  // namespace sonoflow
