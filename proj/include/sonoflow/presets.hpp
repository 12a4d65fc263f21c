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
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "sonoflow/environment.hpp"
#include "sonoflow/types.hpp"

namespace sonoflow {

// A self-contained synthetic acquisition used by `benchmark --synthetic`.
struct Preset {
  std::string name;
  AcquisitionContext ctx;
  Phantom phantom;
  std::size_t n_samples = 2048;
};

// "sta-paper": 128 transmits x 64 channels x 2048 samples.
// "pwi-paper": 11 plane waves (-10..10 deg) x 192 channels x 2048 samples.
// The phantom is a few wires plus seeded speckle around an anechoic cyst.
// Throws InvalidMetadata for unknown names.
Preset make_preset(std::string_view name, std::uint64_t seed = 0);
std::vector<std::string> preset_names();

// Default plane-wave fan: -10 to +10 degrees in 2 degree steps.
std::vector<double> default_plane_wave_angles();

}  // namespace sonoflow
