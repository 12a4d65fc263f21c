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

#include "sonoflow/presets.hpp"

#include <numbers>
#include <random>

#include "sonoflow/error.hpp"

namespace sonoflow {

namespace {

constexpr std::size_t kSpeckleCount = 400;

// Wires on a vertical line and a lateral row, speckle everywhere except a
// round cyst. Depths stay inside what 2048 samples at 40 MHz can record.
Phantom wire_cyst_phantom(double half_width, std::uint64_t seed) {
  Phantom ph;
  for (double z : {8e-3, 16e-3, 24e-3, 32e-3}) ph.scatterers.push_back({0.0, z, 1.0});
  for (double x : {-10e-3, -5e-3, 5e-3, 10e-3})
    ph.scatterers.push_back({x, 16e-3, 1.0});

  const double cyst_x = -8e-3, cyst_z = 28e-3, cyst_r = 3e-3;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ux(-half_width, half_width);
  std::uniform_real_distribution<double> uz(3e-3, 38e-3);
  std::normal_distribution<double> amp(0.0, 0.1);
  while (ph.scatterers.size() < 8 + kSpeckleCount) {
    const double x = ux(rng), z = uz(rng), a = amp(rng);
    const double dx = x - cyst_x, dz = z - cyst_z;
    if (dx * dx + dz * dz < cyst_r * cyst_r) continue;
    ph.scatterers.push_back({x, z, a});
  }
  return ph;
}

}  // namespace

std::vector<double> default_plane_wave_angles() {
  std::vector<double> angles;
  for (int deg = -10; deg <= 10; deg += 2)
    angles.push_back(deg * std::numbers::pi / 180.0);
  return angles;
}

Preset make_preset(std::string_view name, std::uint64_t seed) {
  Preset p;
  p.name = std::string(name);
  p.ctx.speed_of_sound = 1540.0;
  p.ctx.sampling_frequency = 40e6;
  p.ctx.pitch = 3e-4;
  p.n_samples = 2048;
  if (name == "sta-paper") {
    p.ctx.n_elements = 128;
    StaTransmit tx;
    for (std::size_t e = 0; e < 128; ++e) tx.tx_elements.push_back(e);
    p.ctx.tx = tx;
    p.ctx.rx_channel_map = centered_rx_aperture(p.ctx, 64);
  } else if (name == "pwi-paper") {
    p.ctx.n_elements = 192;
    p.ctx.tx = PlaneWaveTransmit{default_plane_wave_angles()};
  } else {
    throw Error::invalid_metadata("preset",
                                  "unknown preset '" + std::string(name) + "'");
  }
  const double half_width = 0.5 * p.ctx.pitch * (p.ctx.n_elements - 1);
  p.phantom = wire_cyst_phantom(half_width, seed);
  p.ctx.validate();
  return p;
}

std::vector<std::string> preset_names() { return {"sta-paper", "pwi-paper"}; }

}  // namespace sonoflow
