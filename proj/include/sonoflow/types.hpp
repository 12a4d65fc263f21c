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

#include <complex>
#include <cstddef>
#include <optional>
#include <string_view>
#include <variant>
#include <vector>

#include "sonoflow/array.hpp"

namespace sonoflow {

// Synthetic transmit aperture: one transmitting element per acquisition.
struct StaTransmit {
  std::vector<std::size_t> tx_elements;
};

// Plane-wave transmit: one steering angle (radians) per acquisition.
struct PlaneWaveTransmit {
  std::vector<double> angles;
};

using TxScheme = std::variant<StaTransmit, PlaneWaveTransmit>;

// Physical and probe metadata for one recording. The probe is a uniform
// linear array at depth 0, centered on the lateral origin.
struct AcquisitionContext {
  double speed_of_sound = 1540.0;    // m/s
  double sampling_frequency = 40e6;  // Hz
  std::size_t n_elements = 1;
  double pitch = 3e-4;  // m
  TxScheme tx = StaTransmit{{0}};
  // rx_channel_map[e][j] is the element recorded by channel j during
  // acquisition e. Empty means identity (requires n_rx == n_elements).
  std::vector<std::vector<std::size_t>> rx_channel_map;
  // Per-acquisition time of sample 0 relative to transmit, seconds.
  // Empty means all zero.
  std::vector<double> time_zero;

  bool is_plane_wave() const noexcept {
    return std::holds_alternative<PlaneWaveTransmit>(tx);
  }
  std::size_t n_tx() const noexcept;
  double element_x(std::size_t element) const noexcept {
    return (static_cast<double>(element) -
            static_cast<double>(n_elements - 1) / 2.0) *
           pitch;
  }
  std::size_t rx_element(std::size_t acquisition, std::size_t channel) const {
    return rx_channel_map.empty() ? channel
                                  : rx_channel_map[acquisition][channel];
  }
  double t0(std::size_t acquisition) const {
    return time_zero.empty() ? 0.0 : time_zero[acquisition];
  }

  // Throws InvalidMetadata naming the offending field.
  void validate() const;
};

// Receive map for setups with fewer channels than elements: for STA the
// n_rx-element window is centered on the transmitting element and clipped
// at the array edges; for plane waves it is centered on the array.
std::vector<std::vector<std::size_t>> centered_rx_aperture(
    const AcquisitionContext& ctx, std::size_t n_rx);

// Raw channel data indexed [acquisition, channel, sample].
template <typename T>
struct RfFrame {
  using value_type = T;
  Array3<T> data;

  std::size_t n_tx() const noexcept { return data.shape()[0]; }
  std::size_t n_rx() const noexcept { return data.shape()[1]; }
  std::size_t n_samples() const noexcept { return data.shape()[2]; }
  bool operator==(const RfFrame&) const = default;
};

// Throws DimensionMismatch (axis) or InvalidMetadata (field) unless the
// frame can be interpreted with ctx. Also rejects non-finite samples.
template <typename T>
void validate_pair(const RfFrame<T>& frame, const AcquisitionContext& ctx);

struct ImageGrid {
  std::vector<double> x;  // lateral positions, m
  std::vector<double> z;  // depths, m

  std::size_t n_x() const noexcept { return x.size(); }
  std::size_t n_z() const noexcept { return z.size(); }
  void validate() const;
  bool operator==(const ImageGrid&) const = default;
};

enum class GridMode { kSta, kPlaneWave };

// STA: one column per transmit element, one row per sample spaced c/(2 fs).
// Plane wave: n_x columns spanning the aperture, n_z rows spanning the
// recorded depth.
ImageGrid default_grid(const AcquisitionContext& ctx, std::size_t n_samples,
                       GridMode mode,
                       std::optional<std::size_t> n_z_override = std::nullopt,
                       std::optional<std::size_t> n_x_override = std::nullopt);

// Equispaced grid over [x_min, x_max] x [z_min, z_max].
ImageGrid linear_grid(double x_min, double x_max, std::size_t n_x,
                      double z_min, double z_max, std::size_t n_z);

enum class Stage { kRf, kComplexAnalytic, kEnvelope, kDisplay };
std::string_view stage_name(Stage stage);

// 2-D image indexed [depth, lateral].
template <typename T>
struct Image {
  Array2<T> data;
  Stage stage = Stage::kRf;
  ImageGrid grid;
};

template <typename T>
struct ComplexImage {
  Array2<std::complex<T>> data;
  ImageGrid grid;
};

enum class Window { kRectangular, kHann };

struct ApodizationSpec {
  Window window = Window::kRectangular;
  double f_number = 0.0;  // 0 disables the dynamic aperture
};

}  // namespace sonoflow
