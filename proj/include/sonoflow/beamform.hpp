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

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "sonoflow/types.hpp"

namespace sonoflow {

enum class Interpolation { kNearest, kLinear };

// Delay-and-sum reconstruction onto grid. Every pixel (x, z) sums, over
// acquisitions e and then channels j, the receive-apodized channel sample at
// fs * (tau(e, j, p) - t0_e), where tau is the two-way time of flight:
//   STA: (|p - a_tx(e)| + |p - a_rx(e, j)|) / c
//   PW:  (z cos(angle_e) + x sin(angle_e) + |p - a_rx(e, j)|) / c
// Sample positions outside [0, n_samples - 1] contribute nothing. Nearest
// interpolation rounds half up. Parallel over image columns; the per-pixel
// summation order does not depend on the thread count.
template <typename T>
Image<T> das_beamform(const RfFrame<T>& frame, const AcquisitionContext& ctx,
                      const ImageGrid& grid, const ApodizationSpec& apod,
                      Interpolation interp = Interpolation::kLinear,
                      unsigned threads = 1);

// Direct per-pixel triple loop over the same definition. Slow; used as the
// reference in tests.
template <typename T>
Image<T> das_beamform_oracle(const RfFrame<T>& frame,
                             const AcquisitionContext& ctx,
                             const ImageGrid& grid, const ApodizationSpec& apod,
                             Interpolation interp = Interpolation::kLinear);

// Receive weight of every element for the pixel at (x, z). With
// f_number > 0 only elements with |x_elem - x| <= z / (2 f_number) are
// active; the Hann window spans the active elements.
std::vector<double> active_aperture(const AcquisitionContext& ctx, double x,
                                    double z, const ApodizationSpec& apod);

namespace detail {

// Arithmetic shared by the fast path and the oracle so that both round the
// same way; only the loop structure differs.
inline double leg_seconds(double dx, double dz, double c) {
  return std::sqrt(dx * dx + dz * dz) / c;
}

inline double plane_wave_seconds(double x, double z, double cos_a,
                                 double sin_a, double c) {
  return (z * cos_a + x * sin_a) / c;
}

template <typename T>
inline T sample_position(T tx_leg, T rx_leg, T t0, T fs) {
  return (tx_leg + rx_leg - t0) * fs;
}

inline double hann_weight(std::size_t k, std::size_t active) {
  if (active <= 1) return 1.0;
  constexpr double kTwoPi = 6.283185307179586476925286766559;
  return 0.5 * (1.0 - std::cos(kTwoPi * static_cast<double>(k) /
                               static_cast<double>(active - 1)));
}

void fill_aperture(const AcquisitionContext& ctx, double x, double z,
                   const ApodizationSpec& apod, std::span<double> weights);

}  // namespace detail

}  // namespace sonoflow
