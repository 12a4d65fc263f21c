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

#include "sonoflow/beamform.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <type_traits>

#if defined(__x86_64__) && defined(__GNUC__)
#include <immintrin.h>
#define SONOFLOW_AVX2_KERNEL 1
#endif

#include "sonoflow/error.hpp"
#include "sonoflow/parallel.hpp"

namespace sonoflow {

namespace detail {

void fill_aperture(const AcquisitionContext& ctx, double x, double z,
                   const ApodizationSpec& apod, std::span<double> weights) {
  const std::size_t n = ctx.n_elements;
  std::size_t first = 0;
  std::size_t last = n;  // one past
  if (apod.f_number > 0.0) {
    const double half_width = z / (2.0 * apod.f_number);
    first = n;
    last = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (std::abs(ctx.element_x(i) - x) <= half_width) {
        first = std::min(first, i);
        last = i + 1;
      }
    }
  }
  std::fill(weights.begin(), weights.end(), 0.0);
  if (first >= last) return;
  const std::size_t active = last - first;
  for (std::size_t i = first; i < last; ++i)
    weights[i] = apod.window == Window::kHann ? hann_weight(i - first, active)
                                              : 1.0;
}

}  // namespace detail

std::vector<double> active_aperture(const AcquisitionContext& ctx, double x,
                                    double z, const ApodizationSpec& apod) {
  std::vector<double> w(ctx.n_elements);
  detail::fill_aperture(ctx, x, z, apod, w);
  return w;
}

namespace {

void check_inputs(const AcquisitionContext& ctx, const ImageGrid& grid,
                  const ApodizationSpec& apod) {
  grid.validate();
  if (!std::isfinite(apod.f_number) || apod.f_number < 0.0)
    throw Error::invalid_metadata("apodization.f_number",
                                  "must be finite and >= 0");
  (void)ctx;
}

#ifdef SONOFLOW_AVX2_KERNEL
// Eight depths at a time with hardware gathers. Same operations in the same
// order as the scalar loop, so results are identical. Returns the first
// depth left for the scalar tail.
template <Interpolation Mode, bool Weighted>
__attribute__((target("avx2"))) std::size_t accumulate_avx2(
    const float* x, const float* tx_leg, const float* rx_leg,
    const float* weight, float t0, float fs, std::size_t lo, std::size_t hi,
    float* acc) {
  const __m256 vt0 = _mm256_set1_ps(t0);
  const __m256 vfs = _mm256_set1_ps(fs);
  std::size_t k = lo;
  for (; k + 8 <= hi; k += 8) {
    const __m256 s = _mm256_mul_ps(
        _mm256_sub_ps(
            _mm256_add_ps(_mm256_loadu_ps(tx_leg + k), _mm256_loadu_ps(rx_leg + k)),
            vt0),
        vfs);
    __m256 v;
    if constexpr (Mode == Interpolation::kNearest) {
      const __m256i i = _mm256_cvttps_epi32(_mm256_add_ps(s, _mm256_set1_ps(0.5f)));
      v = _mm256_i32gather_ps(x, i, 4);
    } else {
      const __m256i i0 = _mm256_cvttps_epi32(s);
      const __m256 frac = _mm256_sub_ps(s, _mm256_cvtepi32_ps(i0));
      const __m256 a = _mm256_i32gather_ps(x, i0, 4);
      const __m256 b = _mm256_i32gather_ps(x + 1, i0, 4);
      v = _mm256_add_ps(a, _mm256_mul_ps(_mm256_sub_ps(b, a), frac));
    }
    if constexpr (Weighted) v = _mm256_mul_ps(_mm256_loadu_ps(weight + k), v);
    _mm256_storeu_ps(acc + k, _mm256_add_ps(_mm256_loadu_ps(acc + k), v));
  }
  return k;
}

bool has_avx2() {
  static const bool supported = __builtin_cpu_supports("avx2");
  return supported;
}
#endif

// Accumulates one channel trace into a column over the depth range where
// the sample position falls inside the trace. Positions are monotone in
// depth, so that range is contiguous.
template <typename T, Interpolation Mode, bool Weighted>
void accumulate_trace(std::span<const T> trace, const T* tx_leg,
                      const T* rx_leg, const T* weight, T t0, T fs,
                      std::size_t n_z, T* acc) {
  const T last = static_cast<T>(trace.size() - 1);
  auto pos = [&](std::size_t k) {
    return detail::sample_position(tx_leg[k], rx_leg[k], t0, fs);
  };
  std::size_t lo = 0;
  std::size_t hi = n_z;
  {
    std::size_t a = 0, b = n_z;
    while (a < b) {
      const std::size_t m = a + (b - a) / 2;
      if (pos(m) < T{0}) a = m + 1; else b = m;
    }
    lo = a;
    b = n_z;
    while (a < b) {
      const std::size_t m = a + (b - a) / 2;
      if (pos(m) <= last) a = m + 1; else b = m;
    }
    hi = a;
  }
  const T* x = trace.data();
  // Traces are far shorter than 2^31 samples, so the cheaper signed
  // conversion is exact here.
  auto index = [](T s) { return static_cast<std::int32_t>(s); };
  auto add = [&](std::size_t k, T v) {
    if constexpr (Weighted)
      acc[k] += weight[k] * v;
    else
      acc[k] += v;
  };
  [[maybe_unused]] auto vector_part = [&](std::size_t end) {
#ifdef SONOFLOW_AVX2_KERNEL
    if constexpr (std::is_same_v<T, float>)
      if (has_avx2())
        return accumulate_avx2<Mode, Weighted>(x, tx_leg, rx_leg, weight, t0,
                                               fs, lo, end, acc);
#endif
    return lo;
  };
  if constexpr (Mode == Interpolation::kNearest) {
    for (std::size_t k = vector_part(hi); k < hi; ++k)
      add(k, x[index(pos(k) + T(0.5))]);
  } else {
    // Below `mid` the right neighbour always exists; at s == last the
    // interpolation collapses onto the final sample.
    std::size_t mid = hi;
    while (mid > lo && !(pos(mid - 1) < last)) --mid;
    for (std::size_t k = vector_part(mid); k < mid; ++k) {
      const T s = pos(k);
      const std::int32_t i0 = index(s);
      const T frac = s - static_cast<T>(static_cast<std::int32_t>(s));
      add(k, x[i0] + (x[i0 + 1] - x[i0]) * frac);
    }
    for (std::size_t k = mid; k < hi; ++k) {
      const T s = pos(k);
      const std::int32_t i0 = index(s);
      const T frac = s - static_cast<T>(i0);
      add(k, x[i0] + (x[i0] - x[i0]) * frac);
    }
  }
}

template <typename T, Interpolation Mode, bool Weighted>
void beamform_columns(const RfFrame<T>& frame, const AcquisitionContext& ctx,
                      const ImageGrid& grid, const ApodizationSpec& apod,
                      std::size_t col_begin, std::size_t col_end,
                      Array2<T>& out) {
  const std::size_t n_el = ctx.n_elements;
  const std::size_t n_z = grid.n_z();
  const std::size_t n_tx = frame.n_tx();
  const std::size_t n_rx = frame.n_rx();
  const double c = ctx.speed_of_sound;
  const T fs = static_cast<T>(ctx.sampling_frequency);
  const auto* sta = std::get_if<StaTransmit>(&ctx.tx);

  std::vector<T> legs(n_el * n_z);
  std::vector<T> pw_legs(sta ? 0 : n_tx * n_z);
  std::vector<T> weights(Weighted ? n_el * n_z : 0);
  std::vector<double> pixel_weights(Weighted ? n_el : 0);
  std::vector<T> acc(n_z);
  std::vector<double> cos_a, sin_a;
  if (!sta) {
    for (double a : std::get<PlaneWaveTransmit>(ctx.tx).angles) {
      cos_a.push_back(std::cos(a));
      sin_a.push_back(std::sin(a));
    }
  }

  for (std::size_t col = col_begin; col < col_end; ++col) {
    const double x = grid.x[col];
    for (std::size_t i = 0; i < n_el; ++i) {
      const double dx = x - ctx.element_x(i);
      T* row = legs.data() + i * n_z;
      for (std::size_t k = 0; k < n_z; ++k)
        row[k] = static_cast<T>(detail::leg_seconds(dx, grid.z[k], c));
    }
    if (!sta) {
      for (std::size_t e = 0; e < n_tx; ++e)
        for (std::size_t k = 0; k < n_z; ++k)
          pw_legs[e * n_z + k] = static_cast<T>(
              detail::plane_wave_seconds(x, grid.z[k], cos_a[e], sin_a[e], c));
    }
    if constexpr (Weighted) {
      for (std::size_t k = 0; k < n_z; ++k) {
        detail::fill_aperture(ctx, x, grid.z[k], apod, pixel_weights);
        for (std::size_t i = 0; i < n_el; ++i)
          weights[i * n_z + k] = static_cast<T>(pixel_weights[i]);
      }
    }
    std::fill(acc.begin(), acc.end(), T{0});
    for (std::size_t e = 0; e < n_tx; ++e) {
      const T* tx_leg = sta ? legs.data() + sta->tx_elements[e] * n_z
                            : pw_legs.data() + e * n_z;
      const T t0 = static_cast<T>(ctx.t0(e));
      for (std::size_t j = 0; j < n_rx; ++j) {
        const std::size_t el = ctx.rx_element(e, j);
        accumulate_trace<T, Mode, Weighted>(
            frame.data.lane(e, j), tx_leg, legs.data() + el * n_z,
            Weighted ? weights.data() + el * n_z : nullptr, t0, fs, n_z,
            acc.data());
      }
    }
    for (std::size_t k = 0; k < n_z; ++k) out(k, col) = acc[k];
  }
}

}  // namespace

template <typename T>
Image<T> das_beamform(const RfFrame<T>& frame, const AcquisitionContext& ctx,
                      const ImageGrid& grid, const ApodizationSpec& apod,
                      Interpolation interp, unsigned threads) {
  validate_pair(frame, ctx);
  check_inputs(ctx, grid, apod);
  Image<T> image{Array2<T>(grid.n_z(), grid.n_x()), Stage::kRf, grid};
  const bool weighted =
      apod.f_number > 0.0 || apod.window != Window::kRectangular;
  parallel_for(grid.n_x(), threads, [&](std::size_t b, std::size_t e) {
    if (interp == Interpolation::kNearest) {
      if (weighted)
        beamform_columns<T, Interpolation::kNearest, true>(frame, ctx, grid,
                                                           apod, b, e,
                                                           image.data);
      else
        beamform_columns<T, Interpolation::kNearest, false>(frame, ctx, grid,
                                                            apod, b, e,
                                                            image.data);
    } else {
      if (weighted)
        beamform_columns<T, Interpolation::kLinear, true>(frame, ctx, grid,
                                                          apod, b, e,
                                                          image.data);
      else
        beamform_columns<T, Interpolation::kLinear, false>(frame, ctx, grid,
                                                           apod, b, e,
                                                           image.data);
    }
  });
  return image;
}

template <typename T>
Image<T> das_beamform_oracle(const RfFrame<T>& frame,
                             const AcquisitionContext& ctx,
                             const ImageGrid& grid, const ApodizationSpec& apod,
                             Interpolation interp) {
  validate_pair(frame, ctx);
  check_inputs(ctx, grid, apod);
  const double c = ctx.speed_of_sound;
  const T fs = static_cast<T>(ctx.sampling_frequency);
  const std::size_t n_samples = frame.n_samples();
  Image<T> image{Array2<T>(grid.n_z(), grid.n_x()), Stage::kRf, grid};

  for (std::size_t iz = 0; iz < grid.n_z(); ++iz) {
    for (std::size_t ix = 0; ix < grid.n_x(); ++ix) {
      const double x = grid.x[ix];
      const double z = grid.z[iz];

      // Receive weights, computed directly from the aperture definition.
      std::vector<double> w(ctx.n_elements, 0.0);
      std::vector<std::size_t> active;
      for (std::size_t i = 0; i < ctx.n_elements; ++i)
        if (apod.f_number == 0.0 ||
            std::abs(ctx.element_x(i) - x) <= z / (2.0 * apod.f_number))
          active.push_back(i);
      for (std::size_t a = 0; a < active.size(); ++a)
        w[active[a]] = apod.window == Window::kHann
                           ? detail::hann_weight(a, active.size())
                           : 1.0;

      T acc{0};
      for (std::size_t e = 0; e < frame.n_tx(); ++e) {
        T tx_leg;
        if (const auto* sta = std::get_if<StaTransmit>(&ctx.tx)) {
          tx_leg = static_cast<T>(detail::leg_seconds(
              x - ctx.element_x(sta->tx_elements[e]), z, c));
        } else {
          const double a = std::get<PlaneWaveTransmit>(ctx.tx).angles[e];
          tx_leg = static_cast<T>(detail::plane_wave_seconds(
              x, z, std::cos(a), std::sin(a), c));
        }
        for (std::size_t j = 0; j < frame.n_rx(); ++j) {
          const std::size_t el = ctx.rx_element(e, j);
          const T rx_leg =
              static_cast<T>(detail::leg_seconds(x - ctx.element_x(el), z, c));
          const T s = detail::sample_position(
              tx_leg, rx_leg, static_cast<T>(ctx.t0(e)), fs);
          if (s < T{0} || s > static_cast<T>(n_samples - 1)) continue;
          T v;
          if (interp == Interpolation::kNearest) {
            v = frame.data(e, j, static_cast<std::size_t>(std::floor(s + T(0.5))));
          } else {
            const auto i0 = static_cast<std::size_t>(std::floor(s));
            const T frac = s - static_cast<T>(i0);
            const T lo = frame.data(e, j, i0);
            const T hi = i0 + 1 < n_samples ? frame.data(e, j, i0 + 1) : lo;
            v = lo + (hi - lo) * frac;
          }
          acc += static_cast<T>(w[el]) * v;
        }
      }
      image.data(iz, ix) = acc;
    }
  }
  return image;
}

template Image<float> das_beamform(const RfFrame<float>&,
                                   const AcquisitionContext&, const ImageGrid&,
                                   const ApodizationSpec&, Interpolation,
                                   unsigned);
template Image<double> das_beamform(const RfFrame<double>&,
                                    const AcquisitionContext&, const ImageGrid&,
                                    const ApodizationSpec&, Interpolation,
                                    unsigned);
template Image<float> das_beamform_oracle(const RfFrame<float>&,
                                          const AcquisitionContext&,
                                          const ImageGrid&,
                                          const ApodizationSpec&,
                                          Interpolation);
template Image<double> das_beamform_oracle(const RfFrame<double>&,
                                           const AcquisitionContext&,
                                           const ImageGrid&,
                                           const ApodizationSpec&,
                                           Interpolation);

}  // namespace sonoflow
