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

#include "sonoflow/types.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "sonoflow/error.hpp"

namespace sonoflow {

std::size_t AcquisitionContext::n_tx() const noexcept {
  return std::visit(
      [](const auto& s) -> std::size_t {
        if constexpr (std::is_same_v<std::decay_t<decltype(s)>, StaTransmit>)
          return s.tx_elements.size();
        else
          return s.angles.size();
      },
      tx);
}

void AcquisitionContext::validate() const {
  if (!(speed_of_sound > 0.0) || !std::isfinite(speed_of_sound))
    throw Error::invalid_metadata("speed_of_sound", "must be finite and > 0");
  if (!(sampling_frequency > 0.0) || !std::isfinite(sampling_frequency))
    throw Error::invalid_metadata("sampling_frequency",
                                  "must be finite and > 0");
  if (!(pitch > 0.0) || !std::isfinite(pitch))
    throw Error::invalid_metadata("pitch", "must be finite and > 0");
  if (n_elements < 1)
    throw Error::invalid_metadata("n_elements", "must be >= 1");
  if (n_tx() < 1)
    throw Error::invalid_metadata("tx_scheme", "needs at least one event");

  if (const auto* sta = std::get_if<StaTransmit>(&tx)) {
    for (std::size_t e : sta->tx_elements)
      if (e >= n_elements)
        throw Error::invalid_metadata(
            "tx_scheme", "tx element " + std::to_string(e) + " out of range");
  } else {
    for (double a : std::get<PlaneWaveTransmit>(tx).angles)
      if (!std::isfinite(a) || std::abs(a) >= std::numbers::pi / 2)
        throw Error::invalid_metadata("tx_scheme",
                                      "plane-wave angle outside (-pi/2, pi/2)");
  }

  if (!rx_channel_map.empty()) {
    if (rx_channel_map.size() != n_tx())
      throw Error::invalid_metadata("rx_channel_map",
                                    "needs one row per acquisition");
    const std::size_t n_rx = rx_channel_map.front().size();
    for (const auto& row : rx_channel_map) {
      if (row.size() != n_rx || n_rx == 0)
        throw Error::invalid_metadata("rx_channel_map", "ragged rows");
      for (std::size_t el : row)
        if (el >= n_elements)
          throw Error::invalid_metadata(
              "rx_channel_map",
              "element " + std::to_string(el) + " out of range");
    }
  }
  if (!time_zero.empty()) {
    if (time_zero.size() != n_tx())
      throw Error::invalid_metadata("time_zero",
                                    "needs one offset per acquisition");
    for (double t : time_zero)
      if (!std::isfinite(t))
        throw Error::invalid_metadata("time_zero", "non-finite offset");
  }
}

std::vector<std::vector<std::size_t>> centered_rx_aperture(
    const AcquisitionContext& ctx, std::size_t n_rx) {
  if (n_rx < 1 || n_rx > ctx.n_elements)
    throw Error::invalid_metadata("rx_channel_map",
                                  "receive aperture larger than the array");
  const std::size_t last_start = ctx.n_elements - n_rx;
  std::vector<std::vector<std::size_t>> map(ctx.n_tx());
  for (std::size_t e = 0; e < ctx.n_tx(); ++e) {
    std::size_t start = last_start / 2;
    if (const auto* sta = std::get_if<StaTransmit>(&ctx.tx)) {
      const std::size_t tx = sta->tx_elements[e];
      start = tx >= n_rx / 2 ? std::min(tx - n_rx / 2, last_start) : 0;
    }
    map[e].resize(n_rx);
    for (std::size_t j = 0; j < n_rx; ++j) map[e][j] = start + j;
  }
  return map;
}

template <typename T>
void validate_pair(const RfFrame<T>& frame, const AcquisitionContext& ctx) {
  const auto& shape = frame.data.shape();
  for (std::size_t axis = 0; axis < 3; ++axis)
    if (shape[axis] < 1)
      throw Error::dimension_mismatch(axis, "dimension must be >= 1");
  ctx.validate();
  if (frame.n_tx() != ctx.n_tx())
    throw Error::dimension_mismatch(
        0, "frame has " + std::to_string(frame.n_tx()) +
               " acquisitions, metadata describes " +
               std::to_string(ctx.n_tx()));
  if (ctx.rx_channel_map.empty()) {
    if (frame.n_rx() != ctx.n_elements)
      throw Error::dimension_mismatch(
          1, "identity channel map needs n_rx == n_elements (" +
                 std::to_string(frame.n_rx()) + " vs " +
                 std::to_string(ctx.n_elements) + ")");
  } else if (ctx.rx_channel_map.front().size() != frame.n_rx()) {
    throw Error::dimension_mismatch(
        1, "channel map has " +
               std::to_string(ctx.rx_channel_map.front().size()) +
               " channels, frame has " + std::to_string(frame.n_rx()));
  }
  for (T v : frame.data.flat())
    if (!std::isfinite(v))
      throw Error(Errc::kInvalidData, "non-finite RF sample");
}

template void validate_pair(const RfFrame<float>&, const AcquisitionContext&);
template void validate_pair(const RfFrame<double>&, const AcquisitionContext&);

void ImageGrid::validate() const {
  if (x.empty()) throw Error::invalid_metadata("grid.x", "empty");
  if (z.empty()) throw Error::invalid_metadata("grid.z", "empty");
  for (std::size_t i = 1; i < x.size(); ++i)
    if (!(x[i] > x[i - 1]))
      throw Error::invalid_metadata("grid.x", "not strictly increasing");
  for (std::size_t i = 1; i < z.size(); ++i)
    if (!(z[i] > z[i - 1]))
      throw Error::invalid_metadata("grid.z", "not strictly increasing");
  if (!(z.front() >= 0.0))
    throw Error::invalid_metadata("grid.z", "negative depth");
  for (double v : x)
    if (!std::isfinite(v)) throw Error::invalid_metadata("grid.x", "non-finite");
  for (double v : z)
    if (!std::isfinite(v)) throw Error::invalid_metadata("grid.z", "non-finite");
}

namespace {

std::vector<double> span_points(double lo, double hi, std::size_t n) {
  std::vector<double> out(n);
  if (n == 1) {
    out[0] = 0.5 * (lo + hi);
    return out;
  }
  const double step = (hi - lo) / static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i)
    out[i] = lo + step * static_cast<double>(i);
  out[n - 1] = hi;
  return out;
}

}  // namespace

ImageGrid default_grid(const AcquisitionContext& ctx, std::size_t n_samples,
                       GridMode mode, std::optional<std::size_t> n_z_override,
                       std::optional<std::size_t> n_x_override) {
  ctx.validate();
  if (n_samples < 1)
    throw Error::invalid_metadata("n_samples", "must be >= 1");
  const double dz = ctx.speed_of_sound / (2.0 * ctx.sampling_frequency);
  ImageGrid grid;
  if (mode == GridMode::kSta) {
    const auto* sta = std::get_if<StaTransmit>(&ctx.tx);
    if (sta == nullptr)
      throw Error::invalid_metadata("tx_scheme",
                                    "STA grid needs an STA transmit scheme");
    std::vector<std::size_t> elements = sta->tx_elements;
    std::sort(elements.begin(), elements.end());
    elements.erase(std::unique(elements.begin(), elements.end()),
                   elements.end());
    if (n_x_override) {
      if (*n_x_override < 1)
        throw Error::invalid_metadata("n_x", "must be >= 1");
      grid.x = span_points(ctx.element_x(elements.front()),
                           ctx.element_x(elements.back()), *n_x_override);
    } else {
      for (std::size_t el : elements) grid.x.push_back(ctx.element_x(el));
    }
    const std::size_t n_z = n_z_override.value_or(n_samples);
    if (n_z < 1) throw Error::invalid_metadata("n_z", "must be >= 1");
    grid.z.resize(n_z);
    for (std::size_t k = 0; k < n_z; ++k)
      grid.z[k] = static_cast<double>(k) * dz;
  } else {
    const std::size_t n_x = n_x_override.value_or(128);
    const std::size_t n_z = n_z_override.value_or(512);
    if (n_x < 1) throw Error::invalid_metadata("n_x", "must be >= 1");
    if (n_z < 1) throw Error::invalid_metadata("n_z", "must be >= 1");
    grid.x = span_points(ctx.element_x(0), ctx.element_x(ctx.n_elements - 1),
                         n_x);
    grid.z = span_points(0.0, static_cast<double>(n_samples) * dz, n_z);
  }
  grid.validate();
  return grid;
}

ImageGrid linear_grid(double x_min, double x_max, std::size_t n_x,
                      double z_min, double z_max, std::size_t n_z) {
  if (n_x < 1 || n_z < 1)
    throw Error::invalid_metadata("grid", "needs at least one point per axis");
  ImageGrid grid{span_points(x_min, x_max, n_x), span_points(z_min, z_max, n_z)};
  grid.validate();
  return grid;
}

std::string_view stage_name(Stage stage) {
  switch (stage) {
    case Stage::kRf: return "rf";
    case Stage::kComplexAnalytic: return "complex_analytic";
    case Stage::kEnvelope: return "envelope";
    case Stage::kDisplay: return "display";
  }
  return "unknown";
}

}  // namespace sonoflow
