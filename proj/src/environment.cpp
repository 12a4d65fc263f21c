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

#include "sonoflow/environment.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <string>

#include "sonoflow/error.hpp"
#include "sonoflow/io.hpp"

namespace sonoflow {

double Pulse::operator()(double t) const {
  const double half = 0.5 * duration();
  if (t <= -half || t >= half) return 0.0;
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  const double window = 0.5 * (1.0 + std::cos(kTwoPi * t / duration()));
  return window * std::cos(kTwoPi * center_frequency * t);
}

void Phantom::validate() const {
  if (!(pulse.center_frequency > 0.0) || !std::isfinite(pulse.center_frequency))
    throw Error::invalid_metadata("pulse.center_frequency", "must be > 0");
  if (pulse.n_cycles < 1)
    throw Error::invalid_metadata("pulse.n_cycles", "must be >= 1");
  for (const auto& s : scatterers) {
    if (!(s.z > 0.0) || !std::isfinite(s.z) || !std::isfinite(s.x))
      throw Error::invalid_metadata("scatterers", "need finite x and z > 0");
    if (!std::isfinite(s.amplitude))
      throw Error::invalid_metadata("scatterers", "non-finite amplitude");
  }
}

double time_of_flight(const AcquisitionContext& ctx, std::size_t acquisition,
                      std::size_t channel, const Scatterer& s) {
  const double c = ctx.speed_of_sound;
  const double rx_x = ctx.element_x(ctx.rx_element(acquisition, channel));
  const double back = std::hypot(s.x - rx_x, s.z);
  if (const auto* sta = std::get_if<StaTransmit>(&ctx.tx)) {
    const double tx_x = ctx.element_x(sta->tx_elements[acquisition]);
    return (std::hypot(s.x - tx_x, s.z) + back) / c;
  }
  const double a = std::get<PlaneWaveTransmit>(ctx.tx).angles[acquisition];
  return (s.z * std::cos(a) + s.x * std::sin(a) + back) / c;
}

template <typename T>
RfFrame<T> simulate_rf(const Phantom& phantom, const AcquisitionContext& ctx,
                       std::size_t n_samples) {
  ctx.validate();
  phantom.validate();
  if (n_samples < 1) throw Error::invalid_metadata("n_samples", "must be >= 1");
  const std::size_t n_tx = ctx.n_tx();
  const std::size_t n_rx =
      ctx.rx_channel_map.empty() ? ctx.n_elements : ctx.rx_channel_map[0].size();
  RfFrame<T> frame{Array3<T>(n_tx, n_rx, n_samples)};
  const double fs = ctx.sampling_frequency;
  const double half = 0.5 * phantom.pulse.duration();
  const double last = static_cast<double>(n_samples - 1);

  for (std::size_t e = 0; e < n_tx; ++e) {
    const double t0 = ctx.t0(e);
    for (std::size_t j = 0; j < n_rx; ++j) {
      auto lane = frame.data.lane(e, j);
      for (const auto& s : phantom.scatterers) {
        const double tau = time_of_flight(ctx, e, j, s);
        // Samples whose time lies strictly inside the pulse support.
        const double first = std::floor((tau - half - t0) * fs) + 1.0;
        const double stop = std::ceil((tau + half - t0) * fs) - 1.0;
        if (stop < 0.0 || first > last) continue;
        const auto k0 = static_cast<std::size_t>(std::max(first, 0.0));
        const auto k1 = static_cast<std::size_t>(std::min(stop, last));
        for (std::size_t k = k0; k <= k1; ++k) {
          const double t = static_cast<double>(k) / fs + t0;
          lane[k] += static_cast<T>(s.amplitude * phantom.pulse(t - tau));
        }
      }
    }
  }
  return frame;
}

template RfFrame<float> simulate_rf(const Phantom&, const AcquisitionContext&,
                                    std::size_t);
template RfFrame<double> simulate_rf(const Phantom&, const AcquisitionContext&,
                                     std::size_t);

std::size_t observation_index(const AnyObservation& obs) {
  return std::visit([](const auto& o) { return o.index; }, obs);
}

std::array<std::size_t, 3> observation_shape(const AnyObservation& obs) {
  return std::visit([](const auto& o) { return o.frame->data.shape(); }, obs);
}

Environment::Environment(std::unique_ptr<Source> source)
    : source_(std::move(source)) {}
Environment::Environment(Environment&&) noexcept = default;
Environment& Environment::operator=(Environment&&) noexcept = default;
Environment::~Environment() = default;

std::optional<AnyObservation> Environment::next_observation() {
  if (exhausted_) return std::nullopt;
  auto obs = source_->next(frames_read_);
  if (!obs) {
    exhausted_ = true;
    return std::nullopt;
  }
  std::visit([](const auto& o) { validate_pair(*o.frame, *o.ctx); }, *obs);
  ++frames_read_;
  return obs;
}

namespace {

class DatasetSource : public Environment::Source {
 public:
  explicit DatasetSource(const std::filesystem::path& path)
      : path_(path), in_(path, std::ios::binary) {
    std::error_code ec;
    if (!std::filesystem::is_regular_file(path, ec) || !in_)
      throw Error(Errc::kIoError, "cannot open " + path.string());
    const auto size = std::filesystem::file_size(path, ec);
    if (ec) throw Error(Errc::kIoError, "cannot stat " + path.string());
    header_ = read_wfrf_header(in_, size);
    ctx_ = std::make_shared<const AcquisitionContext>(header_.ctx);
  }

  std::optional<AnyObservation> next(std::size_t index) override {
    if (index >= header_.frame_count) return std::nullopt;
    in_.seekg(static_cast<std::streamoff>(header_.payload_offset +
                                          index * header_.frame_bytes()));
    if (header_.sample_type == SampleType::kF32)
      return Observation<float>{
          std::make_shared<const RfFrame<float>>(
              read_wfrf_frame<float>(in_, header_)),
          ctx_, index};
    return Observation<double>{std::make_shared<const RfFrame<double>>(
                                   read_wfrf_frame<double>(in_, header_)),
                               ctx_, index};
  }

 private:
  std::filesystem::path path_;
  std::ifstream in_;
  WfrfHeader header_;
  std::shared_ptr<const AcquisitionContext> ctx_;
};

class SimulatorSource : public Environment::Source {
 public:
  SimulatorSource(Phantom phantom, AcquisitionContext ctx,
                  Environment::SimulatorOptions options)
      : phantom_(std::move(phantom)),
        ctx_(std::make_shared<const AcquisitionContext>(std::move(ctx))),
        options_(options),
        rng_(options.seed) {
    ctx_->validate();
    phantom_.validate();
    if (!(options_.noise_std >= 0.0) || !std::isfinite(options_.noise_std))
      throw Error::invalid_metadata("noise_std", "must be finite and >= 0");
  }

  std::optional<AnyObservation> next(std::size_t index) override {
    if (options_.max_frames && index >= *options_.max_frames)
      return std::nullopt;
    if (options_.sample_type == SampleType::kF32)
      return make<float>(index, cached_f32_);
    return make<double>(index, cached_f64_);
  }

 private:
  template <typename T>
  Observation<T> make(std::size_t index,
                      std::shared_ptr<const RfFrame<T>>& cache) {
    // Without noise every frame is identical, so it is simulated once.
    if (!cache)
      cache = std::make_shared<const RfFrame<T>>(
          simulate_rf<T>(phantom_, *ctx_, options_.n_samples));
    if (options_.noise_std == 0.0) return {cache, ctx_, index};
    auto noisy = std::make_shared<RfFrame<T>>(*cache);
    std::normal_distribution<double> noise(0.0, options_.noise_std);
    for (T& v : noisy->data.flat()) v += static_cast<T>(noise(rng_));
    return {std::move(noisy), ctx_, index};
  }

  Phantom phantom_;
  std::shared_ptr<const AcquisitionContext> ctx_;
  Environment::SimulatorOptions options_;
  std::mt19937_64 rng_;
  std::shared_ptr<const RfFrame<float>> cached_f32_;
  std::shared_ptr<const RfFrame<double>> cached_f64_;
};

}  // namespace

Environment Environment::open_dataset(const std::filesystem::path& path) {
  return Environment(std::make_unique<DatasetSource>(path));
}

Environment Environment::simulator(Phantom phantom, AcquisitionContext ctx,
                                   SimulatorOptions options) {
  return Environment(std::make_unique<SimulatorSource>(
      std::move(phantom), std::move(ctx), options));
}

}  // namespace sonoflow
