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
#include <memory>
#include <optional>
#include <variant>
#include <vector>

#include "sonoflow/types.hpp"

namespace sonoflow {

enum class SampleType { kF32, kF64 };

struct Scatterer {
  double x = 0.0;  // m
  double z = 0.0;  // m, > 0
  double amplitude = 1.0;
};

// Hann-windowed tone burst centered on the echo arrival time.
struct Pulse {
  double center_frequency = 5e6;  // Hz
  unsigned n_cycles = 2;

  double duration() const { return n_cycles / center_frequency; }
  double operator()(double t) const;
};

struct Phantom {
  std::vector<Scatterer> scatterers;
  Pulse pulse;

  void validate() const;
};

// Point-scatterer echo model. No attenuation, directivity or diffraction:
// every scatterer contributes amplitude * pulse(t - tau) to every channel,
// with tau the exact two-way time of flight and t = k / fs + t0.
template <typename T>
RfFrame<T> simulate_rf(const Phantom& phantom, const AcquisitionContext& ctx,
                       std::size_t n_samples);

// Two-way time of flight from the transmit event to scatterer s and back to
// the element recorded by channel j.
double time_of_flight(const AcquisitionContext& ctx, std::size_t acquisition,
                      std::size_t channel, const Scatterer& s);

template <typename T>
struct Observation {
  std::shared_ptr<const RfFrame<T>> frame;
  std::shared_ptr<const AcquisitionContext> ctx;
  std::size_t index = 0;
};

using AnyObservation = std::variant<Observation<float>, Observation<double>>;

std::size_t observation_index(const AnyObservation& obs);
std::array<std::size_t, 3> observation_shape(const AnyObservation& obs);

// A source of validated (frame, context) observations. Single consumer.
class Environment {
 public:
  class Source {
   public:
    virtual ~Source() = default;
    virtual std::optional<AnyObservation> next(std::size_t index) = 0;
  };

  explicit Environment(std::unique_ptr<Source> source);
  Environment(Environment&&) noexcept;
  Environment& operator=(Environment&&) noexcept;
  ~Environment();

  // Frames in stored order. Throws IoError or FormatError.
  static Environment open_dataset(const std::filesystem::path& path);

  struct SimulatorOptions {
    std::size_t n_samples = 2048;
    SampleType sample_type = SampleType::kF64;
    std::uint64_t seed = 0;
    double noise_std = 0.0;  // additive white Gaussian noise
    std::optional<std::size_t> max_frames;
  };

  static Environment simulator(Phantom phantom, AcquisitionContext ctx,
                               SimulatorOptions options);

  // nullopt at end of stream.
  std::optional<AnyObservation> next_observation();
  std::size_t frames_read() const noexcept { return frames_read_; }

 private:
  std::unique_ptr<Source> source_;
  std::size_t frames_read_ = 0;
  bool exhausted_ = false;
};

}  // namespace sonoflow
