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
#include <filesystem>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "sonoflow/error.hpp"
#include "sonoflow/types.hpp"

namespace sonoflow::testing {

// Runs f and returns the library error it throws, or nullopt.
template <typename F>
std::optional<Error> error_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e;
  }
  return std::nullopt;
}

inline AcquisitionContext sta_context(std::size_t n_elements,
                                      double pitch = 3e-4) {
  AcquisitionContext ctx;
  ctx.n_elements = n_elements;
  ctx.pitch = pitch;
  StaTransmit tx;
  for (std::size_t e = 0; e < n_elements; ++e) tx.tx_elements.push_back(e);
  ctx.tx = tx;
  return ctx;
}

inline AcquisitionContext pw_context(std::size_t n_elements,
                                     std::vector<double> angles,
                                     double pitch = 3e-4) {
  AcquisitionContext ctx;
  ctx.n_elements = n_elements;
  ctx.pitch = pitch;
  ctx.tx = PlaneWaveTransmit{std::move(angles)};
  return ctx;
}

template <typename T>
RfFrame<T> random_frame(std::size_t n_tx, std::size_t n_rx, std::size_t n_s,
                        std::mt19937_64& rng) {
  RfFrame<T> f{Array3<T>(n_tx, n_rx, n_s)};
  std::normal_distribution<double> d(0.0, 1.0);
  for (auto& v : f.data.flat()) v = static_cast<T>(d(rng));
  return f;
}

// Direct O(N^2) analytic signal, independent of the FFT path.
inline std::vector<std::complex<double>> naive_analytic(
    const std::vector<double>& x) {
  const std::size_t n = x.size();
  std::vector<std::complex<double>> spec(n);
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t t = 0; t < n; ++t)
      spec[k] += x[t] * std::polar(1.0, -2.0 * std::numbers::pi * double(k * t % n) / double(n));
  for (std::size_t k = 0; k < n; ++k) {
    double g = 0.0;
    if (k == 0 || (n % 2 == 0 && k == n / 2))
      g = 1.0;
    else if (2 * k < n)
      g = 2.0;
    spec[k] *= g;
  }
  std::vector<std::complex<double>> out(n);
  for (std::size_t t = 0; t < n; ++t) {
    for (std::size_t k = 0; k < n; ++k)
      out[t] += spec[k] * std::polar(1.0, 2.0 * std::numbers::pi * double(k * t % n) / double(n));
    out[t] /= double(n);
  }
  return out;
}

// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& tag) {
  static std::mt19937_64 rng(std::random_device{}());
  auto p = std::filesystem::temp_directory_path() /
           ("sonoflow-" + tag + "-" + std::to_string(rng()));
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace sonoflow::testing
