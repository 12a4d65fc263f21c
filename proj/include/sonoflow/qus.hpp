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
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "sonoflow/array.hpp"
#include "sonoflow/types.hpp"

namespace sonoflow {

struct WindowGeometry {
  std::size_t height = 1;
  std::size_t width = 1;
  std::size_t stride_z = 1;
  std::size_t stride_x = 1;
};

// Raw moments E[X], E[X^2], E[X^3] over every window placement.
struct MomentMaps {
  Array2<double> m1;
  Array2<double> m2;
  Array2<double> m3;
  WindowGeometry window;
};

template <typename T>
MomentMaps sliding_moments(const Array2<T>& image, const WindowGeometry& window);

template <typename T>
MomentMaps sliding_moments(const Image<T>& envelope_image,
                           const WindowGeometry& window);

enum class Activation { kIdentity, kRelu, kSoftplus };
std::string_view activation_name(Activation a);
Activation parse_activation(std::string_view name);

struct DenseLayer {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<double> weights;  // row-major [out][in]
  std::vector<double> bias;     // [out]
  Activation activation = Activation::kIdentity;
};

// Fully connected network, inference only.
class DenseModel {
 public:
  DenseModel() = default;
  // Throws DimensionMismatch(layer index) if the layers do not chain or the
  // parameter counts are wrong, InvalidData for non-finite parameters.
  explicit DenseModel(std::vector<DenseLayer> layers);

  const std::vector<DenseLayer>& layers() const noexcept { return layers_; }
  std::size_t input_width() const;
  std::size_t output_width() const;

  std::vector<double> forward(std::span<const double> x) const;

 private:
  std::vector<DenseLayer> layers_;
};

// Model file: a text header followed by little-endian f64 parameters.
//   sonoflow-dense 1
//   layers <n>
//   <in> <out> <activation>        (one line per layer)
//   end
// then, per layer, in*out weights (row-major [out][in]) and out biases.
DenseModel load_dense_model(const std::filesystem::path& path);
void save_dense_model(const DenseModel& model,
                      const std::filesystem::path& path);
DenseModel parse_dense_model(std::span<const unsigned char> bytes);
std::vector<unsigned char> serialize_dense_model(const DenseModel& model);

struct HkParams {
  double u = 0.0;
  double k = 0.0;
};

struct HkMap {
  Array2<HkParams> values;
  WindowGeometry window;
};

std::array<double, 2> dense_forward(std::span<const double, 3> moments,
                                    const DenseModel& model);

HkMap estimate_hk_map(const MomentMaps& moments, const DenseModel& model,
                      unsigned threads = 1);

template <typename T>
HkMap estimate_hk_map(const Image<T>& envelope_image,
                      const WindowGeometry& window, const DenseModel& model,
                      unsigned threads = 1);

}  // namespace sonoflow
