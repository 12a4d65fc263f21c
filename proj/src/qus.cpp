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

#include "sonoflow/qus.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>

#include "sonoflow/error.hpp"
#include "sonoflow/parallel.hpp"

namespace sonoflow {

template <typename T>
MomentMaps sliding_moments(const Array2<T>& image,
                           const WindowGeometry& window) {
  if (window.stride_z < 1 || window.stride_x < 1)
    throw Error::invalid_metadata("window.stride", "must be >= 1");
  if (window.height < 1 || window.width < 1 || window.height > image.rows() ||
      window.width > image.cols())
    throw Error(Errc::kWindowTooLarge,
                "window " + std::to_string(window.height) + "x" +
                    std::to_string(window.width) + " does not fit image " +
                    std::to_string(image.rows()) + "x" +
                    std::to_string(image.cols()));
  const std::size_t rows = (image.rows() - window.height) / window.stride_z + 1;
  const std::size_t cols = (image.cols() - window.width) / window.stride_x + 1;
  MomentMaps maps{Array2<double>(rows, cols), Array2<double>(rows, cols),
                  Array2<double>(rows, cols), window};
  const double count = static_cast<double>(window.height * window.width);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      double s1 = 0.0, s2 = 0.0, s3 = 0.0;
      for (std::size_t i = 0; i < window.height; ++i) {
        const auto row = image.row(r * window.stride_z + i);
        for (std::size_t k = 0; k < window.width; ++k) {
          const double v = static_cast<double>(row[c * window.stride_x + k]);
          const double v2 = v * v;
          s1 += v;
          s2 += v2;
          s3 += v2 * v;
        }
      }
      maps.m1(r, c) = s1 / count;
      maps.m2(r, c) = s2 / count;
      maps.m3(r, c) = s3 / count;
    }
  }
  return maps;
}

template <typename T>
MomentMaps sliding_moments(const Image<T>& envelope_image,
                           const WindowGeometry& window) {
  if (envelope_image.stage != Stage::kEnvelope)
    throw Error(Errc::kWrongStage,
                "moments expect an envelope image, got " +
                    std::string(stage_name(envelope_image.stage)));
  return sliding_moments(envelope_image.data, window);
}

std::string_view activation_name(Activation a) {
  switch (a) {
    case Activation::kIdentity: return "identity";
    case Activation::kRelu: return "relu";
    case Activation::kSoftplus: return "softplus";
  }
  return "identity";
}

Activation parse_activation(std::string_view name) {
  if (name == "identity") return Activation::kIdentity;
  if (name == "relu") return Activation::kRelu;
  if (name == "softplus") return Activation::kSoftplus;
  throw Error::invalid_metadata("activation",
                                "unknown activation " + std::string(name));
}

namespace {

double activate(Activation a, double v) {
  switch (a) {
    case Activation::kIdentity: return v;
    case Activation::kRelu: return v > 0.0 ? v : 0.0;
    case Activation::kSoftplus:
      return v > 0.0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v));
  }
  return v;
}

}  // namespace

DenseModel::DenseModel(std::vector<DenseLayer> layers)
    : layers_(std::move(layers)) {
  if (layers_.empty())
    throw Error::dimension_mismatch(0, "model needs at least one layer");
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& l = layers_[i];
    if (l.in == 0 || l.out == 0 || l.weights.size() != l.in * l.out ||
        l.bias.size() != l.out)
      throw Error::dimension_mismatch(
          i, "layer " + std::to_string(i) + " parameter count mismatch");
    if (i > 0 && layers_[i - 1].out != l.in)
      throw Error::dimension_mismatch(
          i, "layer " + std::to_string(i) + " input width " +
                 std::to_string(l.in) + " != previous output width " +
                 std::to_string(layers_[i - 1].out));
    for (double w : l.weights)
      if (!std::isfinite(w)) throw Error(Errc::kInvalidData, "non-finite weight");
    for (double b : l.bias)
      if (!std::isfinite(b)) throw Error(Errc::kInvalidData, "non-finite bias");
  }
}

std::size_t DenseModel::input_width() const {
  return layers_.empty() ? 0 : layers_.front().in;
}

std::size_t DenseModel::output_width() const {
  return layers_.empty() ? 0 : layers_.back().out;
}

std::vector<double> DenseModel::forward(std::span<const double> x) const {
  if (layers_.empty())
    throw Error::dimension_mismatch(0, "model has no layers");
  if (x.size() != input_width())
    throw Error::dimension_mismatch(0, "input width " + std::to_string(x.size()) +
                                           " != " +
                                           std::to_string(input_width()));
  std::vector<double> cur(x.begin(), x.end());
  std::vector<double> next;
  for (const auto& l : layers_) {
    next.assign(l.out, 0.0);
    for (std::size_t o = 0; o < l.out; ++o) {
      double acc = l.bias[o];
      for (std::size_t i = 0; i < l.in; ++i) acc += l.weights[o * l.in + i] * cur[i];
      next[o] = activate(l.activation, acc);
    }
    cur.swap(next);
  }
  return cur;
}

std::array<double, 2> dense_forward(std::span<const double, 3> moments,
                                    const DenseModel& model) {
  if (model.input_width() != 3)
    throw Error::dimension_mismatch(0, "estimator input width must be 3");
  if (model.output_width() != 2)
    throw Error::dimension_mismatch(model.layers().size() - 1,
                                    "estimator output width must be 2");
  const auto y = model.forward(moments);
  return {y[0], y[1]};
}

HkMap estimate_hk_map(const MomentMaps& moments, const DenseModel& model,
                      unsigned threads) {
  const std::size_t rows = moments.m1.rows();
  const std::size_t cols = moments.m1.cols();
  HkMap map{Array2<HkParams>(rows, cols), moments.window};
  // Validates the model widths once, up front.
  dense_forward(std::array<double, 3>{0.0, 0.0, 0.0}, model);
  parallel_for(rows, threads, [&](std::size_t b, std::size_t e) {
    for (std::size_t r = b; r < e; ++r)
      for (std::size_t c = 0; c < cols; ++c) {
        const std::array<double, 3> x{moments.m1(r, c), moments.m2(r, c),
                                      moments.m3(r, c)};
        const auto y = dense_forward(x, model);
        map.values(r, c) = {y[0], y[1]};
      }
  });
  return map;
}

template <typename T>
HkMap estimate_hk_map(const Image<T>& envelope_image,
                      const WindowGeometry& window, const DenseModel& model,
                      unsigned threads) {
  return estimate_hk_map(sliding_moments(envelope_image, window), model,
                         threads);
}

namespace {

constexpr std::string_view kModelMagic = "sonoflow-dense";

}  // namespace

std::vector<unsigned char> serialize_dense_model(const DenseModel& model) {
  std::ostringstream head;
  head << kModelMagic << " 1\n";
  head << "layers " << model.layers().size() << "\n";
  for (const auto& l : model.layers())
    head << l.in << " " << l.out << " " << activation_name(l.activation) << "\n";
  head << "end\n";
  const std::string text = head.str();
  std::vector<unsigned char> out(text.begin(), text.end());
  auto put = [&](double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int b = 0; b < 8; ++b)
      out.push_back(static_cast<unsigned char>((bits >> (8 * b)) & 0xFF));
  };
  for (const auto& l : model.layers()) {
    for (double w : l.weights) put(w);
    for (double b : l.bias) put(b);
  }
  return out;
}

DenseModel parse_dense_model(std::span<const unsigned char> bytes) {
  std::size_t pos = 0;
  auto next_line = [&]() {
    std::string line;
    while (pos < bytes.size() && bytes[pos] != '\n')
      line.push_back(static_cast<char>(bytes[pos++]));
    if (pos >= bytes.size())
      throw Error::format_error(pos, "model header is not terminated");
    ++pos;
    return line;
  };
  std::istringstream first(next_line());
  std::string magic;
  int version = 0;
  first >> magic >> version;
  if (magic != kModelMagic) throw Error::format_error(0, "bad model magic");
  if (version != 1)
    throw Error::format_error(0, "unsupported model version " +
                                     std::to_string(version));
  std::istringstream count_line(next_line());
  std::string word;
  std::size_t n_layers = 0;
  count_line >> word >> n_layers;
  if (word != "layers" || n_layers == 0)
    throw Error::format_error(pos, "expected 'layers <n>'");
  std::vector<DenseLayer> layers(n_layers);
  for (auto& l : layers) {
    const std::size_t line_start = pos;
    std::istringstream ls(next_line());
    std::string act;
    if (!(ls >> l.in >> l.out >> act))
      throw Error::format_error(line_start, "expected '<in> <out> <activation>'");
    try {
      l.activation = parse_activation(act);
    } catch (const Error&) {
      throw Error::format_error(line_start, "unknown activation " + act);
    }
  }
  if (next_line() != "end") throw Error::format_error(pos, "expected 'end'");
  auto get = [&]() {
    if (pos + 8 > bytes.size())
      throw Error::format_error(pos, "truncated model parameters");
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b)
      bits |= static_cast<std::uint64_t>(bytes[pos + b]) << (8 * b);
    pos += 8;
    return std::bit_cast<double>(bits);
  };
  for (auto& l : layers) {
    l.weights.resize(l.in * l.out);
    l.bias.resize(l.out);
    for (double& w : l.weights) w = get();
    for (double& b : l.bias) b = get();
  }
  if (pos != bytes.size())
    throw Error::format_error(pos, "trailing bytes after model parameters");
  return DenseModel(std::move(layers));
}

DenseModel load_dense_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::kIoError, "cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  return parse_dense_model(bytes);
}

void save_dense_model(const DenseModel& model,
                      const std::filesystem::path& path) {
  const auto bytes = serialize_dense_model(model);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::kIoError, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(Errc::kIoError, "write failed: " + path.string());
}

template MomentMaps sliding_moments(const Array2<float>&, const WindowGeometry&);
template MomentMaps sliding_moments(const Array2<double>&, const WindowGeometry&);
template MomentMaps sliding_moments(const Image<float>&, const WindowGeometry&);
template MomentMaps sliding_moments(const Image<double>&, const WindowGeometry&);
template HkMap estimate_hk_map(const Image<float>&, const WindowGeometry&,
                               const DenseModel&, unsigned);
template HkMap estimate_hk_map(const Image<double>&, const WindowGeometry&,
                               const DenseModel&, unsigned);

}  // namespace sonoflow
