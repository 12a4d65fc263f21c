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

// Built-in operators of the pipeline registry.

#include <cmath>
#include <optional>
#include <string>

#include "sonoflow/beamform.hpp"
#include "sonoflow/error.hpp"
#include "sonoflow/pipeline.hpp"
#include "sonoflow/qus.hpp"
#include "sonoflow/sigproc.hpp"

namespace sonoflow {

namespace {

using json = nlohmann::json;

Error param_error(std::string_view op, const std::string& what) {
  return Error::invalid_metadata(std::string(op) + ".params", what);
}

template <typename F>
auto with_params(std::string_view op, F&& f) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw param_error(op, e.what());
  }
}

class UnaryOperator : public Operator {
 public:
  std::optional<PortType> output_type(
      std::span<const PortType> inputs) const override {
    if (inputs.size() != 1) return std::nullopt;
    return map_type(inputs[0]);
  }

 protected:
  virtual std::optional<PortType> map_type(PortType in) const = 0;
};

// Accepts exactly one input type.
class FixedOperator : public UnaryOperator {
 public:
  FixedOperator(PortType in, PortType out) : in_(in), out_(out) {}
  std::string accepted_inputs() const override {
    return std::string(port_type_name(in_));
  }

 protected:
  std::optional<PortType> map_type(PortType in) const override {
    if (in == in_) return out_;
    return std::nullopt;
  }

 private:
  PortType in_;
  PortType out_;
};

class IdentityOp final : public UnaryOperator {
 public:
  std::string_view kind() const override { return "Identity"; }
  std::string_view stage() const override { return "Identity"; }
  std::string accepted_inputs() const override { return "any"; }
  ValuePtr run(std::span<const ValuePtr> in, const ExecOptions&) const override {
    return in[0];
  }

 protected:
  std::optional<PortType> map_type(PortType in) const override { return in; }
};

Interpolation parse_interpolation(const std::string& s) {
  if (s == "linear") return Interpolation::kLinear;
  if (s == "nearest") return Interpolation::kNearest;
  throw param_error("Beamforming", "interpolation must be linear or nearest");
}

Window parse_window(const std::string& s) {
  if (s == "rectangular") return Window::kRectangular;
  if (s == "hann") return Window::kHann;
  throw param_error("Beamforming", "window must be rectangular or hann");
}

class BeamformingOp final : public FixedOperator {
 public:
  explicit BeamformingOp(const json& p)
      : FixedOperator(PortType::kObservation, PortType::kRfImage) {
    with_params("Beamforming", [&] {
      interp_ = parse_interpolation(p.value("interpolation", "linear"));
      apod_.window = parse_window(p.value("window", "rectangular"));
      apod_.f_number = p.value("f_number", 0.0);
      if (!std::isfinite(apod_.f_number) || apod_.f_number < 0.0)
        throw param_error("Beamforming", "f_number must be finite and >= 0");
      const json grid = p.value("grid", json::object());
      if (grid.contains("x") || grid.contains("z")) {
        const auto gx = grid.at("x").get<std::array<double, 3>>();
        const auto gz = grid.at("z").get<std::array<double, 3>>();
        explicit_grid_ = linear_grid(gx[0], gx[1], static_cast<std::size_t>(gx[2]),
                                     gz[0], gz[1], static_cast<std::size_t>(gz[2]));
      } else {
        mode_ = grid.value("mode", "auto");
        if (mode_ != "auto" && mode_ != "sta" && mode_ != "pw")
          throw param_error("Beamforming", "grid.mode must be auto, sta or pw");
        if (grid.contains("n_x")) n_x_ = grid.at("n_x").get<std::size_t>();
        if (grid.contains("n_z")) n_z_ = grid.at("n_z").get<std::size_t>();
      }
      return 0;
    });
  }

  std::string_view kind() const override { return "Beamforming"; }
  std::string_view stage() const override { return "Beamforming"; }

  ValuePtr run(std::span<const ValuePtr> in,
               const ExecOptions& options) const override {
    return std::visit(
        [&](const auto& v) -> ValuePtr {
          using V = std::decay_t<decltype(v)>;
          if constexpr (std::is_same_v<V, Observation<float>> ||
                        std::is_same_v<V, Observation<double>>) {
            const ImageGrid grid = grid_for(*v.ctx, v.frame->n_samples());
            return std::make_shared<const Value>(das_beamform(
                *v.frame, *v.ctx, grid, apod_, interp_, options.threads));
          } else {
            throw Error(Errc::kPortMismatch, "Beamforming needs an observation");
          }
        },
        *in[0]);
  }

 private:
  ImageGrid grid_for(const AcquisitionContext& ctx, std::size_t n_samples) const {
    if (explicit_grid_) return *explicit_grid_;
    GridMode mode = ctx.is_plane_wave() ? GridMode::kPlaneWave : GridMode::kSta;
    if (mode_ == "sta") mode = GridMode::kSta;
    if (mode_ == "pw") mode = GridMode::kPlaneWave;
    return default_grid(ctx, n_samples, mode, n_z_, n_x_);
  }

  Interpolation interp_ = Interpolation::kLinear;
  ApodizationSpec apod_;
  std::optional<ImageGrid> explicit_grid_;
  std::string mode_ = "auto";
  std::optional<std::size_t> n_x_;
  std::optional<std::size_t> n_z_;
};

class FirFilterOp final : public UnaryOperator {
 public:
  explicit FirFilterOp(const json& p) {
    with_params("FirFilter", [&] {
      spec_.coefficients = p.at("coefficients").get<std::vector<double>>();
      return 0;
    });
    if (spec_.coefficients.empty())
      throw Error(Errc::kEmptyCoefficients, "FirFilter needs >= 1 coefficient");
  }

  std::string_view kind() const override { return "FirFilter"; }
  std::string_view stage() const override { return "Pre-processing"; }
  std::string accepted_inputs() const override { return "observation or rf_image"; }

  ValuePtr run(std::span<const ValuePtr> in,
               const ExecOptions& options) const override {
    return std::visit(
        [&](const auto& v) -> ValuePtr {
          using V = std::decay_t<decltype(v)>;
          if constexpr (std::is_same_v<V, Observation<float>> ||
                        std::is_same_v<V, Observation<double>>) {
            using T = typename decltype(v.frame)::element_type::value_type;
            auto frame = std::make_shared<const RfFrame<T>>(
                fir_filter(*v.frame, spec_, options.threads));
            return std::make_shared<const Value>(V{frame, v.ctx, v.index});
          } else if constexpr (std::is_same_v<V, Image<float>> ||
                               std::is_same_v<V, Image<double>>) {
            return std::make_shared<const Value>(
                V{fir_filter(v.data, spec_, 0), v.stage, v.grid});
          } else {
            throw Error(Errc::kPortMismatch, "FirFilter got an unsupported input");
          }
        },
        *in[0]);
  }

 protected:
  std::optional<PortType> map_type(PortType in) const override {
    if (in == PortType::kObservation || in == PortType::kRfImage) return in;
    return std::nullopt;
  }

 private:
  FirSpec spec_;
};

class AnalyticSignalOp final : public FixedOperator {
 public:
  AnalyticSignalOp()
      : FixedOperator(PortType::kRfImage, PortType::kComplexImage) {}
  std::string_view kind() const override { return "AnalyticSignal"; }
  std::string_view stage() const override { return "Envelope Detection"; }

  ValuePtr run(std::span<const ValuePtr> in,
               const ExecOptions& options) const override {
    return std::visit(
        [&](const auto& v) -> ValuePtr {
          using V = std::decay_t<decltype(v)>;
          if constexpr (std::is_same_v<V, Image<float>> ||
                        std::is_same_v<V, Image<double>>)
            return std::make_shared<const Value>(
                analytic_signal(v, options.threads));
          else
            throw Error(Errc::kPortMismatch, "AnalyticSignal needs an rf image");
        },
        *in[0]);
  }
};

class AbsoluteValueOp final : public FixedOperator {
 public:
  AbsoluteValueOp()
      : FixedOperator(PortType::kComplexImage, PortType::kEnvelopeImage) {}
  std::string_view kind() const override { return "AbsoluteValue"; }
  std::string_view stage() const override { return "Envelope Detection"; }

  ValuePtr run(std::span<const ValuePtr> in, const ExecOptions&) const override {
    return std::visit(
        [&](const auto& v) -> ValuePtr {
          using V = std::decay_t<decltype(v)>;
          if constexpr (std::is_same_v<V, ComplexImage<float>> ||
                        std::is_same_v<V, ComplexImage<double>>)
            return std::make_shared<const Value>(envelope(v));
          else
            throw Error(Errc::kPortMismatch, "AbsoluteValue needs a complex image");
        },
        *in[0]);
  }
};

class DynamicAdjustmentOp final : public FixedOperator {
 public:
  explicit DynamicAdjustmentOp(const json& p)
      : FixedOperator(PortType::kEnvelopeImage, PortType::kDisplayImage) {
    range_db_ = with_params("DynamicAdjustment",
                            [&] { return p.value("range_db", 30.0); });
    if (!(range_db_ > 0.0) || !std::isfinite(range_db_))
      throw Error(Errc::kNonPositiveRange, "range_db must be > 0");
  }
  std::string_view kind() const override { return "DynamicAdjustment"; }
  std::string_view stage() const override { return "Dynamic Adjustment"; }

  ValuePtr run(std::span<const ValuePtr> in, const ExecOptions&) const override {
    return std::visit(
        [&](const auto& v) -> ValuePtr {
          using V = std::decay_t<decltype(v)>;
          if constexpr (std::is_same_v<V, Image<float>> ||
                        std::is_same_v<V, Image<double>>)
            return std::make_shared<const Value>(dynamic_adjustment(v, range_db_));
          else
            throw Error(Errc::kPortMismatch,
                        "DynamicAdjustment needs an envelope image");
        },
        *in[0]);
  }

 private:
  double range_db_ = 30.0;
};

WindowGeometry parse_window_geometry(const json& p) {
  return with_params("SlidingMoments", [&] {
    const auto win = p.at("window").get<std::array<std::size_t, 2>>();
    const auto stride =
        p.value("stride", std::array<std::size_t, 2>{win[0], win[1]});
    return WindowGeometry{win[0], win[1], stride[0], stride[1]};
  });
}

class SlidingMomentsOp final : public FixedOperator {
 public:
  explicit SlidingMomentsOp(const json& p)
      : FixedOperator(PortType::kEnvelopeImage, PortType::kMoments),
        window_(parse_window_geometry(p)) {
    if (window_.stride_z < 1 || window_.stride_x < 1)
      throw param_error("SlidingMoments", "strides must be >= 1");
  }
  std::string_view kind() const override { return "SlidingMoments"; }
  std::string_view stage() const override { return "Estimator"; }

  ValuePtr run(std::span<const ValuePtr> in, const ExecOptions&) const override {
    return std::visit(
        [&](const auto& v) -> ValuePtr {
          using V = std::decay_t<decltype(v)>;
          if constexpr (std::is_same_v<V, Image<float>> ||
                        std::is_same_v<V, Image<double>>)
            return std::make_shared<const Value>(sliding_moments(v, window_));
          else
            throw Error(Errc::kPortMismatch,
                        "SlidingMoments needs an envelope image");
        },
        *in[0]);
  }

 private:
  WindowGeometry window_;
};

DenseModel model_from_params(const json& p) {
  if (p.contains("model")) return load_dense_model(p.at("model").get<std::string>());
  return with_params("HkEstimator", [&] {
    std::vector<DenseLayer> layers;
    for (const auto& l : p.at("layers")) {
      DenseLayer layer;
      layer.in = l.at("in").get<std::size_t>();
      layer.out = l.at("out").get<std::size_t>();
      layer.weights = l.at("weights").get<std::vector<double>>();
      layer.bias = l.at("bias").get<std::vector<double>>();
      layer.activation = parse_activation(l.value("activation", "identity"));
      layers.push_back(std::move(layer));
    }
    return DenseModel(std::move(layers));
  });
}

class HkEstimatorOp final : public FixedOperator {
 public:
  explicit HkEstimatorOp(const json& p)
      : FixedOperator(PortType::kMoments, PortType::kHkMap),
        model_(model_from_params(p)) {
    if (model_.input_width() != 3 || model_.output_width() != 2)
      throw Error::dimension_mismatch(
          0, "HkEstimator model must map 3 moments to (u, k)");
  }
  std::string_view kind() const override { return "HkEstimator"; }
  std::string_view stage() const override { return "Estimator"; }

  ValuePtr run(std::span<const ValuePtr> in,
               const ExecOptions& options) const override {
    const auto* moments = std::get_if<MomentMaps>(in[0].get());
    if (moments == nullptr)
      throw Error(Errc::kPortMismatch, "HkEstimator needs moment maps");
    return std::make_shared<const Value>(
        estimate_hk_map(*moments, model_, options.threads));
  }

 private:
  DenseModel model_;
};

template <typename Op>
OperatorFactory no_params() {
  return [](const json&) { return std::make_unique<Op>(); };
}

template <typename Op>
OperatorFactory with_json() {
  return [](const json& p) { return std::make_unique<Op>(p); };
}

}  // namespace

const OperatorRegistry& OperatorRegistry::builtin() {
  static const OperatorRegistry registry = [] {
    OperatorRegistry r;
    r.add("Identity", no_params<IdentityOp>());
    r.add("Beamforming", with_json<BeamformingOp>());
    r.add("FirFilter", with_json<FirFilterOp>());
    r.add("AnalyticSignal", no_params<AnalyticSignalOp>());
    r.add("AbsoluteValue", no_params<AbsoluteValueOp>());
    r.add("DynamicAdjustment", with_json<DynamicAdjustmentOp>());
    r.add("SlidingMoments", with_json<SlidingMomentsOp>());
    r.add("HkEstimator", with_json<HkEstimatorOp>());
    return r;
  }();
  return registry;
}

}  // namespace sonoflow
