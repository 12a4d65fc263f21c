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

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "sonoflow/environment.hpp"
#include "sonoflow/qus.hpp"
#include "sonoflow/types.hpp"

namespace sonoflow {

// A tensor flowing along a graph edge.
using Value = std::variant<Observation<float>, Observation<double>,
                           Image<float>, Image<double>, ComplexImage<float>,
                           ComplexImage<double>, MomentMaps, HkMap>;
using ValuePtr = std::shared_ptr<const Value>;

enum class PortType {
  kObservation,
  kRfImage,
  kComplexImage,
  kEnvelopeImage,
  kDisplayImage,
  kMoments,
  kHkMap,
};

std::string_view port_type_name(PortType t);
PortType port_type_of(const Value& v);
Value to_value(const AnyObservation& obs);

// Order-sensitive FNV-1a digest of a value's numeric payload.
std::uint64_t value_digest(const Value& v);

struct ExecOptions {
  unsigned threads = 1;  // 0 = all hardware threads
};

class Operator {
 public:
  virtual ~Operator() = default;

  virtual std::string_view kind() const = 0;
  // Row of the benchmark table this operator's time is charged to.
  virtual std::string_view stage() const = 0;
  virtual std::size_t arity() const { return 1; }
  // Output type for the given input types; nullopt if the combination is
  // not accepted. accepted_inputs() lists what each port takes, for
  // diagnostics.
  virtual std::optional<PortType> output_type(
      std::span<const PortType> inputs) const = 0;
  virtual std::string accepted_inputs() const = 0;
  virtual ValuePtr run(std::span<const ValuePtr> inputs,
                       const ExecOptions& options) const = 0;
};

using OperatorFactory =
    std::function<std::unique_ptr<Operator>(const nlohmann::json& params)>;

class OperatorRegistry {
 public:
  void add(std::string kind, OperatorFactory factory);
  bool contains(std::string_view kind) const;
  // Throws UnknownOperator.
  std::unique_ptr<Operator> create(const std::string& kind,
                                   const nlohmann::json& params) const;
  std::vector<std::string> kinds() const;

  // Beamforming, FirFilter, AnalyticSignal, AbsoluteValue,
  // DynamicAdjustment, SlidingMoments, HkEstimator, Identity.
  static const OperatorRegistry& builtin();

 private:
  std::map<std::string, OperatorFactory, std::less<>> factories_;
};

// Declarative pipeline. The reserved node name "input" is the observation
// supplied to execute().
struct NodeSpec {
  std::string name;
  std::string op;
  nlohmann::json params = nlohmann::json::object();
};

struct EdgeSpec {
  std::string from;
  std::string to;
  std::size_t port = 0;
};

struct PipelineSpec {
  std::vector<NodeSpec> nodes;
  std::vector<EdgeSpec> edges;
  std::vector<std::string> outputs;  // empty = every sink node
};

inline constexpr std::string_view kInputNode = "input";

PipelineSpec parse_pipeline_spec(const nlohmann::json& j);
nlohmann::json pipeline_spec_to_json(const PipelineSpec& spec);

struct BmodeOptions {
  std::string interpolation = "linear";
  std::string window = "rectangular";
  double f_number = 0.0;
  double range_db = 30.0;
  nlohmann::json grid = nlohmann::json::object();
};

// Beamforming -> AnalyticSignal -> AbsoluteValue -> DynamicAdjustment.
PipelineSpec bmode_pipeline(const BmodeOptions& options = {});

class PipelineGraph {
 public:
  struct Node {
    std::string name;
    std::unique_ptr<Operator> op;
    // Producer node index per input port; kGraphInput for "input".
    std::vector<std::size_t> inputs;
    PortType output_type = PortType::kObservation;
  };
  static constexpr std::size_t kGraphInput = static_cast<std::size_t>(-1);

  // Throws UnknownOperator, CycleDetected (nodes on the cycle) or
  // PortMismatch (edge, expected, found).
  static PipelineGraph build(const PipelineSpec& spec,
                             const OperatorRegistry& registry =
                                 OperatorRegistry::builtin());

  const std::vector<Node>& nodes() const noexcept { return nodes_; }
  const std::vector<std::size_t>& topological_order() const noexcept {
    return order_;
  }
  const std::vector<std::size_t>& outputs() const noexcept { return outputs_; }
  std::size_t index_of(std::string_view name) const;
  bool is_topological(std::span<const std::size_t> order) const;

 private:
  std::vector<Node> nodes_;
  std::vector<std::size_t> order_;
  std::vector<std::size_t> outputs_;
};

struct StageTiming {
  struct Entry {
    std::string name;
    std::string op;
    std::string stage;
    double ms = 0.0;
  };
  std::vector<Entry> nodes;
  double total_ms = 0.0;

  double fps() const { return total_ms > 0.0 ? 1000.0 / total_ms : 0.0; }
};

struct ExecutionResult {
  std::map<std::string, ValuePtr> outputs;
  StageTiming timing;
};

ExecutionResult execute(const PipelineGraph& graph, const AnyObservation& obs,
                        const ExecOptions& options = {});

// Runs nodes in the given order, which must be topological.
ExecutionResult execute_in_order(const PipelineGraph& graph,
                                 const AnyObservation& obs,
                                 std::span<const std::size_t> order,
                                 const ExecOptions& options = {});

struct BenchmarkOptions {
  std::size_t frames = 10;
  std::size_t warmup = 2;
  ExecOptions exec;
};

struct BenchmarkReport {
  std::string label;  // column header, e.g. "STAI"
  // Median ms/frame per stage, in first-execution order.
  std::vector<std::pair<std::string, double>> rows;
  std::vector<StageTiming::Entry> node_medians;
  double total_ms = 0.0;
  double fps = 0.0;
  std::size_t frames = 0;
  std::size_t warmup = 0;
  std::array<std::size_t, 3> input_shape{0, 0, 0};
  std::vector<std::size_t> output_shape;
  std::uint64_t output_digest = 0;
};

// Runs warmup + frames observations, discards the warmup, reports medians.
// Throws InsufficientFrames if frames == 0 or the environment runs dry.
BenchmarkReport benchmark(const PipelineGraph& graph, Environment& env,
                          const BenchmarkOptions& options);

// Table with one column per report; rows are the union of stage names.
std::string format_table(std::span<const BenchmarkReport> reports);
nlohmann::json to_records(std::span<const BenchmarkReport> reports);

}  // namespace sonoflow
