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

#include "sonoflow/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cstring>
#include <iomanip>
#include <queue>
#include <set>
#include <sstream>

#include "sonoflow/error.hpp"

namespace sonoflow {

using json = nlohmann::json;

std::string_view port_type_name(PortType t) {
  switch (t) {
    case PortType::kObservation: return "observation";
    case PortType::kRfImage: return "rf_image";
    case PortType::kComplexImage: return "complex_image";
    case PortType::kEnvelopeImage: return "envelope_image";
    case PortType::kDisplayImage: return "display_image";
    case PortType::kMoments: return "moments";
    case PortType::kHkMap: return "hk_map";
  }
  return "unknown";
}

PortType port_type_of(const Value& v) {
  return std::visit(
      [](const auto& x) -> PortType {
        using V = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<V, Observation<float>> ||
                      std::is_same_v<V, Observation<double>>) {
          return PortType::kObservation;
        } else if constexpr (std::is_same_v<V, ComplexImage<float>> ||
                             std::is_same_v<V, ComplexImage<double>>) {
          return PortType::kComplexImage;
        } else if constexpr (std::is_same_v<V, MomentMaps>) {
          return PortType::kMoments;
        } else if constexpr (std::is_same_v<V, HkMap>) {
          return PortType::kHkMap;
        } else {
          switch (x.stage) {
            case Stage::kRf: return PortType::kRfImage;
            case Stage::kEnvelope: return PortType::kEnvelopeImage;
            case Stage::kDisplay: return PortType::kDisplayImage;
            case Stage::kComplexAnalytic: return PortType::kComplexImage;
          }
          return PortType::kRfImage;
        }
      },
      v);
}

Value to_value(const AnyObservation& obs) {
  return std::visit([](const auto& o) -> Value { return o; }, obs);
}

namespace {

class Fnv1a {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      hash_ ^= b[i];
      hash_ *= 0x100000001b3ULL;
    }
  }
  template <typename T>
  void values(std::span<const T> v) {
    bytes(v.data(), v.size_bytes());
  }
  std::uint64_t value() const { return hash_; }

 private:
  std::uint64_t hash_ = 0xcbf29ce484222325ULL;
};

}  // namespace

std::uint64_t value_digest(const Value& v) {
  Fnv1a h;
  std::visit(
      [&](const auto& x) {
        using V = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<V, Observation<float>> ||
                      std::is_same_v<V, Observation<double>>) {
          h.values(x.frame->data.flat());
        } else if constexpr (std::is_same_v<V, MomentMaps>) {
          h.values(x.m1.flat());
          h.values(x.m2.flat());
          h.values(x.m3.flat());
        } else if constexpr (std::is_same_v<V, HkMap>) {
          for (const auto& p : x.values.flat()) {
            h.bytes(&p.u, sizeof p.u);
            h.bytes(&p.k, sizeof p.k);
          }
        } else {
          h.values(x.data.flat());
        }
      },
      v);
  return h.value();
}

void OperatorRegistry::add(std::string kind, OperatorFactory factory) {
  factories_[std::move(kind)] = std::move(factory);
}

bool OperatorRegistry::contains(std::string_view kind) const {
  return factories_.find(kind) != factories_.end();
}

std::unique_ptr<Operator> OperatorRegistry::create(const std::string& kind,
                                                   const json& params) const {
  auto it = factories_.find(kind);
  if (it == factories_.end())
    throw Error(Errc::kUnknownOperator, "unknown operator '" + kind + "'");
  return it->second(params);
}

std::vector<std::string> OperatorRegistry::kinds() const {
  std::vector<std::string> out;
  for (const auto& [k, f] : factories_) out.push_back(k);
  return out;
}

PipelineSpec parse_pipeline_spec(const json& j) {
  try {
    PipelineSpec spec;
    for (const auto& n : j.at("nodes")) {
      NodeSpec node;
      node.name = n.at("name").get<std::string>();
      node.op = n.at("op").get<std::string>();
      node.params = n.value("params", json::object());
      spec.nodes.push_back(std::move(node));
    }
    for (const auto& e : j.value("edges", json::array())) {
      EdgeSpec edge;
      if (e.is_array()) {
        edge.from = e.at(0).get<std::string>();
        edge.to = e.at(1).get<std::string>();
        if (e.size() > 2) edge.port = e.at(2).get<std::size_t>();
      } else {
        edge.from = e.at("from").get<std::string>();
        edge.to = e.at("to").get<std::string>();
        edge.port = e.value("port", std::size_t{0});
      }
      spec.edges.push_back(std::move(edge));
    }
    spec.outputs = j.value("outputs", std::vector<std::string>{});
    return spec;
  } catch (const json::exception& e) {
    throw Error::invalid_metadata("pipeline", e.what());
  }
}

json pipeline_spec_to_json(const PipelineSpec& spec) {
  json nodes = json::array();
  for (const auto& n : spec.nodes)
    nodes.push_back({{"name", n.name}, {"op", n.op}, {"params", n.params}});
  json edges = json::array();
  for (const auto& e : spec.edges)
    edges.push_back({{"from", e.from}, {"to", e.to}, {"port", e.port}});
  return {{"nodes", nodes}, {"edges", edges}, {"outputs", spec.outputs}};
}

PipelineSpec bmode_pipeline(const BmodeOptions& options) {
  PipelineSpec spec;
  json bf = {{"interpolation", options.interpolation},
             {"window", options.window},
             {"f_number", options.f_number}};
  if (!options.grid.empty()) bf["grid"] = options.grid;
  spec.nodes = {{"beamforming", "Beamforming", bf},
                {"analytic_signal", "AnalyticSignal", json::object()},
                {"absolute_value", "AbsoluteValue", json::object()},
                {"dynamic_adjustment", "DynamicAdjustment",
                 {{"range_db", options.range_db}}}};
  spec.edges = {{std::string(kInputNode), "beamforming", 0},
                {"beamforming", "analytic_signal", 0},
                {"analytic_signal", "absolute_value", 0},
                {"absolute_value", "dynamic_adjustment", 0}};
  spec.outputs = {"dynamic_adjustment"};
  return spec;
}

std::size_t PipelineGraph::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < nodes_.size(); ++i)
    if (nodes_[i].name == name) return i;
  throw Error::invalid_metadata("pipeline", "no node named '" +
                                                std::string(name) + "'");
}

namespace {

// Returns one cycle (as node indices) among the nodes Kahn's algorithm could
// not schedule.
std::vector<std::size_t> find_cycle(
    const std::vector<std::vector<std::size_t>>& succ,
    const std::vector<bool>& remaining) {
  const std::size_t n = succ.size();
  std::vector<int> state(n, 0);  // 0 new, 1 on stack, 2 done
  std::vector<std::size_t> stack;
  std::vector<std::size_t> cycle;
  std::function<bool(std::size_t)> dfs = [&](std::size_t u) {
    state[u] = 1;
    stack.push_back(u);
    for (std::size_t v : succ[u]) {
      if (!remaining[v]) continue;
      if (state[v] == 1) {
        auto it = std::find(stack.begin(), stack.end(), v);
        cycle.assign(it, stack.end());
        return true;
      }
      if (state[v] == 0 && dfs(v)) return true;
    }
    stack.pop_back();
    state[u] = 2;
    return false;
  };
  for (std::size_t u = 0; u < n; ++u)
    if (remaining[u] && state[u] == 0 && dfs(u)) break;
  return cycle;
}

}  // namespace

PipelineGraph PipelineGraph::build(const PipelineSpec& spec,
                                   const OperatorRegistry& registry) {
  PipelineGraph g;
  std::map<std::string, std::size_t, std::less<>> by_name;
  for (const auto& n : spec.nodes) {
    if (n.name.empty() || n.name == kInputNode)
      throw Error::invalid_metadata("pipeline.nodes",
                                    "invalid node name '" + n.name + "'");
    if (!by_name.emplace(n.name, g.nodes_.size()).second)
      throw Error::invalid_metadata("pipeline.nodes",
                                    "duplicate node name '" + n.name + "'");
    if (!registry.contains(n.op)) {
      Error e(Errc::kUnknownOperator,
              "node '" + n.name + "' uses unknown operator '" + n.op + "'");
      e.nodes = {n.name};
      throw e;
    }
    Node node;
    node.name = n.name;
    try {
      node.op = registry.create(n.op, n.params);
    } catch (const Error& err) {
      Error e(err.code(), "node '" + n.name + "': " + err.what());
      e.nodes = {n.name};
      throw e;
    }
    node.inputs.assign(node.op->arity(), kGraphInput - 1);
    g.nodes_.push_back(std::move(node));
  }
  if (g.nodes_.empty())
    throw Error::invalid_metadata("pipeline.nodes", "pipeline has no nodes");

  auto edge_text = [](const EdgeSpec& e) {
    return e.from + " -> " + e.to + "[" + std::to_string(e.port) + "]";
  };
  const std::size_t n = g.nodes_.size();
  std::vector<std::vector<std::size_t>> succ(n);
  std::vector<std::size_t> indegree(n, 0);
  for (const auto& e : spec.edges) {
    auto to = by_name.find(e.to);
    if (to == by_name.end())
      throw Error(Errc::kPortMismatch,
                  "edge " + edge_text(e) + ": unknown consumer node");
    std::size_t from = kGraphInput;
    if (e.from != kInputNode) {
      auto it = by_name.find(e.from);
      if (it == by_name.end())
        throw Error(Errc::kPortMismatch,
                    "edge " + edge_text(e) + ": unknown producer node");
      from = it->second;
    }
    Node& consumer = g.nodes_[to->second];
    if (e.port >= consumer.inputs.size())
      throw Error(Errc::kPortMismatch,
                  "edge " + edge_text(e) + ": operator has " +
                      std::to_string(consumer.inputs.size()) + " input port(s)");
    if (consumer.inputs[e.port] != kGraphInput - 1)
      throw Error(Errc::kPortMismatch,
                  "edge " + edge_text(e) + ": port already connected");
    consumer.inputs[e.port] = from;
    if (from != kGraphInput) {
      succ[from].push_back(to->second);
      ++indegree[to->second];
    }
  }
  for (const auto& node : g.nodes_)
    for (std::size_t p = 0; p < node.inputs.size(); ++p)
      if (node.inputs[p] == kGraphInput - 1)
        throw Error(Errc::kPortMismatch, "node '" + node.name + "' port " +
                                             std::to_string(p) +
                                             " has no incoming edge");

  // Kahn's algorithm, ties broken by declaration order.
  std::priority_queue<std::size_t, std::vector<std::size_t>, std::greater<>>
      ready;
  for (std::size_t i = 0; i < n; ++i)
    if (indegree[i] == 0) ready.push(i);
  while (!ready.empty()) {
    const std::size_t u = ready.top();
    ready.pop();
    g.order_.push_back(u);
    for (std::size_t v : succ[u])
      if (--indegree[v] == 0) ready.push(v);
  }
  if (g.order_.size() != n) {
    std::vector<bool> remaining(n, true);
    for (std::size_t u : g.order_) remaining[u] = false;
    const auto cycle = find_cycle(succ, remaining);
    std::vector<std::string> on_cycle;
    std::string names;
    for (std::size_t u : cycle) {
      on_cycle.push_back(g.nodes_[u].name);
      names += (names.empty() ? "" : " -> ") + g.nodes_[u].name;
    }
    Error e(Errc::kCycleDetected, "cycle " + names);
    e.nodes = std::move(on_cycle);
    throw e;
  }

  for (std::size_t u : g.order_) {
    Node& node = g.nodes_[u];
    std::vector<PortType> in_types;
    for (std::size_t src : node.inputs)
      in_types.push_back(src == kGraphInput ? PortType::kObservation
                                            : g.nodes_[src].output_type);
    const auto out = node.op->output_type(in_types);
    if (!out) {
      std::string found;
      for (std::size_t p = 0; p < in_types.size(); ++p)
        found += (p ? ", " : "") + std::string(port_type_name(in_types[p]));
      const std::size_t src = node.inputs.empty() ? kGraphInput : node.inputs[0];
      const std::string from =
          src == kGraphInput ? std::string(kInputNode) : g.nodes_[src].name;
      Error e(Errc::kPortMismatch, "edge " + from + " -> " + node.name +
                                       ": expected " +
                                       node.op->accepted_inputs() +
                                       ", found " + found);
      e.nodes = {from, node.name};
      throw e;
    }
    node.output_type = *out;
  }

  if (spec.outputs.empty()) {
    for (std::size_t i = 0; i < n; ++i)
      if (succ[i].empty()) g.outputs_.push_back(i);
  } else {
    for (const auto& name : spec.outputs) {
      auto it = by_name.find(name);
      if (it == by_name.end())
        throw Error::invalid_metadata("pipeline.outputs",
                                      "no node named '" + name + "'");
      g.outputs_.push_back(it->second);
    }
  }
  return g;
}

bool PipelineGraph::is_topological(std::span<const std::size_t> order) const {
  if (order.size() != nodes_.size()) return false;
  std::vector<std::size_t> position(nodes_.size(), nodes_.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (order[i] >= nodes_.size() || position[order[i]] != nodes_.size())
      return false;
    position[order[i]] = i;
  }
  for (std::size_t u = 0; u < nodes_.size(); ++u)
    for (std::size_t src : nodes_[u].inputs)
      if (src != kGraphInput && position[src] >= position[u]) return false;
  return true;
}

ExecutionResult execute_in_order(const PipelineGraph& graph,
                                 const AnyObservation& obs,
                                 std::span<const std::size_t> order,
                                 const ExecOptions& options) {
  using Clock = std::chrono::steady_clock;
  if (!graph.is_topological(order))
    throw Error::invalid_metadata("order", "not a topological order");
  const auto start = Clock::now();
  const auto input = std::make_shared<const Value>(to_value(obs));
  const auto& nodes = graph.nodes();
  std::vector<ValuePtr> values(nodes.size());
  ExecutionResult result;
  std::vector<ValuePtr> args;
  for (std::size_t u : order) {
    const auto& node = nodes[u];
    args.clear();
    for (std::size_t src : node.inputs)
      args.push_back(src == PipelineGraph::kGraphInput ? input : values[src]);
    const auto t0 = Clock::now();
    try {
      values[u] = node.op->run(args, options);
    } catch (const Error& err) {
      Error e(err.code(), "node '" + node.name + "': " + err.what());
      e.nodes = {node.name};
      e.axis = err.axis;
      e.offset = err.offset;
      e.field = err.field;
      throw e;
    } catch (const std::exception& err) {
      Error e(Errc::kNodeError, "node '" + node.name + "': " + err.what());
      e.nodes = {node.name};
      throw e;
    }
    const auto t1 = Clock::now();
    result.timing.nodes.push_back(
        {node.name, std::string(node.op->kind()), std::string(node.op->stage()),
         std::chrono::duration<double, std::milli>(t1 - t0).count()});
  }
  for (std::size_t u : graph.outputs()) result.outputs[nodes[u].name] = values[u];
  result.timing.total_ms =
      std::chrono::duration<double, std::milli>(Clock::now() - start).count();
  return result;
}

ExecutionResult execute(const PipelineGraph& graph, const AnyObservation& obs,
                        const ExecOptions& options) {
  return execute_in_order(graph, obs, graph.topological_order(), options);
}

namespace {

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 == 1 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

std::vector<std::size_t> shape_of(const Value& v) {
  return std::visit(
      [](const auto& x) -> std::vector<std::size_t> {
        using V = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<V, Observation<float>> ||
                      std::is_same_v<V, Observation<double>>) {
          const auto& s = x.frame->data.shape();
          return {s[0], s[1], s[2]};
        } else if constexpr (std::is_same_v<V, MomentMaps>) {
          return {x.m1.rows(), x.m1.cols()};
        } else if constexpr (std::is_same_v<V, HkMap>) {
          return {x.values.rows(), x.values.cols()};
        } else {
          return {x.data.rows(), x.data.cols()};
        }
      },
      v);
}

}  // namespace

BenchmarkReport benchmark(const PipelineGraph& graph, Environment& env,
                          const BenchmarkOptions& options) {
  if (options.frames == 0)
    throw Error(Errc::kInsufficientFrames, "benchmark needs >= 1 frame");
  BenchmarkReport report;
  report.frames = options.frames;
  report.warmup = options.warmup;

  std::vector<std::string> stage_order;
  std::map<std::string, std::vector<double>> stage_samples;
  std::vector<std::vector<double>> node_samples(graph.nodes().size());
  std::vector<double> totals;
  const std::size_t needed = options.warmup + options.frames;
  for (std::size_t i = 0; i < needed; ++i) {
    auto obs = env.next_observation();
    if (!obs)
      throw Error(Errc::kInsufficientFrames,
                  "environment ended after " + std::to_string(i) + " of " +
                      std::to_string(needed) + " frames");
    auto result = execute(graph, *obs, options.exec);
    if (i < options.warmup) continue;

    report.input_shape = observation_shape(*obs);
    report.label = std::visit(
        [](const auto& o) { return o.ctx->is_plane_wave() ? "PWI" : "STAI"; },
        *obs);
    const auto& first_out = graph.nodes()[graph.outputs().front()].name;
    const ValuePtr& out = result.outputs.at(first_out);
    report.output_shape = shape_of(*out);
    report.output_digest = value_digest(*out);

    std::map<std::string, double> per_stage;
    for (std::size_t k = 0; k < result.timing.nodes.size(); ++k) {
      const auto& entry = result.timing.nodes[k];
      if (!per_stage.count(entry.stage) &&
          std::find(stage_order.begin(), stage_order.end(), entry.stage) ==
              stage_order.end())
        stage_order.push_back(entry.stage);
      per_stage[entry.stage] += entry.ms;
      node_samples[graph.index_of(entry.name)].push_back(entry.ms);
    }
    for (const auto& [stage, ms] : per_stage) stage_samples[stage].push_back(ms);
    totals.push_back(result.timing.total_ms);
  }

  for (const auto& stage : stage_order)
    report.rows.emplace_back(stage, median(stage_samples[stage]));
  for (std::size_t u : graph.topological_order()) {
    const auto& node = graph.nodes()[u];
    report.node_medians.push_back({node.name, std::string(node.op->kind()),
                                   std::string(node.op->stage()),
                                   median(node_samples[u])});
  }
  report.total_ms = median(totals);
  report.fps = report.total_ms > 0.0 ? 1000.0 / report.total_ms : 0.0;
  return report;
}

std::string format_table(std::span<const BenchmarkReport> reports) {
  std::vector<std::string> rows;
  for (const auto& r : reports)
    for (const auto& [stage, ms] : r.rows)
      if (std::find(rows.begin(), rows.end(), stage) == rows.end())
        rows.push_back(stage);

  std::size_t label_width = std::string("Dynamic Adjustment").size();
  for (const auto& s : rows) label_width = std::max(label_width, s.size());
  std::ostringstream out;
  out << std::left << std::setw(static_cast<int>(label_width)) << "Step";
  for (const auto& r : reports) out << "  " << std::right << std::setw(18)
                                    << (r.label + " [ms/frame]");
  out << "\n";
  auto line = [&](const std::string& name, auto value_of) {
    out << std::left << std::setw(static_cast<int>(label_width)) << name;
    for (const auto& r : reports) {
      const auto v = value_of(r);
      out << "  " << std::right << std::setw(18);
      if (v)
        out << std::fixed << std::setprecision(3) << *v;
      else
        out << "-";
    }
    out << "\n";
  };
  for (const auto& stage : rows)
    line(stage, [&](const BenchmarkReport& r) -> std::optional<double> {
      for (const auto& [s, ms] : r.rows)
        if (s == stage) return ms;
      return std::nullopt;
    });
  line("Total", [](const BenchmarkReport& r) -> std::optional<double> {
    return r.total_ms;
  });
  line("FPS", [](const BenchmarkReport& r) -> std::optional<double> {
    return r.fps;
  });
  return out.str();
}

json to_records(std::span<const BenchmarkReport> reports) {
  json out = json::array();
  for (const auto& r : reports) {
    json rows = json::array();
    for (const auto& [stage, ms] : r.rows)
      rows.push_back({{"step", stage}, {"ms_per_frame", ms}});
    json nodes = json::array();
    for (const auto& n : r.node_medians)
      nodes.push_back({{"name", n.name}, {"op", n.op}, {"step", n.stage},
                       {"ms_per_frame", n.ms}});
    std::ostringstream digest;
    digest << std::hex << std::setw(16) << std::setfill('0') << r.output_digest;
    out.push_back({{"scheme", r.label},
                   {"rows", rows},
                   {"nodes", nodes},
                   {"total_ms_per_frame", r.total_ms},
                   {"fps", r.fps},
                   {"frames", r.frames},
                   {"warmup", r.warmup},
                   {"input_shape", r.input_shape},
                   {"output_shape", r.output_shape},
                   {"output_digest", digest.str()}});
  }
  return out;
}

}  // namespace sonoflow
