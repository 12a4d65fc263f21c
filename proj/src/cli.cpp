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

#include "sonoflow/cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>

#include "sonoflow/error.hpp"
#include "sonoflow/io.hpp"
#include "sonoflow/pipeline.hpp"
#include "sonoflow/presets.hpp"

namespace sonoflow {

namespace {

namespace fs = std::filesystem;

// Carries the file a failure relates to, so the diagnostic can name it.
struct PathError : std::runtime_error {
  PathError(const std::string& path, const std::string& what)
      : std::runtime_error(what.find(path) == std::string::npos
                               ? path + ": " + what
                               : what) {}
};

template <typename F>
auto with_path(const std::string& path, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const std::exception& e) {
    throw PathError(path, e.what());
  }
}

SampleType parse_dtype(const std::string& s) {
  return s == "f32" ? SampleType::kF32 : SampleType::kF64;
}

PipelineGraph load_pipeline(const std::string& arg) {
  if (arg == "bmode") return PipelineGraph::build(bmode_pipeline());
  return with_path(arg, [&] {
    return PipelineGraph::build(parse_pipeline_spec(read_json_file(arg)));
  });
}

struct SimulateArgs {
  std::string phantom, ctx, out, dtype = "f64";
  std::size_t frames = 1, samples = 2048;
  std::uint64_t seed = 0;
  double noise = 0.0;
};

int run_simulate(const SimulateArgs& a, std::ostream& out) {
  const Phantom phantom =
      with_path(a.phantom, [&] { return phantom_from_json(read_json_file(a.phantom)); });
  const AcquisitionContext ctx =
      with_path(a.ctx, [&] { return context_from_json(read_json_file(a.ctx)); });
  Environment::SimulatorOptions opts;
  opts.n_samples = a.samples;
  opts.sample_type = parse_dtype(a.dtype);
  opts.seed = a.seed;
  opts.noise_std = a.noise;
  opts.max_frames = a.frames;
  auto env = Environment::simulator(phantom, ctx, opts);

  auto collect = [&]<typename T>(std::vector<RfFrame<T>>& frames) {
    while (auto obs = env.next_observation())
      frames.push_back(*std::get<Observation<T>>(*obs).frame);
    with_path(a.out, [&] { write_wfrf(a.out, frames, ctx); });
    return frames.size();
  };
  std::size_t n = 0;
  if (opts.sample_type == SampleType::kF32) {
    std::vector<RfFrame<float>> frames;
    n = collect(frames);
  } else {
    std::vector<RfFrame<double>> frames;
    n = collect(frames);
  }
  out << "wrote " << n << " frame(s) to " << a.out << "\n";
  return 0;
}

struct ReconstructArgs {
  std::string in, pipeline = "bmode", out_dir;
  unsigned threads = 0;
};

int run_reconstruct(const ReconstructArgs& a, std::ostream& out) {
  auto env = with_path(a.in, [&] { return Environment::open_dataset(a.in); });
  const PipelineGraph graph = load_pipeline(a.pipeline);
  std::vector<std::string> display_nodes;
  for (std::size_t u : graph.outputs())
    if (graph.nodes()[u].output_type == PortType::kDisplayImage)
      display_nodes.push_back(graph.nodes()[u].name);
  if (display_nodes.empty())
    throw PathError(a.pipeline, "pipeline has no display-image output");
  with_path(a.out_dir, [&] { fs::create_directories(a.out_dir); });

  std::size_t written = 0;
  while (true) {
    auto obs = with_path(a.in, [&] { return env.next_observation(); });
    if (!obs) break;
    const auto result = execute(graph, *obs, ExecOptions{a.threads});
    const std::size_t index = observation_index(*obs);
    for (const auto& name : display_nodes) {
      char stem[32];
      std::snprintf(stem, sizeof stem, "frame_%05zu.pgm", index);
      const fs::path path =
          fs::path(a.out_dir) /
          (display_nodes.size() == 1 ? std::string(stem) : name + "_" + stem);
      with_path(path.string(), [&] {
        std::visit(
            [&](const auto& v) {
              using V = std::decay_t<decltype(v)>;
              if constexpr (std::is_same_v<V, Image<float>> ||
                            std::is_same_v<V, Image<double>>)
                write_pgm(v, path);
            },
            *result.outputs.at(name));
      });
      ++written;
    }
  }
  out << "wrote " << written << " image(s) to " << a.out_dir << "\n";
  return 0;
}

struct BenchmarkArgs {
  std::vector<std::string> inputs, presets;
  std::string pipeline = "bmode", format = "table", dtype = "f32";
  std::size_t frames = 10, warmup = 2;
  unsigned threads = 0;
  std::uint64_t seed = 0;
  double noise = 0.0;
};

int run_benchmark(const BenchmarkArgs& a, std::ostream& out) {
  const PipelineGraph graph = load_pipeline(a.pipeline);
  BenchmarkOptions opts;
  opts.frames = a.frames;
  opts.warmup = a.warmup;
  opts.exec.threads = a.threads;
  std::vector<BenchmarkReport> reports;
  for (const auto& preset_name : a.presets) {
    const Preset preset = make_preset(preset_name, a.seed);
    Environment::SimulatorOptions sim;
    sim.n_samples = preset.n_samples;
    sim.sample_type = parse_dtype(a.dtype);
    sim.seed = a.seed;
    sim.noise_std = a.noise;
    auto env = Environment::simulator(preset.phantom, preset.ctx, sim);
    reports.push_back(benchmark(graph, env, opts));
  }
  for (const auto& path : a.inputs) {
    auto env = with_path(path, [&] { return Environment::open_dataset(path); });
    reports.push_back(with_path(path, [&] { return benchmark(graph, env, opts); }));
  }
  if (a.format == "records")
    out << to_records(reports).dump(2) << "\n";
  else
    out << format_table(reports);
  return 0;
}

}  // namespace

int cli_main(const std::vector<std::string>& args, std::ostream& out,
             std::ostream& err) {
  CLI::App app{"Ultrasound RF reconstruction pipelines", "sonoflow"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Simulate RF frames into a WFRF file");
  simulate->add_option("--phantom", sim.phantom, "Phantom spec (JSON)")->required();
  simulate->add_option("--ctx", sim.ctx, "Acquisition context spec (JSON)")->required();
  simulate->add_option("--out", sim.out, "Output WFRF path")->required();
  simulate->add_option("--frames", sim.frames, "Number of frames")
      ->check(CLI::PositiveNumber);
  simulate->add_option("--samples", sim.samples, "Samples per channel")
      ->check(CLI::PositiveNumber);
  simulate->add_option("--seed", sim.seed, "Noise seed");
  simulate->add_option("--noise", sim.noise, "Additive noise std")
      ->check(CLI::NonNegativeNumber);
  simulate->add_option("--dtype", sim.dtype, "Sample type")
      ->check(CLI::IsMember({"f32", "f64"}));

  ReconstructArgs rec;
  auto* reconstruct =
      app.add_subcommand("reconstruct", "Run a pipeline and write one PGM per frame");
  reconstruct->add_option("--in", rec.in, "Input WFRF path")->required();
  reconstruct->add_option("--pipeline", rec.pipeline,
                          "Pipeline spec (JSON) or 'bmode'");
  reconstruct->add_option("--out-dir", rec.out_dir, "Output directory")->required();
  reconstruct->add_option("--threads", rec.threads, "Worker threads (0 = all)");

  BenchmarkArgs bench;
  auto* benchmark_cmd =
      app.add_subcommand("benchmark", "Per-stage timing report");
  auto* in_opt = benchmark_cmd->add_option("--in", bench.inputs, "Input WFRF path(s)");
  auto* syn_opt = benchmark_cmd
                      ->add_option("--synthetic", bench.presets,
                                   "Synthetic preset(s): sta-paper, pwi-paper")
                      ->check(CLI::IsMember(preset_names()));
  benchmark_cmd->add_option("--pipeline", bench.pipeline,
                            "Pipeline spec (JSON) or 'bmode'");
  benchmark_cmd->add_option("--frames", bench.frames, "Timed frames")
      ->check(CLI::PositiveNumber);
  benchmark_cmd->add_option("--warmup", bench.warmup, "Discarded warmup frames");
  benchmark_cmd->add_option("--format", bench.format, "table or records")
      ->check(CLI::IsMember({"table", "records"}));
  benchmark_cmd->add_option("--dtype", bench.dtype, "Synthetic sample type")
      ->check(CLI::IsMember({"f32", "f64"}));
  benchmark_cmd->add_option("--threads", bench.threads, "Worker threads (0 = all)");
  benchmark_cmd->add_option("--seed", bench.seed, "Synthetic phantom and noise seed");
  benchmark_cmd->add_option("--noise", bench.noise, "Synthetic additive noise std")
      ->check(CLI::NonNegativeNumber);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  if (!reversed.empty()) reversed.pop_back();  // program name
  try {
    app.parse(reversed);
    if (benchmark_cmd->parsed() && in_opt->count() + syn_opt->count() == 0)
      throw CLI::RequiredError("benchmark needs --in or --synthetic");
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "sonoflow: usage: " << e.what() << "\n";
    return 2;
  }

  try {
    if (simulate->parsed()) return run_simulate(sim, out);
    if (reconstruct->parsed()) return run_reconstruct(rec, out);
    return run_benchmark(bench, out);
  } catch (const std::exception& e) {
    std::string msg = e.what();
    for (char& c : msg)
      if (c == '\n') c = ' ';
    err << "sonoflow: error: " << msg << "\n";
    return 1;
  }
}

int cli_main(int argc, char** argv) {
  return cli_main(std::vector<std::string>(argv, argv + argc), std::cout,
                  std::cerr);
}

}  // namespace sonoflow
