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

#include <doctest.h>

#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "sonoflow/cli.hpp"
#include "sonoflow/io.hpp"
#include "sonoflow/pipeline.hpp"
#include "sonoflow/presets.hpp"
#include "test_util.hpp"

using namespace sonoflow;
using json = nlohmann::json;
using sonoflow::testing::error_of;
using sonoflow::testing::pw_context;
using sonoflow::testing::random_frame;
using sonoflow::testing::sta_context;
using sonoflow::testing::temp_dir;

namespace {

std::vector<unsigned char> slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

struct CliRun {
  int status;
  std::string out, err;
};

CliRun run(std::vector<std::string> args) {
  args.insert(args.begin(), "sonoflow");
  std::ostringstream out, err;
  const int status = cli_main(args, out, err);
  return {status, out.str(), err.str()};
}

void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream(p) << text;
}

template <typename T>
void round_trip(const AcquisitionContext& ctx) {
  const auto dir = temp_dir("wfrf");
  std::mt19937_64 rng(5);
  std::vector<RfFrame<T>> frames;
  for (int i = 0; i < 3; ++i)
    frames.push_back(random_frame<T>(ctx.n_tx(), ctx.rx_channel_map.empty()
                                                     ? ctx.n_elements
                                                     : ctx.rx_channel_map[0].size(),
                                     40, rng));
  frames[1].data(0, 0, 0) = static_cast<T>(-0.0);
  write_wfrf(dir / "f.wfrf", frames, ctx);
  auto env = Environment::open_dataset(dir / "f.wfrf");
  for (const auto& f : frames) {
    auto obs = env.next_observation();
    REQUIRE(obs);
    const auto& got = *std::get<Observation<T>>(*obs).frame;
    REQUIRE(got.data.size() == f.data.size());
    CHECK(std::memcmp(got.data.flat().data(), f.data.flat().data(),
                      f.data.size() * sizeof(T)) == 0);
    CHECK(context_to_json(*std::get<Observation<T>>(*obs).ctx) == context_to_json(ctx));
  }
  CHECK(!env.next_observation());
  std::filesystem::remove_all(dir);
}

}  // namespace

TEST_CASE("WFRF round trip is bitwise for f32 and f64") {
  auto sta = sta_context(6);
  sta.rx_channel_map = centered_rx_aperture(sta, 4);
  sta.time_zero = std::vector<double>(6, 1.25e-7);
  round_trip<float>(sta);
  round_trip<double>(sta);
  round_trip<double>(pw_context(5, {-0.1, 0.0, 0.123456789}));
}

TEST_CASE("WFRF header layout") {
  const auto dir = temp_dir("wfrf-layout");
  const auto ctx = sta_context(2);
  RfFrame<float> f{Array3<float>(2, 2, 3)};
  f.data(0, 0, 0) = 1.0f;
  write_wfrf(dir / "f.wfrf", std::vector<RfFrame<float>>{f}, ctx);
  const auto bytes = slurp(dir / "f.wfrf");
  REQUIRE(bytes.size() > 16);
  CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "WFRF");
  CHECK(bytes[4] == 1);
  CHECK(bytes[5] == 0);
  CHECK(bytes[8] == 1);
  const std::uint32_t meta_len = bytes[12] | (bytes[13] << 8) | (bytes[14] << 16) |
                                 (std::uint32_t(bytes[15]) << 24);
  const auto meta = json::parse(bytes.begin() + 16, bytes.begin() + 16 + meta_len);
  CHECK(meta.at("dtype") == "f32");
  CHECK(meta.at("shape") == json::array({2, 2, 3}));
  CHECK(bytes.size() == 16 + meta_len + 2 * 2 * 3 * 4);
  // 1.0f little-endian.
  const std::size_t p = 16 + meta_len;
  CHECK(bytes[p] == 0x00);
  CHECK(bytes[p + 3] == 0x3f);
  CHECK(bytes[p + 2] == 0x80);
  std::filesystem::remove_all(dir);
}

TEST_CASE("WFRF writer validates before touching the file") {
  const auto dir = temp_dir("wfrf-bad");
  const auto ctx = sta_context(2);
  std::vector<RfFrame<double>> frames{RfFrame<double>{Array3<double>(2, 2, 8)},
                                      RfFrame<double>{Array3<double>(2, 2, 9)}};
  auto e = error_of([&] { write_wfrf(dir / "x.wfrf", frames, ctx); });
  REQUIRE(e);
  CHECK(e->code() == Errc::kDimensionMismatch);
  CHECK(!std::filesystem::exists(dir / "x.wfrf"));

  std::vector<RfFrame<double>> mismatched{RfFrame<double>{Array3<double>(3, 2, 8)}};
  CHECK(error_of([&] { write_wfrf(dir / "y.wfrf", mismatched, ctx); }));
  CHECK(!std::filesystem::exists(dir / "y.wfrf"));

  write_wfrf(dir / "empty.wfrf", std::vector<RfFrame<double>>{}, ctx);
  const auto bytes = slurp(dir / "empty.wfrf");
  CHECK(bytes[8] == 0);
  CHECK(!Environment::open_dataset(dir / "empty.wfrf").next_observation());

  CHECK(error_of([&] { write_wfrf(dir / "no" / "such" / "dir.wfrf",
                                  std::vector<RfFrame<double>>{}, ctx); })
            ->code() == Errc::kIoError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("WFRF reader rejects bad headers") {
  const auto dir = temp_dir("wfrf-hdr");
  const auto ctx = sta_context(2);
  write_wfrf(dir / "ok.wfrf", std::vector<RfFrame<double>>{RfFrame<double>{Array3<double>(2, 2, 4)}},
             ctx);
  auto bytes = slurp(dir / "ok.wfrf");
  auto write_bytes = [&](const std::vector<unsigned char>& b) {
    std::ofstream out(dir / "x.wfrf", std::ios::binary);
    out.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
  };
  auto open_error = [&] {
    return error_of([&] { (void)Environment::open_dataset(dir / "x.wfrf"); });
  };

  auto v = bytes;
  v[4] = 2;
  write_bytes(v);
  auto e = open_error();
  REQUIRE(e);
  CHECK(e->code() == Errc::kFormatError);
  CHECK(e->offset == 4u);

  write_bytes({bytes.begin(), bytes.begin() + 20});
  e = open_error();
  REQUIRE(e);
  CHECK(e->code() == Errc::kFormatError);

  write_bytes({bytes.begin(), bytes.begin() + 2});
  CHECK(open_error()->code() == Errc::kFormatError);

  v = bytes;
  v[17] = '!';  // corrupt the JSON
  write_bytes(v);
  CHECK(open_error()->code() == Errc::kFormatError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("PGM encoding") {
  Image<double> one{Array2<double>(1, 1, 1.0), Stage::kDisplay, {}};
  auto bytes = encode_pgm(one);
  const std::string header = "P5\n1 1\n255\n";
  REQUIRE(bytes.size() == header.size() + 1);
  CHECK(std::string(bytes.begin(), bytes.begin() + header.size()) == header);
  CHECK(bytes.back() == 255);

  Image<float> two{Array2<float>(1, 2), Stage::kDisplay, {}};
  two.data(0, 1) = 0.5f;
  bytes = encode_pgm(two);
  CHECK(std::vector<std::uint8_t>(bytes.end() - 2, bytes.end()) ==
        std::vector<std::uint8_t>{0, 128});

  Image<double> three{Array2<double>(1, 3), Stage::kDisplay, {}};
  three.data(0, 1) = 0.5;
  three.data(0, 2) = 1.0;
  const auto dir = temp_dir("pgm");
  write_pgm(three, dir / "a.pgm");
  const auto file = slurp(dir / "a.pgm");
  CHECK(std::string(file.begin(), file.begin() + 11) == "P5\n3 1\n255\n");
  CHECK(std::vector<unsigned char>(file.end() - 3, file.end()) ==
        std::vector<unsigned char>{0, 128, 255});

  Image<double> tall{Array2<double>(3, 2, 0.25), Stage::kDisplay, {}};
  bytes = encode_pgm(tall);
  CHECK(std::string(bytes.begin(), bytes.begin() + 11) == "P5\n2 3\n255\n");
  CHECK(bytes.size() == 11 + 6);
  CHECK(bytes.back() == 64);

  Image<double> env{Array2<double>(1, 1, 1.0), Stage::kEnvelope, {}};
  CHECK(error_of([&] { (void)encode_pgm(env); })->code() == Errc::kWrongStage);
  CHECK(error_of([&] { write_pgm(env, dir / "b.pgm"); })->code() == Errc::kWrongStage);
  CHECK(!std::filesystem::exists(dir / "b.pgm"));
  std::filesystem::remove_all(dir);
}

TEST_CASE("context and phantom JSON") {
  const auto ctx = context_from_json(json::parse(R"({
    "speed_of_sound": 1500, "sampling_frequency": 20e6, "n_elements": 8, "pitch": 2e-4,
    "tx": {"scheme": "pw", "angles_deg": [-5, 0, 5]}, "time_zero": [0, 1e-7, 2e-7]
  })"));
  CHECK(ctx.is_plane_wave());
  CHECK(ctx.n_tx() == 3);
  CHECK(std::get<PlaneWaveTransmit>(ctx.tx).angles[2] ==
        doctest::Approx(5 * std::numbers::pi / 180));
  CHECK(context_from_json(context_to_json(ctx)).time_zero == ctx.time_zero);

  const auto sta = context_from_json(json::parse(R"({
    "n_elements": 16, "tx": {"scheme": "sta", "elements": "all"}, "rx_aperture": 8
  })"));
  CHECK(sta.n_tx() == 16);
  CHECK(sta.rx_channel_map == centered_rx_aperture(sta, 8));

  auto e = error_of([] { (void)context_from_json(json::parse(R"({"tx": {"scheme": "sta"}})")); });
  REQUIRE(e);
  CHECK(e->code() == Errc::kInvalidMetadata);
  e = error_of([] {
    (void)context_from_json(json::parse(R"({"n_elements": 2, "tx": {"scheme": "fan"}})"));
  });
  REQUIRE(e);
  CHECK(e->field == "tx.scheme");

  const auto ph = phantom_from_json(json::parse(R"({
    "pulse": {"center_frequency": 3e6, "n_cycles": 4},
    "scatterers": [[0, 0.01], {"x": 1e-3, "z": 0.02, "amplitude": 0.5}]
  })"));
  REQUIRE(ph.scatterers.size() == 2);
  CHECK(ph.scatterers[0].amplitude == 1.0);
  CHECK(ph.scatterers[1].amplitude == 0.5);
  CHECK(ph.pulse.n_cycles == 4u);
  CHECK(phantom_to_json(phantom_from_json(phantom_to_json(ph))) == phantom_to_json(ph));
  CHECK(error_of([] { (void)phantom_from_json(json::parse(R"({"scatterers": [[0, -1]]})")); })
            ->code() == Errc::kInvalidMetadata);
}

TEST_CASE("presets carry the full-size acquisition shapes") {
  const auto sta = make_preset("sta-paper", 1);
  CHECK(sta.ctx.n_tx() == 128);
  CHECK(sta.ctx.rx_channel_map.size() == 128);
  CHECK(sta.ctx.rx_channel_map[0].size() == 64);
  CHECK(sta.n_samples == 2048);
  const auto pwi = make_preset("pwi-paper", 1);
  CHECK(pwi.ctx.n_tx() == 11);
  CHECK(pwi.ctx.n_elements == 192);
  CHECK(pwi.ctx.rx_channel_map.empty());
  CHECK(default_plane_wave_angles().front() == doctest::Approx(-10 * std::numbers::pi / 180));
  CHECK(make_preset("sta-paper", 1).phantom.scatterers.size() ==
        sta.phantom.scatterers.size());
  CHECK(make_preset("sta-paper", 2).phantom.scatterers[20].x != sta.phantom.scatterers[20].x);
  CHECK(error_of([] { (void)make_preset("cardiac"); })->code() == Errc::kInvalidMetadata);
}

TEST_CASE("CLI simulate, reconstruct and benchmark") {
  const auto dir = temp_dir("cli");
  write_text(dir / "ctx.json",
             R"({"n_elements": 16, "pitch": 3e-4, "tx": {"scheme": "sta", "elements": "all"}})");
  write_text(dir / "phantom.json", R"({"scatterers": [[0, 0.004, 1.0], [1e-3, 0.006, 0.5]]})");
  const auto wfrf = (dir / "sim.wfrf").string();

  auto r = run({"simulate", "--phantom", (dir / "phantom.json").string(), "--ctx",
                (dir / "ctx.json").string(), "--out", wfrf, "--frames", "3", "--samples",
                "400", "--dtype", "f32", "--noise", "0.01", "--seed", "4"});
  CHECK(r.status == 0);
  CHECK(r.err.empty());
  auto env = Environment::open_dataset(wfrf);
  auto obs = env.next_observation();
  REQUIRE(obs);
  CHECK(observation_shape(*obs) == std::array<std::size_t, 3>{16, 16, 400});

  r = run({"reconstruct", "--in", wfrf, "--pipeline", "bmode", "--out-dir",
           (dir / "out").string(), "--threads", "2"});
  CHECK(r.status == 0);
  for (const char* name : {"frame_00000.pgm", "frame_00001.pgm", "frame_00002.pgm"}) {
    const auto bytes = slurp(dir / "out" / name);
    const std::string header = "P5\n16 400\n255\n";
    REQUIRE(bytes.size() == header.size() + 16 * 400);
    CHECK(std::string(bytes.begin(), bytes.begin() + header.size()) == header);
  }

  write_text(dir / "pipe.json", pipeline_spec_to_json(bmode_pipeline()).dump());
  r = run({"benchmark", "--in", wfrf, "--pipeline", (dir / "pipe.json").string(),
           "--frames", "2", "--warmup", "1"});
  CHECK(r.status == 0);
  CHECK(r.out.find("Envelope Detection") != std::string::npos);
  CHECK(r.out.find("STAI") != std::string::npos);

  r = run({"benchmark", "--in", wfrf, "--frames", "2", "--warmup", "1", "--format",
           "records"});
  REQUIRE(r.status == 0);
  const auto records = json::parse(r.out);
  CHECK(records[0].at("input_shape") == json::array({16, 16, 400}));
  CHECK(records[0].at("output_shape") == json::array({400, 16}));

  r = run({"benchmark", "--in", wfrf, "--frames", "5", "--warmup", "1"});
  CHECK(r.status == 1);
  CHECK(r.err.find("InsufficientFrames") != std::string::npos);
  std::filesystem::remove_all(dir);
}

TEST_CASE("CLI failures") {
  const auto dir = temp_dir("cli-err");
  const auto missing = (dir / "missing.wfrf").string();
  auto r = run({"reconstruct", "--in", missing, "--out-dir", (dir / "o").string()});
  CHECK(r.status == 1);
  CHECK(r.err.find(missing) != std::string::npos);
  CHECK(std::count(r.err.begin(), r.err.end(), '\n') == 1);
  CHECK(r.out.empty());

  CHECK(run({}).status == 2);
  CHECK(run({"frobnicate"}).status == 2);
  CHECK(run({"reconstruct", "--in", missing}).status == 2);
  CHECK(run({"benchmark", "--frames", "2"}).status == 2);
  CHECK(run({"benchmark", "--synthetic", "cardiac"}).status == 2);
  CHECK(run({"benchmark", "--synthetic", "sta-paper", "--format", "xml"}).status == 2);

  write_text(dir / "pipe.json", R"({"nodes": [{"name": "a", "op": "Nope"}], "edges": [["input", "a"]]})");
  const auto ctx = sta_context(2);
  write_wfrf(dir / "f.wfrf", std::vector<RfFrame<double>>{RfFrame<double>{Array3<double>(2, 2, 4)}},
             ctx);
  r = run({"reconstruct", "--in", (dir / "f.wfrf").string(), "--pipeline",
           (dir / "pipe.json").string(), "--out-dir", (dir / "o").string()});
  CHECK(r.status == 1);
  CHECK(r.err.find("pipe.json") != std::string::npos);
  CHECK(r.err.find("UnknownOperator") != std::string::npos);
  std::filesystem::remove_all(dir);
}
