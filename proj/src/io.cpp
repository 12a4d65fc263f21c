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

#include "sonoflow/io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <numbers>
#include <sstream>

#include "sonoflow/error.hpp"

namespace sonoflow {

namespace {

template <typename U>
void put_le(std::vector<char>& out, U value) {
  for (std::size_t b = 0; b < sizeof(U); ++b)
    out.push_back(static_cast<char>((value >> (8 * b)) & 0xFF));
}

template <typename U>
U get_le(const unsigned char* p) {
  U v = 0;
  for (std::size_t b = 0; b < sizeof(U); ++b)
    v |= static_cast<U>(p[b]) << (8 * b);
  return v;
}

template <typename T>
using BitsOf = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;

template <typename T>
constexpr std::string_view dtype_name() {
  return sizeof(T) == 4 ? "f32" : "f64";
}

}  // namespace

std::size_t WfrfHeader::frame_bytes() const {
  const std::size_t width = sample_type == SampleType::kF32 ? 4 : 8;
  return shape[0] * shape[1] * shape[2] * width;
}

template <typename T>
void write_wfrf(const std::filesystem::path& path,
                const std::vector<RfFrame<T>>& frames,
                const AcquisitionContext& ctx) {
  ctx.validate();
  std::array<std::size_t, 3> shape{ctx.n_tx(), 0, 0};
  if (!frames.empty()) {
    shape = frames.front().data.shape();
    for (std::size_t i = 0; i < frames.size(); ++i) {
      const auto& s = frames[i].data.shape();
      for (std::size_t axis = 0; axis < 3; ++axis)
        if (s[axis] != shape[axis])
          throw Error::dimension_mismatch(
              axis, "frame " + std::to_string(i) + " differs from frame 0");
      validate_pair(frames[i], ctx);
    }
  }
  nlohmann::json meta = {{"dtype", dtype_name<T>()},
                         {"shape", shape},
                         {"context", context_to_json(ctx)}};
  const std::string text = meta.dump();

  std::vector<char> header;
  header.insert(header.end(), {'W', 'F', 'R', 'F'});
  put_le<std::uint32_t>(header, kWfrfVersion);
  put_le<std::uint32_t>(header, static_cast<std::uint32_t>(frames.size()));
  put_le<std::uint32_t>(header, static_cast<std::uint32_t>(text.size()));
  header.insert(header.end(), text.begin(), text.end());

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::kIoError, "cannot write " + path.string());
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  std::vector<char> payload;
  for (const auto& f : frames) {
    payload.clear();
    payload.reserve(f.data.size() * sizeof(T));
    for (T v : f.data.flat()) put_le(payload, std::bit_cast<BitsOf<T>>(v));
    out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  }
  if (!out) throw Error(Errc::kIoError, "write failed: " + path.string());
}

WfrfHeader read_wfrf_header(std::istream& in, std::uintmax_t file_size) {
  unsigned char fixed[kWfrfHeaderBytes];
  in.read(reinterpret_cast<char*>(fixed), kWfrfHeaderBytes);
  const auto got = static_cast<std::size_t>(in.gcount());
  if (got < 4) throw Error::format_error(got, "truncated magic");
  if (std::memcmp(fixed, "WFRF", 4) != 0) throw Error::format_error(0, "bad magic");
  if (got < kWfrfHeaderBytes) throw Error::format_error(got, "truncated header");

  WfrfHeader h;
  h.version = get_le<std::uint32_t>(fixed + 4);
  if (h.version != kWfrfVersion)
    throw Error::format_error(4, "unsupported version " +
                                     std::to_string(h.version));
  h.frame_count = get_le<std::uint32_t>(fixed + 8);
  const std::uint32_t meta_len = get_le<std::uint32_t>(fixed + 12);
  if (kWfrfHeaderBytes + std::uintmax_t{meta_len} > file_size)
    throw Error::format_error(static_cast<std::size_t>(file_size),
                              "truncated metadata");
  std::string text(meta_len, '\0');
  in.read(text.data(), meta_len);
  if (static_cast<std::size_t>(in.gcount()) != meta_len)
    throw Error::format_error(kWfrfHeaderBytes + in.gcount(),
                              "truncated metadata");

  try {
    const auto meta = nlohmann::json::parse(text);
    const auto dtype = meta.at("dtype").get<std::string>();
    if (dtype == "f32")
      h.sample_type = SampleType::kF32;
    else if (dtype == "f64")
      h.sample_type = SampleType::kF64;
    else
      throw Error::format_error(kWfrfHeaderBytes, "unknown dtype " + dtype);
    h.shape = meta.at("shape").get<std::array<std::size_t, 3>>();
    h.ctx = context_from_json(meta.at("context"));
  } catch (const nlohmann::json::exception& e) {
    throw Error::format_error(kWfrfHeaderBytes,
                              std::string("bad metadata: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == Errc::kFormatError) throw;
    throw Error::format_error(kWfrfHeaderBytes,
                              std::string("bad metadata: ") + e.what());
  }
  if (h.frame_count > 0) {
    for (std::size_t axis = 0; axis < 3; ++axis)
      if (h.shape[axis] == 0)
        throw Error::format_error(kWfrfHeaderBytes, "zero frame dimension");
    if (h.shape[0] != h.ctx.n_tx())
      throw Error::format_error(kWfrfHeaderBytes,
                                "shape disagrees with transmit scheme");
  }
  h.payload_offset = kWfrfHeaderBytes + meta_len;
  const std::size_t frame_bytes = h.frame_bytes();
  for (std::size_t i = 0; i < h.frame_count; ++i) {
    const std::uintmax_t start = h.payload_offset + i * frame_bytes;
    if (start + frame_bytes > file_size)
      throw Error::format_error(
          static_cast<std::size_t>(std::min<std::uintmax_t>(start, file_size)),
          "truncated payload in frame " + std::to_string(i));
  }
  return h;
}

template <typename T>
RfFrame<T> read_wfrf_frame(std::istream& in, const WfrfHeader& header) {
  const std::size_t offset = static_cast<std::size_t>(in.tellg());
  std::vector<unsigned char> raw(header.frame_bytes());
  in.read(reinterpret_cast<char*>(raw.data()),
          static_cast<std::streamsize>(raw.size()));
  if (static_cast<std::size_t>(in.gcount()) != raw.size())
    throw Error::format_error(offset + static_cast<std::size_t>(in.gcount()),
                              "truncated payload");
  RfFrame<T> frame{Array3<T>(header.shape[0], header.shape[1], header.shape[2])};
  auto dst = frame.data.flat();
  for (std::size_t i = 0; i < dst.size(); ++i)
    dst[i] = std::bit_cast<T>(get_le<BitsOf<T>>(raw.data() + i * sizeof(T)));
  return frame;
}

template <typename T>
std::vector<std::uint8_t> encode_pgm(const Image<T>& img) {
  if (img.stage != Stage::kDisplay)
    throw Error(Errc::kWrongStage, "PGM needs a display-stage image, got " +
                                       std::string(stage_name(img.stage)));
  const std::string head = "P5\n" + std::to_string(img.data.cols()) + " " +
                           std::to_string(img.data.rows()) + "\n255\n";
  std::vector<std::uint8_t> out(head.begin(), head.end());
  out.reserve(head.size() + img.data.size());
  for (T v : img.data.flat()) {
    const double clamped = std::clamp(static_cast<double>(v), 0.0, 1.0);
    out.push_back(static_cast<std::uint8_t>(std::floor(clamped * 255.0 + 0.5)));
  }
  return out;
}

template <typename T>
void write_pgm(const Image<T>& img, const std::filesystem::path& path) {
  const auto bytes = encode_pgm(img);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::kIoError, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(Errc::kIoError, "write failed: " + path.string());
}

nlohmann::json context_to_json(const AcquisitionContext& ctx) {
  nlohmann::json j = {{"speed_of_sound", ctx.speed_of_sound},
                      {"sampling_frequency", ctx.sampling_frequency},
                      {"n_elements", ctx.n_elements},
                      {"pitch", ctx.pitch}};
  if (const auto* sta = std::get_if<StaTransmit>(&ctx.tx))
    j["tx"] = {{"scheme", "sta"}, {"elements", sta->tx_elements}};
  else
    j["tx"] = {{"scheme", "pw"},
               {"angles_rad", std::get<PlaneWaveTransmit>(ctx.tx).angles}};
  if (!ctx.rx_channel_map.empty()) j["rx_channel_map"] = ctx.rx_channel_map;
  if (!ctx.time_zero.empty()) j["time_zero"] = ctx.time_zero;
  return j;
}

AcquisitionContext context_from_json(const nlohmann::json& j) {
  try {
    AcquisitionContext ctx;
    ctx.speed_of_sound = j.value("speed_of_sound", ctx.speed_of_sound);
    ctx.sampling_frequency =
        j.value("sampling_frequency", ctx.sampling_frequency);
    ctx.n_elements = j.at("n_elements").get<std::size_t>();
    ctx.pitch = j.value("pitch", ctx.pitch);
    const auto& tx = j.at("tx");
    const auto scheme = tx.at("scheme").get<std::string>();
    if (scheme == "sta") {
      StaTransmit sta;
      if (!tx.contains("elements") || tx.at("elements") == "all") {
        for (std::size_t i = 0; i < ctx.n_elements; ++i)
          sta.tx_elements.push_back(i);
      } else {
        sta.tx_elements = tx.at("elements").get<std::vector<std::size_t>>();
      }
      ctx.tx = std::move(sta);
    } else if (scheme == "pw") {
      PlaneWaveTransmit pw;
      if (tx.contains("angles_rad")) {
        pw.angles = tx.at("angles_rad").get<std::vector<double>>();
      } else {
        for (double deg : tx.at("angles_deg").get<std::vector<double>>())
          pw.angles.push_back(deg * std::numbers::pi / 180.0);
      }
      ctx.tx = std::move(pw);
    } else {
      throw Error::invalid_metadata("tx.scheme", "expected sta or pw");
    }
    if (j.contains("rx_channel_map"))
      ctx.rx_channel_map =
          j.at("rx_channel_map").get<std::vector<std::vector<std::size_t>>>();
    else if (j.contains("rx_aperture"))
      ctx.rx_channel_map =
          centered_rx_aperture(ctx, j.at("rx_aperture").get<std::size_t>());
    if (j.contains("time_zero"))
      ctx.time_zero = j.at("time_zero").get<std::vector<double>>();
    ctx.validate();
    return ctx;
  } catch (const nlohmann::json::exception& e) {
    throw Error::invalid_metadata("context", e.what());
  }
}

nlohmann::json phantom_to_json(const Phantom& phantom) {
  nlohmann::json scatterers = nlohmann::json::array();
  for (const auto& s : phantom.scatterers)
    scatterers.push_back({s.x, s.z, s.amplitude});
  return {{"pulse",
           {{"center_frequency", phantom.pulse.center_frequency},
            {"n_cycles", phantom.pulse.n_cycles}}},
          {"scatterers", scatterers}};
}

Phantom phantom_from_json(const nlohmann::json& j) {
  try {
    Phantom p;
    if (j.contains("pulse")) {
      const auto& pulse = j.at("pulse");
      p.pulse.center_frequency =
          pulse.value("center_frequency", p.pulse.center_frequency);
      p.pulse.n_cycles = pulse.value("n_cycles", p.pulse.n_cycles);
    }
    for (const auto& s : j.at("scatterers")) {
      if (s.is_array())
        p.scatterers.push_back({s.at(0).get<double>(), s.at(1).get<double>(),
                                s.size() > 2 ? s.at(2).get<double>() : 1.0});
      else
        p.scatterers.push_back({s.at("x").get<double>(), s.at("z").get<double>(),
                                s.value("amplitude", 1.0)});
    }
    p.validate();
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw Error::invalid_metadata("phantom", e.what());
  }
}

nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::kIoError, "cannot open " + path.string());
  try {
    return nlohmann::json::parse(in, nullptr, true, true);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::kFormatError, path.string() + ": " + e.what());
  }
}

template void write_wfrf(const std::filesystem::path&,
                         const std::vector<RfFrame<float>>&,
                         const AcquisitionContext&);
template void write_wfrf(const std::filesystem::path&,
                         const std::vector<RfFrame<double>>&,
                         const AcquisitionContext&);
template RfFrame<float> read_wfrf_frame(std::istream&, const WfrfHeader&);
template RfFrame<double> read_wfrf_frame(std::istream&, const WfrfHeader&);
template std::vector<std::uint8_t> encode_pgm(const Image<float>&);
template std::vector<std::uint8_t> encode_pgm(const Image<double>&);
template void write_pgm(const Image<float>&, const std::filesystem::path&);
template void write_pgm(const Image<double>&, const std::filesystem::path&);

}  // namespace sonoflow
