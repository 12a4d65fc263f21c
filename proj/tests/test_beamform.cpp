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

#include <algorithm>
#include <cmath>
#include <random>

#include "sonoflow/beamform.hpp"
#include "test_util.hpp"

using namespace sonoflow;
using sonoflow::testing::error_of;
using sonoflow::testing::pw_context;
using sonoflow::testing::random_frame;
using sonoflow::testing::sta_context;

namespace {

ImageGrid on_axis_grid(const AcquisitionContext& ctx, double x, std::size_t n) {
  ImageGrid g;
  g.x = {x};
  const double dz = ctx.speed_of_sound / (2.0 * ctx.sampling_frequency);
  for (std::size_t k = 0; k < n; ++k) g.z.push_back(static_cast<double>(k) * dz);
  return g;
}

template <typename T>
double max_abs(const Array2<T>& a) {
  double m = 0.0;
  for (T v : a.flat()) m = std::max(m, std::abs(static_cast<double>(v)));
  return m;
}

struct RandomCase {
  AcquisitionContext ctx;
  ImageGrid grid;
  ApodizationSpec apod;
  std::size_t n_tx, n_rx, n_samples;
};

RandomCase random_case(std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> small(1, 8);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  RandomCase rc;
  const std::size_t n_el = small(rng);
  rc.n_tx = small(rng);
  rc.n_rx = std::uniform_int_distribution<std::size_t>(1, n_el)(rng);
  rc.n_samples = std::uniform_int_distribution<std::size_t>(2, 256)(rng);
  if (unit(rng) < 0.5) {
    rc.ctx = sta_context(n_el);
    StaTransmit tx;
    for (std::size_t e = 0; e < rc.n_tx; ++e)
      tx.tx_elements.push_back(std::uniform_int_distribution<std::size_t>(0, n_el - 1)(rng));
    rc.ctx.tx = tx;
  } else {
    std::vector<double> angles;
    for (std::size_t e = 0; e < rc.n_tx; ++e) angles.push_back((unit(rng) - 0.5) * 0.6);
    rc.ctx = pw_context(n_el, angles);
  }
  if (rc.n_rx != n_el || unit(rng) < 0.3) {
    rc.ctx.rx_channel_map.assign(rc.n_tx, {});
    for (auto& row : rc.ctx.rx_channel_map)
      for (std::size_t j = 0; j < rc.n_rx; ++j)
        row.push_back(std::uniform_int_distribution<std::size_t>(0, n_el - 1)(rng));
  }
  if (unit(rng) < 0.5) {
    rc.ctx.time_zero.clear();
    for (std::size_t e = 0; e < rc.n_tx; ++e)
      rc.ctx.time_zero.push_back((unit(rng) - 0.3) * 1e-6);
  }
  const double depth = rc.n_samples * rc.ctx.speed_of_sound / (2.0 * rc.ctx.sampling_frequency);
  const double half_width = 0.5 * rc.ctx.pitch * double(n_el) + 1e-3;
  rc.grid = linear_grid(-half_width, half_width, 16, 0.1 * depth * unit(rng),
                        1.3 * depth, 16);
  rc.apod.window = unit(rng) < 0.5 ? Window::kHann : Window::kRectangular;
  rc.apod.f_number = unit(rng) < 0.5 ? 0.0 : 0.5 + 2.0 * unit(rng);
  return rc;
}

}  // namespace

TEST_CASE("all-zero frame beamforms to an all-zero image") {
  const auto ctx = sta_context(4);
  RfFrame<double> f{Array3<double>(4, 4, 64)};
  const auto grid = default_grid(ctx, 64, GridMode::kSta);
  for (auto interp : {Interpolation::kNearest, Interpolation::kLinear}) {
    const auto img = das_beamform(f, ctx, grid, {}, interp);
    CHECK(img.stage == Stage::kRf);
    CHECK(max_abs(img.data) == 0.0);
    CHECK(max_abs(das_beamform_oracle(f, ctx, grid, {}, interp).data) == 0.0);
  }
}

TEST_CASE("single-element impulse lands on the matching depth") {
  const auto ctx = sta_context(1);
  const std::size_t k = 37;
  RfFrame<double> f{Array3<double>(1, 1, 128)};
  f.data(0, 0, k) = 1.0;
  const auto grid = on_axis_grid(ctx, 0.0, 128);
  const auto img = das_beamform(f, ctx, grid, {}, Interpolation::kNearest);
  for (std::size_t m = 0; m < 128; ++m) CHECK(img.data(m, 0) == (m == k ? 1.0 : 0.0));
  const auto ref = das_beamform_oracle(f, ctx, grid, {}, Interpolation::kNearest);
  CHECK(img.data == ref.data);
}

TEST_CASE("plane wave at zero angle above an element uses 2z/c") {
  const auto ctx = pw_context(3, {0.0});
  for (std::size_t j = 0; j < 3; ++j) {
    const std::size_t k = 20 + 5 * j;
    RfFrame<double> f{Array3<double>(1, 3, 96)};
    f.data(0, j, k) = 1.0;
    const auto grid = on_axis_grid(ctx, ctx.element_x(j), 96);
    const auto img = das_beamform(f, ctx, grid, {}, Interpolation::kNearest);
    for (std::size_t m = 0; m < 96; ++m) CHECK(img.data(m, 0) == (m == k ? 1.0 : 0.0));
  }
}

TEST_CASE("samples outside the trace contribute zero") {
  auto ctx = sta_context(1);
  ctx.time_zero = {80.5 / ctx.sampling_frequency};  // dead time, off-grid
  RfFrame<double> f{Array3<double>(1, 1, 16)};
  for (auto& v : f.data.flat()) v = 1.0;
  const auto grid = on_axis_grid(ctx, 0.0, 200);
  for (auto interp : {Interpolation::kNearest, Interpolation::kLinear}) {
    const auto img = das_beamform(f, ctx, grid, {}, interp);
    for (std::size_t m = 0; m < 200; ++m) {
      const double s = double(m) - 80.5;
      const bool inside = s >= 0.0 && s <= 15.0;
      CHECK(img.data(m, 0) == (inside ? 1.0 : 0.0));
    }
  }
}

TEST_CASE("linear interpolation between bracketing samples") {
  const auto ctx = sta_context(1);
  RfFrame<double> f{Array3<double>(1, 1, 8)};
  for (std::size_t k = 0; k < 8; ++k) f.data(0, 0, k) = double(k * k);
  ImageGrid g;
  g.x = {0.0};
  const double dz = ctx.speed_of_sound / (2.0 * ctx.sampling_frequency);
  g.z = {2.25 * dz, 2.5 * dz, 7.0 * dz};
  const auto lin = das_beamform(f, ctx, g, {}, Interpolation::kLinear);
  CHECK(lin.data(0, 0) == doctest::Approx(4.0 + 5.0 * 0.25).epsilon(1e-9));
  CHECK(lin.data(2, 0) == doctest::Approx(49.0));
  const auto near = das_beamform(f, ctx, g, {}, Interpolation::kNearest);
  CHECK(near.data(0, 0) == 4.0);
  CHECK(near.data(1, 0) == 9.0);  // half rounds up
}

TEST_CASE("active aperture") {
  const auto ctx = sta_context(64);
  for (double w : active_aperture(ctx, 0.0, 0.01, {})) CHECK(w == 1.0);

  const auto gated = active_aperture(ctx, 1e-3, 0.02, {Window::kRectangular, 2.0});
  for (std::size_t i = 0; i < 64; ++i)
    CHECK(gated[i] == (std::abs(ctx.element_x(i) - 1e-3) <= 0.005 ? 1.0 : 0.0));

  // Three active elements under a Hann taper.
  const auto three = sta_context(3, 1e-3);
  const auto hann = active_aperture(three, 0.0, 0.004, {Window::kHann, 2.0});
  CHECK(hann[0] == doctest::Approx(0.0));
  CHECK(hann[1] == 1.0);
  CHECK(hann[2] == doctest::Approx(0.0));

  const auto one = active_aperture(three, 0.0, 1e-4, {Window::kHann, 2.0});
  CHECK(one == std::vector<double>{0.0, 1.0, 0.0});

  for (double w : active_aperture(ctx, 0.0, 0.03, {Window::kHann, 1.0})) {
    CHECK(w >= 0.0);
    CHECK(w <= 1.0);
  }
}

TEST_CASE("fast beamformer matches the oracle on random instances") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 150; ++trial) {
    const auto rc = random_case(rng);
    CAPTURE(trial);
    const auto f64 = random_frame<double>(rc.n_tx, rc.n_rx, rc.n_samples, rng);
    const auto lin = das_beamform(f64, rc.ctx, rc.grid, rc.apod, Interpolation::kLinear);
    const auto lin_ref =
        das_beamform_oracle(f64, rc.ctx, rc.grid, rc.apod, Interpolation::kLinear);
    const double scale = std::max(1.0, max_abs(lin_ref.data));
    for (std::size_t i = 0; i < lin.data.size(); ++i)
      REQUIRE(std::abs(lin.data.flat()[i] - lin_ref.data.flat()[i]) <= 1e-9 * scale);

    REQUIRE(das_beamform(f64, rc.ctx, rc.grid, rc.apod, Interpolation::kNearest).data ==
            das_beamform_oracle(f64, rc.ctx, rc.grid, rc.apod, Interpolation::kNearest).data);

    RfFrame<float> f32{Array3<float>(rc.n_tx, rc.n_rx, rc.n_samples)};
    for (std::size_t i = 0; i < f32.data.size(); ++i)
      f32.data.flat()[i] = static_cast<float>(f64.data.flat()[i]);
    REQUIRE(das_beamform(f32, rc.ctx, rc.grid, rc.apod, Interpolation::kNearest).data ==
            das_beamform_oracle(f32, rc.ctx, rc.grid, rc.apod, Interpolation::kNearest).data);
    const auto lin32 = das_beamform(f32, rc.ctx, rc.grid, rc.apod, Interpolation::kLinear);
    const auto lin32_ref =
        das_beamform_oracle(f32, rc.ctx, rc.grid, rc.apod, Interpolation::kLinear);
    const double scale32 = std::max(1.0, max_abs(lin32_ref.data));
    for (std::size_t i = 0; i < lin32.data.size(); ++i)
      REQUIRE(std::abs(lin32.data.flat()[i] - lin32_ref.data.flat()[i]) <= 1e-5 * scale32);
  }
}

TEST_CASE("beamforming is linear in the channel data") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const auto rc = random_case(rng);
    const auto a = random_frame<double>(rc.n_tx, rc.n_rx, rc.n_samples, rng);
    const auto b = random_frame<double>(rc.n_tx, rc.n_rx, rc.n_samples, rng);
    auto sum = a;
    for (std::size_t i = 0; i < sum.data.size(); ++i) sum.data.flat()[i] += b.data.flat()[i];
    const auto da = das_beamform(a, rc.ctx, rc.grid, rc.apod);
    const auto db = das_beamform(b, rc.ctx, rc.grid, rc.apod);
    const auto ds = das_beamform(sum, rc.ctx, rc.grid, rc.apod);
    const double scale = std::max({1.0, max_abs(da.data), max_abs(db.data)});
    for (std::size_t i = 0; i < ds.data.size(); ++i)
      REQUIRE(std::abs(ds.data.flat()[i] - (da.data.flat()[i] + db.data.flat()[i])) <=
              1e-12 * scale * 16);

    for (double k : {2.0, -0.5, 8.0}) {
      auto scaled = a;
      for (auto& v : scaled.data.flat()) v *= k;
      const auto dk = das_beamform(scaled, rc.ctx, rc.grid, rc.apod);
      for (std::size_t i = 0; i < dk.data.size(); ++i)
        REQUIRE(dk.data.flat()[i] == k * da.data.flat()[i]);
    }
    for (double k : {3.0, 0.1}) {
      auto scaled = a;
      for (auto& v : scaled.data.flat()) v *= k;
      const auto dk = das_beamform(scaled, rc.ctx, rc.grid, rc.apod);
      for (std::size_t i = 0; i < dk.data.size(); ++i)
        REQUIRE(std::abs(dk.data.flat()[i] - k * da.data.flat()[i]) <= 1e-12 * scale * 16);
    }
  }
}

TEST_CASE("thread count does not change the image") {
  std::mt19937_64 rng(9);
  auto ctx = sta_context(16);
  ctx.rx_channel_map = centered_rx_aperture(ctx, 8);
  const auto f = random_frame<float>(16, 8, 300, rng);
  const auto grid = default_grid(ctx, 300, GridMode::kSta);
  const ApodizationSpec apod{Window::kHann, 1.5};
  const auto one = das_beamform(f, ctx, grid, apod, Interpolation::kLinear, 1);
  for (unsigned t : {2u, 3u, 7u, 0u})
    CHECK(das_beamform(f, ctx, grid, apod, Interpolation::kLinear, t).data == one.data);
}

TEST_CASE("beamformer input errors") {
  const auto ctx = sta_context(4);
  RfFrame<double> f{Array3<double>(4, 4, 32)};
  auto e = error_of([&] { (void)das_beamform(f, ctx, ImageGrid{}, {}); });
  REQUIRE(e);
  CHECK(e->code() == Errc::kInvalidMetadata);

  const auto grid = default_grid(ctx, 32, GridMode::kSta);
  e = error_of([&] { (void)das_beamform(f, ctx, grid, {Window::kHann, -1.0}); });
  REQUIRE(e);
  CHECK(e->field == "apodization.f_number");

  RfFrame<double> wrong{Array3<double>(3, 4, 32)};
  e = error_of([&] { (void)das_beamform(wrong, ctx, grid, {}); });
  REQUIRE(e);
  CHECK(e->code() == Errc::kDimensionMismatch);
  e = error_of([&] { (void)das_beamform_oracle(wrong, ctx, grid, {}); });
  REQUIRE(e);
  CHECK(e->axis == 0u);
}
