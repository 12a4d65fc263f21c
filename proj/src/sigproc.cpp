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

#include "sonoflow/sigproc.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <string>

#include "sonoflow/error.hpp"
#include "sonoflow/parallel.hpp"

namespace sonoflow {

namespace {

void check_spec(const FirSpec& spec) {
  if (spec.coefficients.empty())
    throw Error(Errc::kEmptyCoefficients, "FIR filter needs >= 1 coefficient");
  for (double h : spec.coefficients)
    if (!std::isfinite(h))
      throw Error(Errc::kInvalidData, "non-finite FIR coefficient");
}

template <typename T, typename In, typename Out>
void convolve(In in, Out out, std::size_t n, const std::vector<double>& h) {
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    const std::size_t taps = std::min(h.size(), i + 1);
    for (std::size_t m = 0; m < taps; ++m)
      acc += h[m] * static_cast<double>(in(i - m));
    out(i, static_cast<T>(acc));
  }
}

// FFTW plans are cached per length. Planning is not thread-safe, execution
// through fftw_execute_dft on caller-owned buffers is.
class FftPlans {
 public:
  struct Pair {
    fftw_plan forward;
    fftw_plan inverse;
  };

  static FftPlans& instance() {
    static FftPlans plans;
    return plans;
  }

  Pair get(std::size_t n) {
    std::lock_guard lock(mutex_);
    auto it = plans_.find(n);
    if (it != plans_.end()) return it->second;
    auto* buf = fftw_alloc_complex(n);
    const int len = static_cast<int>(n);
    Pair p{fftw_plan_dft_1d(len, buf, buf, FFTW_FORWARD, FFTW_ESTIMATE),
           fftw_plan_dft_1d(len, buf, buf, FFTW_BACKWARD, FFTW_ESTIMATE)};
    fftw_free(buf);
    plans_.emplace(n, p);
    return p;
  }

  ~FftPlans() {
    for (auto& [n, p] : plans_) {
      fftw_destroy_plan(p.forward);
      fftw_destroy_plan(p.inverse);
    }
  }

 private:
  std::mutex mutex_;
  std::map<std::size_t, Pair> plans_;
};

struct FftwFree {
  void operator()(fftw_complex* p) const { fftw_free(p); }
};
using FftBuffer = std::unique_ptr<fftw_complex[], FftwFree>;

FftBuffer make_buffer(std::size_t n) { return FftBuffer(fftw_alloc_complex(n)); }

// In-place analytic signal of buf[0..n).
void hilbert_in_place(fftw_complex* buf, std::size_t n,
                      const FftPlans::Pair& plan) {
  fftw_execute_dft(plan.forward, buf, buf);
  // Bins 1..ceil(n/2)-1 doubled, Nyquist (even n) and DC kept, rest zeroed.
  const std::size_t half = n / 2;
  const std::size_t last_doubled = (n % 2 == 0) ? half - 1 : half;
  for (std::size_t k = 1; k <= last_doubled; ++k) {
    buf[k][0] *= 2.0;
    buf[k][1] *= 2.0;
  }
  for (std::size_t k = half + 1; k < n; ++k) {
    buf[k][0] = 0.0;
    buf[k][1] = 0.0;
  }
  fftw_execute_dft(plan.inverse, buf, buf);
  const double scale = 1.0 / static_cast<double>(n);
  for (std::size_t k = 0; k < n; ++k) {
    buf[k][0] *= scale;
    buf[k][1] *= scale;
  }
}

void check_axis_length(std::size_t n) {
  if (n < 2)
    throw Error(Errc::kAxisTooShort,
                "analytic signal needs >= 2 samples, got " + std::to_string(n));
}

}  // namespace

template <typename T>
std::vector<T> fir_filter(std::span<const T> x, const FirSpec& spec) {
  check_spec(spec);
  std::vector<T> y(x.size());
  convolve<T>([&](std::size_t i) { return x[i]; },
              [&](std::size_t i, T v) { y[i] = v; }, x.size(),
              spec.coefficients);
  return y;
}

template <typename T>
RfFrame<T> fir_filter(const RfFrame<T>& frame, const FirSpec& spec,
                      unsigned threads) {
  check_spec(spec);
  const auto& s = frame.data.shape();
  RfFrame<T> out{Array3<T>(s[0], s[1], s[2])};
  parallel_for(s[0] * s[1], threads, [&](std::size_t b, std::size_t e) {
    for (std::size_t lane = b; lane < e; ++lane) {
      const auto in = frame.data.lane(lane / s[1], lane % s[1]);
      auto dst = out.data.lane(lane / s[1], lane % s[1]);
      convolve<T>([&](std::size_t i) { return in[i]; },
                  [&](std::size_t i, T v) { dst[i] = v; }, s[2],
                  spec.coefficients);
    }
  });
  return out;
}

template <typename T>
Array2<T> fir_filter(const Array2<T>& x, const FirSpec& spec,
                     std::size_t axis) {
  check_spec(spec);
  if (axis > 1) throw Error::dimension_mismatch(axis, "2-D array has axes 0, 1");
  Array2<T> y(x.rows(), x.cols());
  if (axis == 1) {
    for (std::size_t r = 0; r < x.rows(); ++r)
      convolve<T>([&](std::size_t i) { return x(r, i); },
                  [&](std::size_t i, T v) { y(r, i) = v; }, x.cols(),
                  spec.coefficients);
  } else {
    for (std::size_t c = 0; c < x.cols(); ++c)
      convolve<T>([&](std::size_t i) { return x(i, c); },
                  [&](std::size_t i, T v) { y(i, c) = v; }, x.rows(),
                  spec.coefficients);
  }
  return y;
}

template <typename T>
std::vector<std::complex<T>> analytic_signal(std::span<const T> x) {
  const std::size_t n = x.size();
  check_axis_length(n);
  const auto plan = FftPlans::instance().get(n);
  auto buf = make_buffer(n);
  for (std::size_t k = 0; k < n; ++k) {
    buf[k][0] = static_cast<double>(x[k]);
    buf[k][1] = 0.0;
  }
  hilbert_in_place(buf.get(), n, plan);
  std::vector<std::complex<T>> out(n);
  for (std::size_t k = 0; k < n; ++k)
    out[k] = {static_cast<T>(buf[k][0]), static_cast<T>(buf[k][1])};
  return out;
}

template <typename T>
Array2<std::complex<T>> analytic_signal(const Array2<T>& x, std::size_t axis,
                                        unsigned threads) {
  if (axis > 1) throw Error::dimension_mismatch(axis, "2-D array has axes 0, 1");
  const std::size_t n = axis == 0 ? x.rows() : x.cols();
  const std::size_t lanes = axis == 0 ? x.cols() : x.rows();
  check_axis_length(n);
  const auto plan = FftPlans::instance().get(n);
  Array2<std::complex<T>> out(x.rows(), x.cols());
  parallel_for(lanes, threads, [&](std::size_t b, std::size_t e) {
    auto buf = make_buffer(n);
    for (std::size_t lane = b; lane < e; ++lane) {
      for (std::size_t k = 0; k < n; ++k) {
        buf[k][0] = static_cast<double>(axis == 0 ? x(k, lane) : x(lane, k));
        buf[k][1] = 0.0;
      }
      hilbert_in_place(buf.get(), n, plan);
      for (std::size_t k = 0; k < n; ++k) {
        auto& dst = axis == 0 ? out(k, lane) : out(lane, k);
        dst = {static_cast<T>(buf[k][0]), static_cast<T>(buf[k][1])};
      }
    }
  });
  return out;
}

template <typename T>
ComplexImage<T> analytic_signal(const Image<T>& rf, unsigned threads) {
  if (rf.stage != Stage::kRf)
    throw Error(Errc::kWrongStage, "analytic signal expects an rf image, got " +
                                       std::string(stage_name(rf.stage)));
  return {analytic_signal(rf.data, 0, threads), rf.grid};
}

template <typename T>
Array2<T> envelope(const Array2<std::complex<T>>& z) {
  Array2<T> out(z.rows(), z.cols());
  auto src = z.flat();
  auto dst = out.flat();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = std::abs(src[i]);
  return out;
}

template <typename T>
Image<T> envelope(const ComplexImage<T>& z) {
  return {envelope(z.data), Stage::kEnvelope, z.grid};
}

template <typename T>
std::vector<T> dynamic_adjustment(std::span<const T> e, double range_db) {
  if (!(range_db > 0.0) || !std::isfinite(range_db))
    throw Error(Errc::kNonPositiveRange,
                "dynamic range must be > 0 dB, got " + std::to_string(range_db));
  double peak = 0.0;
  for (T v : e) {
    if (!std::isfinite(v))
      throw Error(Errc::kInvalidData, "non-finite envelope value");
    peak = std::max(peak, static_cast<double>(v));
  }
  if (!(peak > 0.0))
    throw Error(Errc::kAllZeroInput, "envelope has no positive element");
  std::vector<T> out(e.size());
  for (std::size_t i = 0; i < e.size(); ++i) {
    const double v = static_cast<double>(e[i]);
    if (v <= 0.0) {
      out[i] = T{0};
      continue;
    }
    const double db = 20.0 * std::log10(v / peak);
    out[i] = static_cast<T>(std::clamp(db + range_db, 0.0, range_db) / range_db);
  }
  return out;
}

template <typename T>
Image<T> dynamic_adjustment(const Image<T>& envelope_image, double range_db) {
  if (envelope_image.stage != Stage::kEnvelope)
    throw Error(Errc::kWrongStage,
                "dynamic adjustment expects an envelope image, got " +
                    std::string(stage_name(envelope_image.stage)));
  const auto& src = envelope_image.data;
  Image<T> out{Array2<T>(src.rows(), src.cols()), Stage::kDisplay,
               envelope_image.grid};
  const auto values = dynamic_adjustment(src.flat(), range_db);
  std::copy(values.begin(), values.end(), out.data.flat().begin());
  return out;
}

#define SONOFLOW_INSTANTIATE(T)                                               \
  template std::vector<T> fir_filter(std::span<const T>, const FirSpec&);     \
  template RfFrame<T> fir_filter(const RfFrame<T>&, const FirSpec&, unsigned); \
  template Array2<T> fir_filter(const Array2<T>&, const FirSpec&,              \
                                std::size_t);                                  \
  template std::vector<std::complex<T>> analytic_signal(std::span<const T>);   \
  template Array2<std::complex<T>> analytic_signal(const Array2<T>&,           \
                                                   std::size_t, unsigned);     \
  template ComplexImage<T> analytic_signal(const Image<T>&, unsigned);         \
  template Array2<T> envelope(const Array2<std::complex<T>>&);                 \
  template Image<T> envelope(const ComplexImage<T>&);                          \
  template std::vector<T> dynamic_adjustment(std::span<const T>, double);      \
  template Image<T> dynamic_adjustment(const Image<T>&, double);

SONOFLOW_INSTANTIATE(float)
SONOFLOW_INSTANTIATE(double)

#undef SONOFLOW_INSTANTIATE

}  // namespace sonoflow
