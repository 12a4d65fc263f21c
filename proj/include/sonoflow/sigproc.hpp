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

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "sonoflow/array.hpp"
#include "sonoflow/types.hpp"

namespace sonoflow {

struct FirSpec {
  std::vector<double> coefficients;
};

// Causal convolution y[n] = sum_m h[m] x[n-m] with zero history; the output
// has the input's length. Accumulates in double.
template <typename T>
std::vector<T> fir_filter(std::span<const T> x, const FirSpec& spec);

// Filters every lane of the sample axis.
template <typename T>
RfFrame<T> fir_filter(const RfFrame<T>& frame, const FirSpec& spec,
                      unsigned threads = 1);

// axis 0 filters along depth (columns), axis 1 along rows.
template <typename T>
Array2<T> fir_filter(const Array2<T>& x, const FirSpec& spec, std::size_t axis);

// One-sided spectrum doubling through the FFT. N >= 2.
template <typename T>
std::vector<std::complex<T>> analytic_signal(std::span<const T> x);

template <typename T>
Array2<std::complex<T>> analytic_signal(const Array2<T>& x, std::size_t axis,
                                        unsigned threads = 1);

// Analytic signal of an RF image along depth.
template <typename T>
ComplexImage<T> analytic_signal(const Image<T>& rf, unsigned threads = 1);

template <typename T>
Array2<T> envelope(const Array2<std::complex<T>>& z);

template <typename T>
Image<T> envelope(const ComplexImage<T>& z);

// Log compression to [0, 1]: the frame maximum maps to 1, anything
// range_db or more below it maps to 0. Non-positive inputs map to 0.
template <typename T>
std::vector<T> dynamic_adjustment(std::span<const T> e, double range_db);

template <typename T>
Image<T> dynamic_adjustment(const Image<T>& envelope_image, double range_db);

}  // namespace sonoflow
