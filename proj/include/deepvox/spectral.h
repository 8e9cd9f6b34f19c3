// Copyright 2026 The DeepVOX Toolkit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// FFTW-backed real transforms.

#ifndef DEEPVOX_SPECTRAL_H_
#define DEEPVOX_SPECTRAL_H_

#include <complex>
#include <span>
#include <vector>

namespace deepvox::dsp {

// Bins 0..nfft/2 of the DFT of x, zero-padded (or truncated) to nfft points.
std::vector<std::complex<double>> RealDft(std::span<const double> x,
                                          std::size_t nfft);

}  // namespace deepvox::dsp

#endif  // DEEPVOX_SPECTRAL_H_
