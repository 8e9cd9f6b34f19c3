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

#include "deepvox/spectral.h"

#include <fftw3.h>

#include <algorithm>
#include <mutex>

#include "deepvox/common.h"

namespace deepvox::dsp {
namespace {

// FFTW's planner is not thread-safe; execution of a private plan is.
std::mutex& PlannerMutex() {
  static std::mutex mu;
  return mu;
}

}  // namespace

std::vector<std::complex<double>> RealDft(std::span<const double> x,
                                          std::size_t nfft) {
  Check(nfft >= 1, ErrorCode::kUsage, "DFT length must be positive");
  const std::size_t bins = nfft / 2 + 1;
  double* in = fftw_alloc_real(nfft);
  fftw_complex* out = fftw_alloc_complex(bins);
  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(PlannerMutex());
    plan = fftw_plan_dft_r2c_1d(static_cast<int>(nfft), in, out, FFTW_ESTIMATE);
  }
  const std::size_t n = std::min(nfft, x.size());
  std::copy(x.begin(), x.begin() + n, in);
  std::fill(in + n, in + nfft, 0.0);
  fftw_execute(plan);
  std::vector<std::complex<double>> result(bins);
  for (std::size_t k = 0; k < bins; ++k) result[k] = {out[k][0], out[k][1]};
  {
    std::lock_guard<std::mutex> lock(PlannerMutex());
    fftw_destroy_plan(plan);
  }
  fftw_free(in);
  fftw_free(out);
  return result;
}

}  // namespace deepvox::dsp
