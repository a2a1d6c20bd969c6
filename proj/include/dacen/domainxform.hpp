// Licensed under the Apache License, Version 2.0 (the "License"); you
// may not use this file except in compliance with the License.  You
// may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or
// implied.  See the License for the specific language governing
// permissions and limitations under the License.

#pragma once

#include <span>
#include <vector>

#include "dacen/complex_tensor.hpp"

namespace dacen {

/// Frequency -> delay-tap conversion parameters. The truncation keeps the
/// first n_taps entries of the padded IFFT output.
struct TransformConfig {
  int n_ifft = 1024;  // power of two, >= subcarrier count
  int n_taps = 64;    // retained delay taps (N_P)

  void validate() const;
};

/// In-place radix-2 transforms. fft is unnormalized; ifft carries the
/// engineering 1/N factor, so ifft(fft(x)) == x.
void fft(std::vector<cd>& x);
void ifft(std::vector<cd>& x);

/// Reference O(N^2) inverse DFT with the same 1/N convention (test oracle).
std::vector<cd> naive_idft(const std::vector<cd>& x);

/// Per antenna pair: zero-pad the frequency response to n_ifft, IFFT, and
/// keep the first n_taps entries. (N_R,N_T,N_c) -> (N_R,N_T,n_taps).
ComplexTensor3 freq_to_time(const ComplexTensor3& h_freq, const TransformConfig& tc);

/// 10*log10 of mean_i ||H_i - Hhat_i||^2 / ||H_i||^2. Exact matches clamp
/// at -300 dB; zero-norm references are skipped with a warning on stderr.
double nmse_db(std::span<const ComplexTensor3> reference,
               std::span<const ComplexTensor3> estimate);
double nmse_db(const ComplexTensor3& reference, const ComplexTensor3& estimate);

/// Same metric over pre-accumulated per-sample squared norms.
double nmse_db_from_ratios(std::span<const double> err_sq, std::span<const double> ref_sq);

}  // namespace dacen
