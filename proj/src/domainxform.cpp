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

#include "dacen/domainxform.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "dacen/tensor.hpp"  // ShapeError/ConfigError

namespace dacen {

namespace {

constexpr double kNmseFloorDb = -300.0;

bool is_pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }

// Iterative radix-2 Cooley-Tukey, sign = -1 forward / +1 inverse.
void transform(std::vector<cd>& x, int sign) {
  const size_t n = x.size();
  if (!is_pow2(static_cast<int>(n)))
    throw ConfigError("fft length " + std::to_string(n) +
                      " is not a power of two; pad the input first");
  // bit reversal
  for (size_t i = 1, j = 0; i < n; ++i) {
    size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(x[i], x[j]);
  }
  for (size_t len = 2; len <= n; len <<= 1) {
    const double ang = sign * 2.0 * M_PI / static_cast<double>(len);
    const cd wlen(std::cos(ang), std::sin(ang));
    for (size_t i = 0; i < n; i += len) {
      cd w(1.0, 0.0);
      for (size_t k = 0; k < len / 2; ++k) {
        const cd u = x[i + k];
        const cd t = x[i + k + len / 2] * w;
        x[i + k] = u + t;
        x[i + k + len / 2] = u - t;
        w *= wlen;
      }
    }
  }
}

}  // namespace

void TransformConfig::validate() const {
  if (!is_pow2(n_ifft))
    throw ConfigError("n_ifft must be a power of two, got " + std::to_string(n_ifft));
  if (n_taps < 1 || n_taps > n_ifft)
    throw ConfigError("n_taps must lie in [1, n_ifft], got " + std::to_string(n_taps));
}

void fft(std::vector<cd>& x) { transform(x, -1); }

void ifft(std::vector<cd>& x) {
  transform(x, +1);
  const double inv = 1.0 / static_cast<double>(x.size());
  for (cd& z : x) z *= inv;
}

std::vector<cd> naive_idft(const std::vector<cd>& x) {
  const size_t n = x.size();
  std::vector<cd> out(n);
  for (size_t t = 0; t < n; ++t) {
    cd acc(0.0, 0.0);
    for (size_t k = 0; k < n; ++k) {
      const double ang = 2.0 * M_PI * static_cast<double>(k * t % n) / static_cast<double>(n);
      acc += x[k] * cd(std::cos(ang), std::sin(ang));
    }
    out[t] = acc / static_cast<double>(n);
  }
  return out;
}

ComplexTensor3 freq_to_time(const ComplexTensor3& h_freq, const TransformConfig& tc) {
  tc.validate();
  if (h_freq.d2 > tc.n_ifft)
    throw ConfigError("subcarrier count " + std::to_string(h_freq.d2) +
                      " exceeds n_ifft " + std::to_string(tc.n_ifft));
  ComplexTensor3 out(h_freq.d0, h_freq.d1, tc.n_taps);
  std::vector<cd> row(static_cast<size_t>(tc.n_ifft));
  for (int r = 0; r < h_freq.d0; ++r)
    for (int t = 0; t < h_freq.d1; ++t) {
      std::fill(row.begin(), row.end(), cd(0.0, 0.0));
      for (int k = 0; k < h_freq.d2; ++k) row[static_cast<size_t>(k)] = h_freq.at(r, t, k);
      ifft(row);
      for (int p = 0; p < tc.n_taps; ++p) out.at(r, t, p) = row[static_cast<size_t>(p)];
    }
  return out;
}

double nmse_db_from_ratios(std::span<const double> err_sq, std::span<const double> ref_sq) {
  if (err_sq.size() != ref_sq.size())
    throw ShapeError("nmse_db: per-sample arrays differ in length");
  double acc = 0.0;
  size_t used = 0;
  for (size_t i = 0; i < err_sq.size(); ++i) {
    if (ref_sq[i] <= 0.0) {
      std::fprintf(stderr, "nmse_db: sample %zu has zero-norm reference, excluded\n", i);
      continue;
    }
    acc += err_sq[i] / ref_sq[i];
    ++used;
  }
  if (used == 0) throw NumericsError("nmse_db: no sample with nonzero reference norm");
  const double mean = acc / static_cast<double>(used);
  if (mean <= 0.0) return kNmseFloorDb;
  return std::max(kNmseFloorDb, 10.0 * std::log10(mean));
}

double nmse_db(std::span<const ComplexTensor3> reference,
               std::span<const ComplexTensor3> estimate) {
  if (reference.size() != estimate.size())
    throw ShapeError("nmse_db: batch sizes differ");
  std::vector<double> err_sq(reference.size()), ref_sq(reference.size());
  for (size_t i = 0; i < reference.size(); ++i) {
    const ComplexTensor3& h = reference[i];
    const ComplexTensor3& hat = estimate[i];
    if (h.d0 != hat.d0 || h.d1 != hat.d1 || h.d2 != hat.d2)
      throw ShapeError("nmse_db: tensor shapes differ at sample " + std::to_string(i));
    double e = 0.0;
    for (size_t k = 0; k < h.v.size(); ++k) e += std::norm(h.v[k] - hat.v[k]);
    err_sq[i] = e;
    ref_sq[i] = h.sq_norm();
  }
  return nmse_db_from_ratios(err_sq, ref_sq);
}

double nmse_db(const ComplexTensor3& reference, const ComplexTensor3& estimate) {
  return nmse_db(std::span<const ComplexTensor3>(&reference, 1),
                 std::span<const ComplexTensor3>(&estimate, 1));
}

}  // namespace dacen
