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

#include <complex>
#include <vector>

namespace dacen {

using cd = std::complex<double>;

/// Rank-3 complex array, row-major (d0, d1, d2). Carrier of H_f, H_t and
/// received pilot tensors with axes (receive antenna, transmit antenna,
/// frequency-or-delay).
struct ComplexTensor3 {
  int d0 = 0, d1 = 0, d2 = 0;
  std::vector<cd> v;

  ComplexTensor3() = default;
  ComplexTensor3(int a, int b, int c)
      : d0(a), d1(b), d2(c), v(static_cast<size_t>(a) * b * c) {}

  cd& at(int i, int j, int k) {
    return v[(static_cast<size_t>(i) * d1 + j) * d2 + k];
  }
  const cd& at(int i, int j, int k) const {
    return v[(static_cast<size_t>(i) * d1 + j) * d2 + k];
  }

  size_t size() const { return v.size(); }

  double sq_norm() const {
    double s = 0.0;
    for (const cd& z : v) s += std::norm(z);
    return s;
  }
};

}  // namespace dacen
