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

#include "dacen/chansim.hpp"

namespace dacen {

/// Per-antenna-pair LS at the pilot RB centers, linear interpolation over
/// the subcarrier grid (nearest-value extrapolation beyond the first/last
/// pilot), then the truncated IFFT. A single pilot RB degenerates to a
/// frequency-flat estimate; a warning is emitted once per call.
ComplexTensor3 ls_estimate(const PilotSample& y, const PilotPattern& pattern,
                           const SystemConfig& cfg, const TransformConfig& tc);

/// Frequency-domain second-order statistics, pooled across antenna pairs.
struct SecondOrderStats {
  int n_rb = 0;
  std::vector<cd> cov;        // (n_rb x n_rb) Hermitian PSD, row-major
  std::vector<int> pilot_rb;  // pattern the filter is matched to
  double noise_var = 0.0;     // per complex measurement entry
};

/// Sample covariance of the stored clean RB-center channels over the given
/// samples. noise variance comes from the known generation model:
/// 10^(-snr/10) / despread_gain.
SecondOrderStats fit_stats(std::span<const ComplexTensor3> h_centers,
                           const PilotPattern& pattern, double snr_db);

/// Wiener estimate R_fp (R_pp + s2 I)^-1 y at every RB center, expanded to
/// the subcarrier grid by the LS interpolator, then the truncated IFFT.
/// A near-singular system gets a ridge bump of 1e-9 trace/dim (warned).
ComplexTensor3 lmmse_estimate(const PilotSample& y, const SecondOrderStats& stats,
                              const SystemConfig& cfg, const TransformConfig& tc);

/// The Wiener weight matrix (n_rb x n_pilot) the LMMSE path applies;
/// exposed for reuse across samples and for tests.
std::vector<cd> wiener_matrix(const SecondOrderStats& stats);

/// Linear interpolation of per-RB-center values onto all subcarriers,
/// shared between LS and LMMSE.
ComplexTensor3 interp_centers_to_subcarriers(const ComplexTensor3& centers,
                                             const std::vector<int>& rb_of_column,
                                             const SystemConfig& cfg);

}  // namespace dacen
