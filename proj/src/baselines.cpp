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

#include "dacen/baselines.hpp"

#include <cmath>
#include <cstdio>

#include "dacen/tensor.hpp"

namespace dacen {

namespace {

// Solve (A + ridge I) X = B for Hermitian positive semi-definite A via
// Gaussian elimination with partial pivoting. A is n x n, B is n x m,
// both row-major; the solution overwrites B.
void solve_hermitian(std::vector<cd> a, std::vector<cd>& b, int n, int m) {
  for (int col = 0; col < n; ++col) {
    int pivot = col;
    double best = std::abs(a[static_cast<size_t>(col) * n + col]);
    for (int r = col + 1; r < n; ++r) {
      const double mag = std::abs(a[static_cast<size_t>(r) * n + col]);
      if (mag > best) {
        best = mag;
        pivot = r;
      }
    }
    if (best == 0.0) throw NumericsError("singular system in Wiener solve");
    if (pivot != col) {
      for (int j = 0; j < n; ++j)
        std::swap(a[static_cast<size_t>(col) * n + j], a[static_cast<size_t>(pivot) * n + j]);
      for (int j = 0; j < m; ++j)
        std::swap(b[static_cast<size_t>(col) * m + j], b[static_cast<size_t>(pivot) * m + j]);
    }
    const cd inv = 1.0 / a[static_cast<size_t>(col) * n + col];
    for (int r = col + 1; r < n; ++r) {
      const cd f = a[static_cast<size_t>(r) * n + col] * inv;
      if (f == cd(0.0, 0.0)) continue;
      for (int j = col; j < n; ++j)
        a[static_cast<size_t>(r) * n + j] -= f * a[static_cast<size_t>(col) * n + j];
      for (int j = 0; j < m; ++j)
        b[static_cast<size_t>(r) * m + j] -= f * b[static_cast<size_t>(col) * m + j];
    }
  }
  for (int col = n - 1; col >= 0; --col) {
    const cd inv = 1.0 / a[static_cast<size_t>(col) * n + col];
    for (int j = 0; j < m; ++j) {
      cd acc = b[static_cast<size_t>(col) * m + j];
      for (int r = col + 1; r < n; ++r)
        acc -= a[static_cast<size_t>(col) * n + r] * b[static_cast<size_t>(r) * m + j];
      b[static_cast<size_t>(col) * m + j] = acc * inv;
    }
  }
}

}  // namespace

ComplexTensor3 interp_centers_to_subcarriers(const ComplexTensor3& centers,
                                             const std::vector<int>& rb_of_column,
                                             const SystemConfig& cfg) {
  const int np = static_cast<int>(rb_of_column.size());
  if (centers.d2 != np)
    throw ShapeError("interp: value columns " + std::to_string(centers.d2) +
                     " vs anchor count " + std::to_string(np));
  std::vector<int> anchor_sc(static_cast<size_t>(np));
  for (int k = 0; k < np; ++k)
    anchor_sc[static_cast<size_t>(k)] = rb_center_subcarrier(cfg, rb_of_column[static_cast<size_t>(k)]);

  ComplexTensor3 out(centers.d0, centers.d1, cfg.n_subcarriers);
  for (int r = 0; r < centers.d0; ++r)
    for (int t = 0; t < centers.d1; ++t) {
      int seg = 0;
      for (int sc = 0; sc < cfg.n_subcarriers; ++sc) {
        if (sc <= anchor_sc[0]) {
          out.at(r, t, sc) = centers.at(r, t, 0);
          continue;
        }
        if (sc >= anchor_sc[static_cast<size_t>(np - 1)]) {
          out.at(r, t, sc) = centers.at(r, t, np - 1);
          continue;
        }
        while (anchor_sc[static_cast<size_t>(seg + 1)] < sc) ++seg;
        const int lo = anchor_sc[static_cast<size_t>(seg)];
        const int hi = anchor_sc[static_cast<size_t>(seg + 1)];
        const double w = static_cast<double>(sc - lo) / static_cast<double>(hi - lo);
        out.at(r, t, sc) = (1.0 - w) * centers.at(r, t, seg) + w * centers.at(r, t, seg + 1);
      }
    }
  return out;
}

ComplexTensor3 ls_estimate(const PilotSample& y, const PilotPattern& pattern,
                           const SystemConfig& cfg, const TransformConfig& tc) {
  pattern.validate(cfg.n_rb);
  const int np = static_cast<int>(pattern.rb_indices.size());
  if (y.y.d2 != np)
    throw ShapeError("ls_estimate: sample has " + std::to_string(y.y.d2) +
                     " pilot RBs, pattern has " + std::to_string(np));
  if (np == 1)
    std::fprintf(stderr,
                 "ls_estimate: single pilot RB, falling back to a constant "
                 "extrapolation across the band\n");
  // Unit-modulus pilots make the per-RB LS estimate the measurement itself.
  const ComplexTensor3 h_freq = interp_centers_to_subcarriers(y.y, pattern.rb_indices, cfg);
  return freq_to_time(h_freq, tc);
}

SecondOrderStats fit_stats(std::span<const ComplexTensor3> h_centers,
                           const PilotPattern& pattern, double snr_db) {
  if (h_centers.size() < 32)
    throw ConfigError("fit_stats needs at least 32 samples, got " +
                      std::to_string(h_centers.size()));
  const int n_rb = h_centers[0].d2;
  pattern.validate(n_rb);
  SecondOrderStats stats;
  stats.n_rb = n_rb;
  stats.pilot_rb = pattern.rb_indices;
  stats.noise_var = std::pow(10.0, -snr_db / 10.0) / pattern.despread_gain;
  stats.cov.assign(static_cast<size_t>(n_rb) * n_rb, cd(0.0, 0.0));

  // Channels are zero-mean by construction; frequency correlation is
  // shared across antenna pairs, so pairs pool as extra observations.
  int64_t count = 0;
  for (const ComplexTensor3& h : h_centers) {
    if (h.d2 != n_rb) throw ShapeError("fit_stats: inconsistent RB axis");
    for (int r = 0; r < h.d0; ++r)
      for (int t = 0; t < h.d1; ++t) {
        const cd* row = &h.at(r, t, 0);
        for (int i = 0; i < n_rb; ++i)
          for (int j = 0; j < n_rb; ++j)
            stats.cov[static_cast<size_t>(i) * n_rb + j] += row[i] * std::conj(row[j]);
        ++count;
      }
  }
  for (cd& z : stats.cov) z /= static_cast<double>(count);
  return stats;
}

std::vector<cd> wiener_matrix(const SecondOrderStats& stats) {
  const int n_rb = stats.n_rb;
  const int np = static_cast<int>(stats.pilot_rb.size());
  // R_pp + s2 I and R_fp from the pooled covariance.
  std::vector<cd> rpp(static_cast<size_t>(np) * np);
  for (int i = 0; i < np; ++i)
    for (int j = 0; j < np; ++j)
      rpp[static_cast<size_t>(i) * np + j] =
          stats.cov[static_cast<size_t>(stats.pilot_rb[static_cast<size_t>(i)]) * n_rb +
                    stats.pilot_rb[static_cast<size_t>(j)]] +
          (i == j ? cd(stats.noise_var, 0.0) : cd(0.0, 0.0));
  std::vector<cd> rfp_t(static_cast<size_t>(np) * n_rb);  // (R_fp)^T, np x n_rb
  for (int i = 0; i < np; ++i)
    for (int f = 0; f < n_rb; ++f)
      rfp_t[static_cast<size_t>(i) * n_rb + f] =
          std::conj(stats.cov[static_cast<size_t>(f) * n_rb +
                              stats.pilot_rb[static_cast<size_t>(i)]]);

  // Solve (R_pp + s2 I) X = R_fp^T, so W = X^T is R_fp (R_pp + s2 I)^-1.
  double trace = 0.0;
  for (int i = 0; i < np; ++i) trace += rpp[static_cast<size_t>(i) * np + i].real();
  for (int attempt = 0;; ++attempt) {
    std::vector<cd> x = rfp_t;
    try {
      solve_hermitian(rpp, x, np, n_rb);
      std::vector<cd> w(static_cast<size_t>(n_rb) * np);
      for (int f = 0; f < n_rb; ++f)
        for (int i = 0; i < np; ++i)
          w[static_cast<size_t>(f) * np + i] = x[static_cast<size_t>(i) * n_rb + f];
      return w;
    } catch (const NumericsError&) {
      if (attempt > 0) throw;
      const double ridge = 1e-9 * trace / np;
      std::fprintf(stderr, "wiener_matrix: singular system, adding ridge %g\n", ridge);
      for (int i = 0; i < np; ++i) rpp[static_cast<size_t>(i) * np + i] += ridge;
    }
  }
}

ComplexTensor3 lmmse_estimate(const PilotSample& y, const SecondOrderStats& stats,
                              const SystemConfig& cfg, const TransformConfig& tc) {
  const int np = static_cast<int>(stats.pilot_rb.size());
  if (y.y.d2 != np)
    throw ShapeError("lmmse_estimate: sample has " + std::to_string(y.y.d2) +
                     " pilot RBs, stats fitted for " + std::to_string(np));
  const std::vector<cd> w = wiener_matrix(stats);
  ComplexTensor3 centers(y.y.d0, y.y.d1, stats.n_rb);
  for (int r = 0; r < y.y.d0; ++r)
    for (int t = 0; t < y.y.d1; ++t) {
      const cd* obs = &y.y.at(r, t, 0);
      for (int f = 0; f < stats.n_rb; ++f) {
        cd acc(0.0, 0.0);
        const cd* wf = &w[static_cast<size_t>(f) * np];
        for (int i = 0; i < np; ++i) acc += wf[i] * obs[i];
        centers.at(r, t, f) = acc;
      }
    }
  std::vector<int> all_rb(static_cast<size_t>(stats.n_rb));
  for (int f = 0; f < stats.n_rb; ++f) all_rb[static_cast<size_t>(f)] = f;
  const ComplexTensor3 h_freq = interp_centers_to_subcarriers(centers, all_rb, cfg);
  return freq_to_time(h_freq, tc);
}

}  // namespace dacen
