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

#include "dacen/chansim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <stdexcept>
#include <thread>

#include "dacen/tensor.hpp"

namespace dacen {

void SystemConfig::validate() const {
  if (n_tx < 1 || n_rx < 1 || n_subcarriers < 1 || n_rb < 1 || sc_per_rb < 1)
    throw ConfigError("system counts must be positive");
  if (n_subcarriers > n_rb * sc_per_rb)
    throw ConfigError("subcarriers " + std::to_string(n_subcarriers) +
                      " exceed RB capacity " + std::to_string(n_rb * sc_per_rb));
  if (n_clusters < 1) throw ConfigError("need at least one cluster");
  if (sample_rate_hz <= 0.0 || scs_hz <= 0.0)
    throw ConfigError("rates must be positive");
  if (delay_taps < 1) throw ConfigError("delay_taps must be positive");
}

SystemConfig SystemConfig::paper() { return SystemConfig{}; }

SystemConfig SystemConfig::desk() {
  SystemConfig c;
  c.n_tx = 8;
  c.n_rx = 2;
  c.n_subcarriers = 96;
  c.n_rb = 8;
  c.sample_rate_hz = 128 * 60e3;  // matches the desk 128-point IFFT grid
  c.n_clusters = 6;
  c.delay_taps = 16;
  return c;
}

void PilotPattern::validate(int n_rb) const {
  if (rb_indices.empty()) throw ConfigError("pilot pattern has no RBs");
  if (despread_gain < 1) throw ConfigError("despread gain must be >= 1");
  int prev = -1;
  for (int rb : rb_indices) {
    if (rb <= prev) throw ConfigError("pilot RB indices must be sorted and unique");
    if (rb < 0 || rb >= n_rb)
      throw std::out_of_range("pilot RB index " + std::to_string(rb) +
                              " outside [0, " + std::to_string(n_rb - 1) + "]");
    prev = rb;
  }
}

double PilotPattern::density(int n_rb) const {
  return static_cast<double>(rb_indices.size()) / static_cast<double>(n_rb);
}

PilotPattern PilotPattern::evenly_spaced(int n_pilot, int n_rb) {
  if (n_pilot < 1 || n_pilot > n_rb)
    throw ConfigError("n_pilot must lie in [1, n_rb]");
  PilotPattern p;
  p.rb_indices.reserve(static_cast<size_t>(n_pilot));
  for (int k = 0; k < n_pilot; ++k)
    p.rb_indices.push_back(static_cast<int>(static_cast<int64_t>(k) * n_rb / n_pilot));
  return p;
}

double pilot_density(const PilotPattern& pattern, const SystemConfig& cfg) {
  pattern.validate(cfg.n_rb);
  return pattern.density(cfg.n_rb);
}

ClusterSet draw_clusters(const SystemConfig& cfg, Rng& rng) {
  cfg.validate();
  const int n = cfg.n_clusters;
  ClusterSet cs;
  cs.delay_s.resize(static_cast<size_t>(n));
  cs.aoa_sin.resize(static_cast<size_t>(n));
  cs.aod_sin.resize(static_cast<size_t>(n));
  cs.gain.resize(static_cast<size_t>(n));

  const double tau_max = static_cast<double>(cfg.delay_taps - 1) / cfg.sample_rate_hz;
  const double tau_decay = std::max(tau_max / 3.0, 1e-12);
  // First cluster is the zero-delay (Rician) one; the rest are spread
  // across the delay support with exponentially decaying mean power.
  std::vector<double> power(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    cs.delay_s[static_cast<size_t>(i)] = (i == 0) ? 0.0 : rng.uniform(0.0, tau_max);
    cs.aoa_sin[static_cast<size_t>(i)] = rng.uniform(-1.0, 1.0);
    cs.aod_sin[static_cast<size_t>(i)] = rng.uniform(-1.0, 1.0);
    power[static_cast<size_t>(i)] = std::exp(-cs.delay_s[static_cast<size_t>(i)] / tau_decay);
  }
  double total = 0.0;
  for (double p : power) total += p;
  for (double& p : power) p /= total;  // E[sum |gain|^2] = 1

  const double k_lin = std::pow(10.0, cfg.rician_k_db / 10.0);
  for (int i = 0; i < n; ++i) {
    const double p = power[static_cast<size_t>(i)];
    if (i == 0) {
      const double phase = rng.uniform(0.0, 2.0 * M_PI);
      const cd los = std::sqrt(k_lin / (k_lin + 1.0)) * cd(std::cos(phase), std::sin(phase));
      const cd nlos = std::sqrt(1.0 / (k_lin + 1.0)) * rng.cnormal();
      cs.gain[static_cast<size_t>(i)] = std::sqrt(p) * (los + nlos);
    } else {
      cs.gain[static_cast<size_t>(i)] = std::sqrt(p) * rng.cnormal();
    }
  }
  return cs;
}

ClusterSet perturb_clusters(const ClusterSet& base, double sigma, Rng& rng) {
  ClusterSet cs = base;
  for (cd& g : cs.gain) {
    const double dg = 1.0 + sigma * rng.normal();
    const double dp = sigma * rng.normal();
    g *= dg * cd(std::cos(dp), std::sin(dp));
  }
  return cs;
}

ChannelRealization synth_channel(const SystemConfig& cfg, const ClusterSet& clusters) {
  ChannelRealization out;
  out.h_freq = ComplexTensor3(cfg.n_rx, cfg.n_tx, cfg.n_subcarriers);
  const int n = static_cast<int>(clusters.gain.size());
  std::vector<cd> a_rx(static_cast<size_t>(cfg.n_rx));
  std::vector<cd> a_tx(static_cast<size_t>(cfg.n_tx));
  std::vector<cd> phasor(static_cast<size_t>(cfg.n_subcarriers));
  for (int c = 0; c < n; ++c) {
    // Half-wavelength ULA steering on both ends; a_R(phi) a_T^H(theta).
    for (int r = 0; r < cfg.n_rx; ++r) {
      const double ang = M_PI * r * clusters.aoa_sin[static_cast<size_t>(c)];
      a_rx[static_cast<size_t>(r)] = cd(std::cos(ang), std::sin(ang));
    }
    for (int t = 0; t < cfg.n_tx; ++t) {
      const double ang = -M_PI * t * clusters.aod_sin[static_cast<size_t>(c)];
      a_tx[static_cast<size_t>(t)] = cd(std::cos(ang), std::sin(ang));
    }
    const double dphi = -2.0 * M_PI * cfg.scs_hz * clusters.delay_s[static_cast<size_t>(c)];
    for (int k = 0; k < cfg.n_subcarriers; ++k)
      phasor[static_cast<size_t>(k)] = cd(std::cos(dphi * k), std::sin(dphi * k));
    const cd g = clusters.gain[static_cast<size_t>(c)];
    for (int r = 0; r < cfg.n_rx; ++r)
      for (int t = 0; t < cfg.n_tx; ++t) {
        const cd grt = g * a_rx[static_cast<size_t>(r)] * a_tx[static_cast<size_t>(t)];
        cd* row = &out.h_freq.at(r, t, 0);
        for (int k = 0; k < cfg.n_subcarriers; ++k) row[k] += grt * phasor[static_cast<size_t>(k)];
      }
  }
  return out;
}

ChannelRealization gen_channel(const SystemConfig& cfg, Rng& rng) {
  const ClusterSet cs = draw_clusters(cfg, rng);
  return synth_channel(cfg, cs);
}

int rb_center_subcarrier(const SystemConfig& cfg, int rb) {
  const int sc = rb * cfg.sc_per_rb + cfg.sc_per_rb / 2;
  return std::min(sc, cfg.n_subcarriers - 1);
}

namespace {

void add_noise(ComplexTensor3& y, double snr_db, int gain, Rng& rng) {
  if (std::isinf(snr_db) && snr_db > 0) return;
  const double sigma2 = std::pow(10.0, -snr_db / 10.0) / static_cast<double>(gain);
  const double s = std::sqrt(sigma2);
  for (cd& z : y.v) z += s * rng.cnormal();
}

}  // namespace

PilotSample transmit_pilots(const ChannelRealization& h, const SystemConfig& cfg,
                            const PilotPattern& pattern, double snr_db, Rng& rng) {
  pattern.validate(cfg.n_rb);
  const int np = static_cast<int>(pattern.rb_indices.size());
  PilotSample out;
  out.snr_db = snr_db;
  out.y = ComplexTensor3(cfg.n_rx, cfg.n_tx, np);
  for (int k = 0; k < np; ++k) {
    const int sc = rb_center_subcarrier(cfg, pattern.rb_indices[static_cast<size_t>(k)]);
    for (int r = 0; r < cfg.n_rx; ++r)
      for (int t = 0; t < cfg.n_tx; ++t) out.y.at(r, t, k) = h.h_freq.at(r, t, sc);
  }
  add_noise(out.y, snr_db, pattern.despread_gain, rng);
  return out;
}

PilotSample transmit_pilots_from_centers(const ComplexTensor3& h_centers,
                                         const PilotPattern& pattern, double snr_db,
                                         Rng& rng) {
  pattern.validate(h_centers.d2);
  const int np = static_cast<int>(pattern.rb_indices.size());
  PilotSample out;
  out.snr_db = snr_db;
  out.y = ComplexTensor3(h_centers.d0, h_centers.d1, np);
  for (int k = 0; k < np; ++k) {
    const int rb = pattern.rb_indices[static_cast<size_t>(k)];
    for (int r = 0; r < h_centers.d0; ++r)
      for (int t = 0; t < h_centers.d1; ++t) out.y.at(r, t, k) = h_centers.at(r, t, rb);
  }
  add_noise(out.y, snr_db, pattern.despread_gain, rng);
  return out;
}

ComplexTensor3 reduce_to_centers(const ChannelRealization& h, const SystemConfig& cfg) {
  ComplexTensor3 out(cfg.n_rx, cfg.n_tx, cfg.n_rb);
  for (int rb = 0; rb < cfg.n_rb; ++rb) {
    const int sc = rb_center_subcarrier(cfg, rb);
    for (int r = 0; r < cfg.n_rx; ++r)
      for (int t = 0; t < cfg.n_tx; ++t) out.at(r, t, rb) = h.h_freq.at(r, t, sc);
  }
  return out;
}

Split DatasetBundle::split_of_ue(int ue) const {
  if (ue < n_train_ue) return Split::kTrain;
  if (ue < n_train_ue + n_val_ue) return Split::kVal;
  return Split::kTest;
}

std::vector<int> DatasetBundle::sample_ids(Split split) const {
  std::vector<int> ids;
  for (size_t i = 0; i < samples.size(); ++i)
    if (split_of_ue(samples[i].ue) == split) ids.push_back(static_cast<int>(i));
  return ids;
}

DatasetBundle make_dataset(const SystemConfig& cfg, const TransformConfig& tc,
                           int n_train_ue, int n_val_ue, int n_test_ue,
                           int snapshots_per_ue, const PilotPattern& pattern,
                           double snr_db, uint64_t seed) {
  cfg.validate();
  tc.validate();
  pattern.validate(cfg.n_rb);
  if (n_train_ue < 0 || n_val_ue < 0 || n_test_ue < 0 || snapshots_per_ue < 1)
    throw ConfigError("dataset counts must be positive");
  const int n_ue = n_train_ue + n_val_ue + n_test_ue;
  if (n_ue < 1) throw ConfigError("dataset needs at least one UE");

  DatasetBundle ds;
  ds.cfg = cfg;
  ds.tc = tc;
  ds.pattern = pattern;
  ds.snr_db = snr_db;
  ds.seed = seed;
  ds.snapshots_per_ue = snapshots_per_ue;
  ds.n_train_ue = n_train_ue;
  ds.n_val_ue = n_val_ue;
  ds.n_test_ue = n_test_ue;
  ds.samples.resize(static_cast<size_t>(n_ue) * snapshots_per_ue);

  const Rng master(seed);
  auto build_ue = [&](int ue) {
    Rng rng = master.fork(static_cast<uint64_t>(ue));
    const ClusterSet base = draw_clusters(cfg, rng);
    for (int s = 0; s < snapshots_per_ue; ++s) {
      const ClusterSet cs =
          (s == 0) ? base : perturb_clusters(base, cfg.snapshot_sigma, rng);
      const ChannelRealization h = synth_channel(cfg, cs);
      DatasetSample& sample = ds.samples[static_cast<size_t>(ue) * snapshots_per_ue + s];
      sample.ue = ue;
      sample.snapshot = s;
      sample.h_centers = reduce_to_centers(h, cfg);
      sample.h_taps = freq_to_time(h.h_freq, tc);
      sample.y = transmit_pilots(h, cfg, pattern, snr_db, rng).y;
    }
  };

  const int workers = std::min(tensor_threads(), n_ue);
  if (workers <= 1) {
    for (int ue = 0; ue < n_ue; ++ue) build_ue(ue);
  } else {
    // Each UE has its own generator, so parallel and serial runs produce
    // identical datasets.
    std::vector<std::thread> pool;
    std::atomic<int> next{0};
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (int ue = next.fetch_add(1); ue < n_ue; ue = next.fetch_add(1)) build_ue(ue);
      });
    for (auto& t : pool) t.join();
  }
  return ds;
}

}  // namespace dacen
