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

#include <string>
#include <vector>

#include "dacen/complex_tensor.hpp"
#include "dacen/domainxform.hpp"
#include "dacen/rng.hpp"

namespace dacen {

/// MIMO-OFDM system geometry and the clustered-multipath generator knobs.
struct SystemConfig {
  int n_tx = 32;
  int n_rx = 4;
  int n_subcarriers = 624;
  int n_rb = 52;
  int sc_per_rb = 12;
  double sample_rate_hz = 61.44e6;
  double carrier_hz = 3.5e9;
  double scs_hz = 60e3;
  int n_clusters = 14;
  double rician_k_db = -10.0;  // first cluster only
  int delay_taps = 64;         // delays drawn in [0, (delay_taps-1)/sample_rate]
  double snapshot_sigma = 0.05;  // per-snapshot gain/phase jitter

  void validate() const;

  static SystemConfig paper();
  static SystemConfig desk();
};

/// Spatial-frequency channel, H_f in C^(N_R x N_T x N_c).
struct ChannelRealization {
  ComplexTensor3 h_freq;
};

/// Which RBs carry pilots. Measurements are anchored at each pilot RB's
/// center subcarrier; despread_gain REs are combined per measurement.
struct PilotPattern {
  std::vector<int> rb_indices;  // sorted, unique, 0-based
  int despread_gain = 2;

  void validate(int n_rb) const;
  double density(int n_rb) const;

  static PilotPattern evenly_spaced(int n_pilot, int n_rb);
};

/// Received pilot tensor Y_p in C^(N_R x N_T x N_pilot).
struct PilotSample {
  ComplexTensor3 y;
  double snr_db = 0.0;
};

/// Cluster parameters of one propagation channel; snapshots of the same
/// UE re-synthesize from a perturbed copy.
struct ClusterSet {
  std::vector<double> delay_s;
  std::vector<double> aoa_sin;
  std::vector<double> aod_sin;
  std::vector<cd> gain;
};

ClusterSet draw_clusters(const SystemConfig& cfg, Rng& rng);
ClusterSet perturb_clusters(const ClusterSet& base, double sigma, Rng& rng);
ChannelRealization synth_channel(const SystemConfig& cfg, const ClusterSet& clusters);
ChannelRealization gen_channel(const SystemConfig& cfg, Rng& rng);

/// Index of the measurement subcarrier of RB `rb` (offset 6 of its 12).
int rb_center_subcarrier(const SystemConfig& cfg, int rb);

/// Y[:,:,k] = H_f[:,:,center(rb_k)] + CN(0, sigma^2),
/// sigma^2 = 10^(-snr/10) / despread_gain.
PilotSample transmit_pilots(const ChannelRealization& h, const SystemConfig& cfg,
                            const PilotPattern& pattern, double snr_db, Rng& rng);

/// Same measurement model, starting from channel values already reduced
/// to all-RB centers (N_R x N_T x N_RB).
PilotSample transmit_pilots_from_centers(const ComplexTensor3& h_centers,
                                         const PilotPattern& pattern, double snr_db,
                                         Rng& rng);

/// H_f reduced to the N_RB center subcarriers.
ComplexTensor3 reduce_to_centers(const ChannelRealization& h, const SystemConfig& cfg);

double pilot_density(const PilotPattern& pattern, const SystemConfig& cfg);

/// One stored training/evaluation sample.
struct DatasetSample {
  int ue = 0;
  int snapshot = 0;
  ComplexTensor3 y;          // received pilots at the generation SNR
  ComplexTensor3 h_centers;  // clean channel at all RB centers
  ComplexTensor3 h_taps;     // spatial-temporal label H_t
};

enum class Split { kTrain, kVal, kTest };

struct DatasetBundle {
  SystemConfig cfg;
  TransformConfig tc;
  PilotPattern pattern;
  double snr_db = 10.0;
  uint64_t seed = 0;
  int snapshots_per_ue = 1;
  int n_train_ue = 0, n_val_ue = 0, n_test_ue = 0;
  std::vector<DatasetSample> samples;

  int n_ue() const { return n_train_ue + n_val_ue + n_test_ue; }
  Split split_of_ue(int ue) const;
  std::vector<int> sample_ids(Split split) const;
};

/// Generates n_train+n_val+n_test UEs, `snapshots_per_ue` correlated
/// snapshots each. UEs own independent sub-seeded generators, so the
/// result does not depend on generation order.
DatasetBundle make_dataset(const SystemConfig& cfg, const TransformConfig& tc,
                           int n_train_ue, int n_val_ue, int n_test_ue,
                           int snapshots_per_ue, const PilotPattern& pattern,
                           double snr_db, uint64_t seed);

}  // namespace dacen
