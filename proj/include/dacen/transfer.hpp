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

#include <optional>
#include <string>
#include <vector>

#include "dacen/chansim.hpp"
#include "dacen/training.hpp"

namespace dacen {

/// How low-density pilot samples are carved out of the high-density pilot
/// axis: indices r0, r0+I, ..., r0+I*(n_low-1), all 0-based.
struct SamplerConfig {
  int r0 = 1;
  int spacing = 4;  // I
  int n_low = 6;    // N_L
  double s_threshold = 0.9;

  void validate(int n_high) const;
};

std::vector<int> low_density_indices(const SamplerConfig& sc, int n_high);

/// The +-1 neighbor index sets; absent when any index leaves [0, n_high-1].
std::optional<std::vector<int>> offset_indices(const SamplerConfig& sc, int n_high,
                                               int delta);

/// Keeps the selected slices of the pilot axis, preserving order.
ComplexTensor3 select_pilot_slices(const ComplexTensor3& y, const std::vector<int>& idx);

/// Mean over the n_low slice pairs of |<a_j, b_j>| / (|a_j| |b_j|), the
/// complex inner product taken over the flattened antenna grid. A
/// zero-norm pair scores 0 (with a warning).
double cosine_similarity_score(const ComplexTensor3& a, const ComplexTensor3& b);

enum class SampleOrigin { kBase, kLeft, kRight };
std::string to_string(SampleOrigin o);

struct WeightRow {
  int source_id = 0;  // index into the source dataset
  SampleOrigin origin = SampleOrigin::kBase;
  double score = 1.0;
  bool included = true;
};

/// One generated low-density sample; the label is shared with its source
/// high-density sample.
struct ExtendedSample {
  int source_id = 0;
  SampleOrigin origin = SampleOrigin::kBase;
  double weight = 1.0;
  ComplexTensor3 y;
};

struct ExtendedTrainset {
  std::vector<ExtendedSample> samples;
  std::vector<WeightRow> rows;  // audit trail incl. excluded neighbors
};

/// Algorithm phase 2 over the given source ids: each base sample enters
/// with weight 1; each in-range neighbor enters iff its similarity score
/// reaches the threshold, weighted by the score.
ExtendedTrainset build_extended_trainset(const DatasetBundle& ds,
                                         const std::vector<int>& source_ids,
                                         const SamplerConfig& sc);

std::string weights_csv(const std::vector<WeightRow>& rows);

/// Copies every non-input-layer parameter of `source` into `target`
/// (bit-exact); l1.* stays at its fresh initialization because its width
/// follows the pilot count. Throws listing any other mismatch.
template <typename T>
void transfer_parameters(const DacenModel<T>& source, DacenModel<T>& target);

struct TransferOutcome {
  TrainRun source_run;
  TrainRun target_run;
  ExtendedTrainset extended;  // rows kept for weights.csv
};

/// Full pipeline: phase 1 trains `source` on the high-density arrays,
/// phase 2 builds the extended low-density set, phase 3 initializes
/// `target` from the source parameters and trains with instance weights.
template <typename T>
TransferOutcome run_transfer(DacenModel<T>& source, DacenModel<T>& target,
                             const DatasetBundle& ds, const SamplerConfig& sc,
                             const TrainConfig& source_cfg, const TrainConfig& target_cfg);

/// Low-density arrays (base samples only, weight 1) for scratch training
/// and for unbiased validation/testing.
template <typename T>
DataArrays<T> base_low_density_arrays(const DatasetBundle& ds, const SamplerConfig& sc);

/// High-density arrays straight from the dataset.
template <typename T>
DataArrays<T> high_density_arrays(const DatasetBundle& ds);

}  // namespace dacen
