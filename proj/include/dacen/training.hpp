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

#include "dacen/model.hpp"

namespace dacen {

struct TrainConfig {
  int batch_size = 64;
  double lr = 1e-3;
  int max_iters = 500;   // optimizer steps
  int val_interval = 25; // steps between validation passes
  uint64_t seed = 1;

  void validate() const;
  AdamConfig adam() const;
};

/// Materialized real-valued training set. Batches are drawn by index, so
/// the extended transfer set can share label storage with its sources.
template <typename T>
struct DataArrays {
  int n_rx = 0, n_tx = 0;
  int in_width = 0;   // 2 * n_pilots
  int out_width = 0;  // 2 * n_taps
  std::vector<std::vector<T>> inputs;
  std::vector<std::vector<T>> labels;  // indexed by label_of[i]
  std::vector<int> label_of;           // input i -> label row
  std::vector<T> weights;              // one per input, 1 when unweighted
  std::vector<int> train_ids, val_ids;

  void validate() const;
};

struct TrainLogRow {
  int iteration = 0;
  double train_mse = 0.0;
  double val_mse = 0.0;
};

struct TrainRun {
  std::vector<TrainLogRow> log;
  double best_val = 0.0;
  int best_iter = -1;
  double wall_seconds = 0.0;
  bool aborted_non_finite = false;
};

/// (1/B) sum_i w_i ||label_i - pred_i||^2 over the batch axis; weights
/// default to 1 when the handle is empty (id < 0).
template <typename T>
Tensor<T> mse_loss(Tensor<T> pred, Tensor<T> label, Tensor<T> weights);

/// Shuffled mini-batch Adam on the train split with periodic validation;
/// the best-on-validation parameters are restored into the model before
/// returning. Deterministic given (seed, config, data).
template <typename T>
TrainRun train_model(DacenModel<T>& model, const DataArrays<T>& data,
                     const TrainConfig& cfg);

/// Unweighted mean per-sample squared error of the model on the chosen ids.
template <typename T>
double eval_mse(const DacenModel<T>& model, const DataArrays<T>& data,
                const std::vector<int>& ids, int batch_size);

std::string trainlog_csv(const TrainRun& run);

}  // namespace dacen
