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

#include "dacen/baselines.hpp"
#include "dacen/io.hpp"
#include "dacen/transfer.hpp"

namespace dacen {

// ---- dataset persistence ----------------------------------------------------
// A dataset directory holds manifest.cfg plus three tensor files
// (complex64): y.dtns, hf_centers.dtns, ht.dtns.

void save_dataset(const std::string& dir, const DatasetBundle& ds);
DatasetBundle load_dataset(const std::string& dir);

FlatConfig dataset_manifest(const DatasetBundle& ds);

// ---- model persistence ------------------------------------------------------
// A model directory holds model.ckpt (all learnables) and model.cfg
// (spec, ablation and the sampler it was trained under).

struct ModelArtifact {
  DacenModel<float> model;
  SamplerConfig sampler;  // how its inputs are carved from the pilot axis
};

void save_model(const std::string& dir, const DacenModel<float>& model,
                const SamplerConfig& sampler);
ModelArtifact load_model(const std::string& dir);

// ---- evaluation sweep -------------------------------------------------------

struct MetricRow {
  std::string method;
  double density = 0.0;
  double snr_db = 0.0;
  double nmse_db = 0.0;
  int n_samples = 0;
  uint64_t seed = 0;
};

struct EvalCell {
  SamplerConfig sampler;
  const DacenModel<float>* scratch = nullptr;   // optional learned methods
  const DacenModel<float>* transferred = nullptr;
  bool run_ls = true;
  bool run_lmmse = true;
};

/// For every (cell, snr): regenerate test pilots at that SNR from the
/// stored clean channels (noise redrawn deterministically), run each
/// method, and append one row per method. All methods of a cell see the
/// same noisy measurements.
std::vector<MetricRow> eval_sweep(const DatasetBundle& ds,
                                  const std::vector<EvalCell>& cells,
                                  const std::vector<double>& snrs_db,
                                  uint64_t noise_seed);

std::string metrics_csv(const std::vector<MetricRow>& rows);

/// One SVG per density: NMSE vs SNR, one polyline per method.
void write_metric_plots(const std::string& dir, const std::vector<MetricRow>& rows);

// ---- full pipeline ----------------------------------------------------------

/// Orchestrates generate -> train -> (transfer) -> eval -> complexity from
/// one flat config. The artifacts directory receives the resolved config,
/// its digest, the dataset, checkpoints, trainlog.csv / weights.csv,
/// metrics.csv, complexity.csv and plots. Rerunning with the same config
/// reproduces metrics.csv byte-for-byte; a digest mismatch on an existing
/// directory aborts.
void run_experiment(const FlatConfig& cfg, const std::string& out_dir);

/// The desk-scale default configuration run_experiment starts from.
FlatConfig default_experiment_config();

}  // namespace dacen
