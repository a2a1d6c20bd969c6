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

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dacen/model.hpp"

namespace dacen {

// Closed-form per-layer costs. A FLOP is one multiply-accumulate.
int64_t tam_flops(int n_taps, int d_model);
int64_t sam_flops(int n_rx, int n_tx, int d_model);
int64_t sconv_flops(int n_rx, int n_tx, int k_s, int d_model);
int64_t tconv_flops(int n_taps, int k_t, int d_model);

/// Parameter-count conventions. The published per-layer numbers count
/// linear/conv weights and their biases for TAM, TConv and SConv but only
/// the feed-forward pair for SAM; `kPaper` reproduces that decomposition,
/// `kFull` counts every learnable (normalization affine included).
enum class CountConvention { kPaper, kFull };

int64_t tam_params(int d_model, int d_ff, CountConvention c);
int64_t sam_params(int d_model, int d_ff, CountConvention c);
int64_t sconv_params(int k_s, int d_model, CountConvention c);
int64_t tconv_params(int k_t, int d_model, CountConvention c);

/// Whole-model parameter count for a spec/variant pair. kFull equals the
/// number of values a checkpoint of the built model serializes.
int64_t count_params(const DacenSpec& spec, const AblationSpec& abl, CountConvention c);

/// Whole-model multiply-accumulate count per forward pass (one sample).
int64_t count_flops(const DacenSpec& spec, const AblationSpec& abl);

struct ComplexityRow {
  std::string label;
  int64_t flops = 0;
  int64_t params_paper = 0;
  int64_t params_full = 0;
  std::optional<double> published_flops;   // reported constants, where any
  std::optional<double> published_params;
};

struct ComplexityReport {
  std::vector<ComplexityRow> layers;  // TAM, TConv, SAM, SConv
  std::vector<ComplexityRow> models;  // full + the four ablation variants
};

/// Builds per-layer and per-model rows for the given spec, with published
/// reference constants attached for the paper-scale preset.
ComplexityReport complexity_report(const DacenSpec& spec, const AblationSpec& abl);

std::string complexity_csv(const ComplexityReport& report);
std::string complexity_table(const ComplexityReport& report);

}  // namespace dacen
