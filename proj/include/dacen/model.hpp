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
#include <unordered_map>
#include <vector>

#include "dacen/complex_tensor.hpp"
#include "dacen/tensor.hpp"

namespace dacen {

/// Architecture hyper-parameters. The estimator maps a received pilot
/// tensor (N_R, N_T, 2*n_pilots) to delay-tap channels (N_R, N_T, 2*n_taps);
/// real tensors hold [Im, Re] halves along the last axis, imaginary first.
struct DacenSpec {
  int d_model = 512;
  int d_ff = 512;
  int n_heads = 2;
  int n_sam = 8;
  int n_tam = 8;
  double pe_omega = 10000.0;
  int n_taps = 64;   // N_P
  int n_rx = 4;
  int n_tx = 32;
  int n_pilots = 6;  // N_L, pilot RBs seen by the input layer
  // The feed-forward residual pair is consistent only if the FF consumes
  // the normalized tensor; the pre-norm alternative stays available.
  bool ff_on_rc1 = false;
  double ln_eps = 1e-5;

  int seq_len() const { return 2 * n_taps; }
  int grid() const { return n_rx * n_tx; }
  int d_head() const { return d_model / n_heads; }
  void validate() const;

  static DacenSpec paper(int n_pilots);
  static DacenSpec desk(int n_pilots);
};

enum class Variant { kFull, kNoSams, kNoTams, kSconvTam, kSamTconv };

Variant variant_from_string(const std::string& name);
std::string to_string(Variant v);

struct AblationSpec {
  Variant variant = Variant::kFull;
  int k_spatial = 3;   // K_S
  int k_temporal = 3;  // K_T

  void validate() const;
};

/// Canonical (name, shape) enumeration of every learnable tensor for a
/// spec/variant pair, in pipeline order. The model builder, the
/// checkpoint format and the parameter counters all derive from it.
std::vector<std::pair<std::string, Shape>> param_layout(const DacenSpec& spec,
                                                        const AblationSpec& abl);

/// Fixed sinusoidal positional encoding, row-major (seq_len, d_model):
/// P[p,2i] = sin(p / omega^(2i/d_model)), P[p,2i+1] = cos(same).
template <typename T>
std::vector<T> positional_encoding(int seq_len, int d_model, double omega);

// ---- attention blocks (x is batched: (B, S, d_model)) ---------------------

template <typename T>
struct TamParams {
  std::vector<Tensor<T>> wq, wk, wv, bq, bk, bv;  // one entry per head
  Tensor<T> wo, bo;
  Tensor<T> ff_w1, ff_b1, ff_w2, ff_b2;
  Tensor<T> ln1_g, ln1_b, ln2_g, ln2_b;
};

template <typename T>
struct SamParams {
  Tensor<T> conv_w, conv_b;  // 1x1, 2 -> 1 channels
  Tensor<T> ff_w1, ff_b1, ff_w2, ff_b2;
  Tensor<T> ln1_g, ln1_b, ln2_g, ln2_b;
};

/// Multi-head scaled dot-product attention over the sequence axis.
template <typename T>
Tensor<T> temporal_attention(Tensor<T> x, const TamParams<T>& p, int n_heads);

/// Attention + residual + layer norm + feed-forward + residual + layer norm.
template <typename T>
Tensor<T> tam_forward(Tensor<T> x, const TamParams<T>& p, int n_heads,
                      bool ff_on_rc1, T eps);

/// Pooled-map sigmoid gate over the antenna grid (x rows indexed r*N_T+t).
template <typename T>
Tensor<T> spatial_attention(Tensor<T> x, const SamParams<T>& p, int n_rx, int n_tx);

template <typename T>
Tensor<T> sam_forward(Tensor<T> x, const SamParams<T>& p, int n_rx, int n_tx,
                      bool ff_on_rc1, T eps);

// ---- whole model -----------------------------------------------------------

template <typename T>
class DacenModel {
 public:
  DacenModel(DacenSpec spec, AblationSpec abl, uint64_t init_seed);

  const DacenSpec& spec() const { return spec_; }
  const AblationSpec& ablation() const { return abl_; }
  ParamStore<T>& params() { return params_; }
  const ParamStore<T>& params() const { return params_; }
  const std::vector<T>& pe() const { return pe_; }

  /// Inserts every parameter into the tape (in store order) and returns
  /// the handles. trainable=false binds constants for inference.
  std::vector<Tensor<T>> bind(Tape<T>& tape, bool trainable) const;

  /// input (B, N_R, N_T, 2*n_pilots) -> (B, N_R, N_T, 2*n_taps).
  Tensor<T> forward(Tape<T>& tape, Tensor<T> input,
                    const std::vector<Tensor<T>>& bound) const;

  /// Convenience: bind as constants and run one batch.
  std::vector<T> infer(const std::vector<T>& input, int batch) const;

 private:
  Tensor<T> bound_at(const std::vector<Tensor<T>>& bound, const std::string& name) const;
  TamParams<T> tam_at(const std::vector<Tensor<T>>& bound, int i) const;
  SamParams<T> sam_at(const std::vector<Tensor<T>>& bound, int i) const;

  DacenSpec spec_;
  AblationSpec abl_;
  ParamStore<T> params_;
  std::unordered_map<std::string, size_t> slot_;
  std::vector<T> pe_;
};

// ---- real packing of complex tensors ---------------------------------------

/// (d0,d1,K) complex -> d0*d1*2K reals laid out (d0,d1,[Im K | Re K]).
template <typename T>
std::vector<T> pack_im_re(const ComplexTensor3& x);

template <typename T>
ComplexTensor3 unpack_im_re(const std::vector<T>& v, int d0, int d1, int k);

}  // namespace dacen
