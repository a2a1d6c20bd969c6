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

#include "dacen/model.hpp"

#include <cmath>

#include "dacen/rng.hpp"

namespace dacen {

void DacenSpec::validate() const {
  if (d_model < 2 || d_ff < 1 || n_heads < 1 || n_sam < 0 || n_tam < 0 ||
      n_taps < 1 || n_rx < 1 || n_tx < 1 || n_pilots < 1)
    throw ConfigError("model spec counts must be positive");
  if (d_model % n_heads != 0)
    throw ConfigError("d_model " + std::to_string(d_model) +
                      " is not divisible by n_heads " + std::to_string(n_heads));
  if (d_model % 2 != 0)
    throw ConfigError("positional encoding requires an even d_model, got " +
                      std::to_string(d_model));
  if (ln_eps <= 0.0) throw ConfigError("ln_eps must be positive");
}

DacenSpec DacenSpec::paper(int n_pilots) {
  DacenSpec s;
  s.n_pilots = n_pilots;
  return s;
}

DacenSpec DacenSpec::desk(int n_pilots) {
  DacenSpec s;
  s.d_model = 64;
  s.d_ff = 64;
  s.n_heads = 2;
  s.n_sam = 2;
  s.n_tam = 2;
  s.n_taps = 16;
  s.n_rx = 2;
  s.n_tx = 8;
  s.n_pilots = n_pilots;
  return s;
}

Variant variant_from_string(const std::string& name) {
  if (name == "full") return Variant::kFull;
  if (name == "no-sams") return Variant::kNoSams;
  if (name == "no-tams") return Variant::kNoTams;
  if (name == "sconv-tam") return Variant::kSconvTam;
  if (name == "sam-tconv") return Variant::kSamTconv;
  throw ConfigError("unknown variant '" + name +
                    "' (expected full|no-sams|no-tams|sconv-tam|sam-tconv)");
}

std::string to_string(Variant v) {
  switch (v) {
    case Variant::kFull: return "full";
    case Variant::kNoSams: return "no-sams";
    case Variant::kNoTams: return "no-tams";
    case Variant::kSconvTam: return "sconv-tam";
    case Variant::kSamTconv: return "sam-tconv";
  }
  throw ConfigError("bad variant enum");
}

void AblationSpec::validate() const {
  if (k_spatial < 1 || k_spatial % 2 == 0 || k_temporal < 1 || k_temporal % 2 == 0)
    throw ConfigError("ablation kernel sizes must be odd and positive");
}

std::vector<std::pair<std::string, Shape>> param_layout(const DacenSpec& spec,
                                                        const AblationSpec& abl) {
  spec.validate();
  abl.validate();
  const int d = spec.d_model;
  const int dff = spec.d_ff;
  const int dk = spec.d_head();
  const int g = spec.grid();
  const int s2 = spec.seq_len();
  const Variant v = abl.variant;

  std::vector<std::pair<std::string, Shape>> out;
  auto block_ffln = [&](const std::string& prefix) {
    out.emplace_back(prefix + ".ff.w1", Shape{d, dff});
    out.emplace_back(prefix + ".ff.b1", Shape{1, dff});
    out.emplace_back(prefix + ".ff.w2", Shape{dff, d});
    out.emplace_back(prefix + ".ff.b2", Shape{1, d});
    out.emplace_back(prefix + ".ln1.g", Shape{1, d});
    out.emplace_back(prefix + ".ln1.b", Shape{1, d});
    out.emplace_back(prefix + ".ln2.g", Shape{1, d});
    out.emplace_back(prefix + ".ln2.b", Shape{1, d});
  };

  out.emplace_back("l1.w", Shape{2 * spec.n_pilots, d});
  out.emplace_back("l1.b", Shape{1, d});
  if (v != Variant::kNoSams) {
    for (int i = 0; i < spec.n_sam; ++i) {
      const std::string p = (v == Variant::kSconvTam ? "sconv" : "sam") + std::to_string(i);
      if (v == Variant::kSconvTam) {
        out.emplace_back(p + ".conv.w", Shape{d, d, abl.k_spatial, abl.k_spatial});
        out.emplace_back(p + ".conv.b", Shape{d});
        out.emplace_back(p + ".ln.g", Shape{1, d});
        out.emplace_back(p + ".ln.b", Shape{1, d});
      } else {
        out.emplace_back(p + ".conv.w", Shape{1, 2, 1, 1});
        out.emplace_back(p + ".conv.b", Shape{1});
        block_ffln(p);
      }
    }
  }
  out.emplace_back("l2.w", Shape{d, s2});
  out.emplace_back("l2.b", Shape{1, s2});
  if (v != Variant::kNoTams) {
    out.emplace_back("l3.w", Shape{g, d});
    out.emplace_back("l3.b", Shape{1, d});
    for (int i = 0; i < spec.n_tam; ++i) {
      const std::string p = (v == Variant::kSamTconv ? "tconv" : "tam") + std::to_string(i);
      if (v == Variant::kSamTconv) {
        out.emplace_back(p + ".conv.w", Shape{d, d, abl.k_temporal});
        out.emplace_back(p + ".conv.b", Shape{d});
        out.emplace_back(p + ".ln.g", Shape{1, d});
        out.emplace_back(p + ".ln.b", Shape{1, d});
      } else {
        for (int h = 0; h < spec.n_heads; ++h) {
          const std::string ph = p + ".attn.h" + std::to_string(h);
          out.emplace_back(ph + ".wq", Shape{d, dk});
          out.emplace_back(ph + ".bq", Shape{1, dk});
          out.emplace_back(ph + ".wk", Shape{d, dk});
          out.emplace_back(ph + ".bk", Shape{1, dk});
          out.emplace_back(ph + ".wv", Shape{d, dk});
          out.emplace_back(ph + ".bv", Shape{1, dk});
        }
        out.emplace_back(p + ".attn.wo", Shape{d, d});
        out.emplace_back(p + ".attn.bo", Shape{1, d});
        block_ffln(p);
      }
    }
    out.emplace_back("l4.w", Shape{d, g});
    out.emplace_back("l4.b", Shape{1, g});
  }
  return out;
}

template <typename T>
std::vector<T> positional_encoding(int seq_len, int d_model, double omega) {
  if (d_model % 2 != 0)
    throw ConfigError("positional encoding requires an even d_model");
  std::vector<T> pe(static_cast<size_t>(seq_len) * d_model);
  for (int p = 0; p < seq_len; ++p)
    for (int i = 0; i < d_model / 2; ++i) {
      const double rate = std::pow(omega, 2.0 * i / static_cast<double>(d_model));
      const double ang = static_cast<double>(p) / rate;
      pe[static_cast<size_t>(p) * d_model + 2 * i] = static_cast<T>(std::sin(ang));
      pe[static_cast<size_t>(p) * d_model + 2 * i + 1] = static_cast<T>(std::cos(ang));
    }
  return pe;
}

namespace {

// x (B,S,in) -> x*w + b with w (in,out), b (1,out).
template <typename T>
Tensor<T> linear(Tensor<T> x, Tensor<T> w, Tensor<T> b) {
  Tensor<T> y = matmul(x, w);
  return add(y, reshape(b, {1, 1, b.shape().back()}));
}

template <typename T>
Tensor<T> feed_forward(Tensor<T> x, Tensor<T> w1, Tensor<T> b1, Tensor<T> w2,
                       Tensor<T> b2) {
  return linear(relu(linear(x, w1, b1)), w2, b2);
}

}  // namespace

template <typename T>
Tensor<T> temporal_attention(Tensor<T> x, const TamParams<T>& p, int n_heads) {
  const Shape& s = x.shape();
  if (s.size() != 3) throw ShapeError("temporal attention expects (B,S,d), got " + shape_str(s));
  const int dk = p.wq[0].shape().back();
  const T inv_sqrt_dk = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dk)));
  std::vector<Tensor<T>> heads;
  heads.reserve(static_cast<size_t>(n_heads));
  for (int h = 0; h < n_heads; ++h) {
    const auto uh = static_cast<size_t>(h);
    Tensor<T> q = linear(x, p.wq[uh], p.bq[uh]);
    Tensor<T> k = linear(x, p.wk[uh], p.bk[uh]);
    Tensor<T> v = linear(x, p.wv[uh], p.bv[uh]);
    Tensor<T> logits = scale(matmul(q, transpose_last2(k)), inv_sqrt_dk);
    heads.push_back(matmul(softmax_lastdim(logits), v));
  }
  Tensor<T> cat = n_heads == 1 ? heads[0] : concat(heads, 2);
  return linear(cat, p.wo, p.bo);
}

template <typename T>
Tensor<T> tam_forward(Tensor<T> x, const TamParams<T>& p, int n_heads,
                      bool ff_on_rc1, T eps) {
  Tensor<T> rc1 = add(temporal_attention(x, p, n_heads), x);
  Tensor<T> ln1 = layer_norm(rc1, p.ln1_g, p.ln1_b, eps);
  Tensor<T> ff = feed_forward(ff_on_rc1 ? rc1 : ln1, p.ff_w1, p.ff_b1, p.ff_w2, p.ff_b2);
  Tensor<T> rc2 = add(ff, ln1);
  return layer_norm(rc2, p.ln2_g, p.ln2_b, eps);
}

template <typename T>
Tensor<T> spatial_attention(Tensor<T> x, const SamParams<T>& p, int n_rx, int n_tx) {
  const Shape& s = x.shape();
  if (s.size() != 3 || s[1] != n_rx * n_tx)
    throw ShapeError("spatial attention expects (B," + std::to_string(n_rx * n_tx) +
                     ",d), got " + shape_str(s));
  const int batch = s[0];
  const int d = s[2];
  Tensor<T> grid = reshape(x, {batch, n_rx, n_tx, d});
  Tensor<T> mx = reshape(pool_lastdim(grid, PoolKind::kMax), {batch, 1, n_rx, n_tx});
  Tensor<T> av = reshape(pool_lastdim(grid, PoolKind::kAvg), {batch, 1, n_rx, n_tx});
  Tensor<T> maps = concat(std::vector<Tensor<T>>{mx, av}, 1);  // (B,2,NR,NT)
  Tensor<T> gate = sigmoid(conv2d(maps, p.conv_w, p.conv_b));  // (B,1,NR,NT)
  Tensor<T> gated = hadamard(grid, reshape(gate, {batch, n_rx, n_tx, 1}));
  return reshape(gated, {batch, n_rx * n_tx, d});
}

template <typename T>
Tensor<T> sam_forward(Tensor<T> x, const SamParams<T>& p, int n_rx, int n_tx,
                      bool ff_on_rc1, T eps) {
  Tensor<T> rc1 = add(spatial_attention(x, p, n_rx, n_tx), x);
  Tensor<T> ln1 = layer_norm(rc1, p.ln1_g, p.ln1_b, eps);
  Tensor<T> ff = feed_forward(ff_on_rc1 ? rc1 : ln1, p.ff_w1, p.ff_b1, p.ff_w2, p.ff_b2);
  Tensor<T> rc2 = add(ff, ln1);
  return layer_norm(rc2, p.ln2_g, p.ln2_b, eps);
}

template <typename T>
DacenModel<T>::DacenModel(DacenSpec spec, AblationSpec abl, uint64_t init_seed)
    : spec_(spec), abl_(abl) {
  const auto layout = param_layout(spec_, abl_);
  Rng rng(init_seed);
  for (const auto& [name, shape] : layout) {
    std::vector<T> data(static_cast<size_t>(numel(shape)));
    const bool is_weight = name.ends_with(".w") || name.ends_with(".wq") ||
                           name.ends_with(".wk") || name.ends_with(".wv") ||
                           name.ends_with(".wo") || name.ends_with(".w1") ||
                           name.ends_with(".w2") || name.find(".conv.w") != std::string::npos;
    const bool is_gain = name.ends_with(".g");
    if (is_weight) {
      // fan_in: leading dim for linear (in,out), all-but-first for conv.
      int64_t fan_in = shape.size() == 2 ? shape[0] : numel(shape) / shape[0];
      const double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
      for (auto& v : data) v = static_cast<T>(rng.uniform(-bound, bound));
    } else if (is_gain) {
      std::fill(data.begin(), data.end(), T(1));
    }  // biases and LN shifts stay zero
    params_.add(name, shape, std::move(data));
    slot_[name] = params_.items().size() - 1;
  }
  if (abl_.variant != Variant::kNoTams)
    pe_ = positional_encoding<T>(spec_.seq_len(), spec_.d_model, spec_.pe_omega);
}

template <typename T>
std::vector<Tensor<T>> DacenModel<T>::bind(Tape<T>& tape, bool trainable) const {
  std::vector<Tensor<T>> bound;
  bound.reserve(params_.items().size());
  for (const auto& item : params_.items())
    bound.push_back(trainable ? variable(tape, item.shape, item.data)
                              : constant(tape, item.shape, item.data));
  return bound;
}

template <typename T>
Tensor<T> DacenModel<T>::bound_at(const std::vector<Tensor<T>>& bound,
                                  const std::string& name) const {
  auto it = slot_.find(name);
  if (it == slot_.end()) throw ConfigError("model has no parameter '" + name + "'");
  return bound[it->second];
}

template <typename T>
TamParams<T> DacenModel<T>::tam_at(const std::vector<Tensor<T>>& bound, int i) const {
  TamParams<T> p;
  const std::string b = "tam" + std::to_string(i);
  for (int h = 0; h < spec_.n_heads; ++h) {
    const std::string ph = b + ".attn.h" + std::to_string(h);
    p.wq.push_back(bound_at(bound, ph + ".wq"));
    p.bq.push_back(bound_at(bound, ph + ".bq"));
    p.wk.push_back(bound_at(bound, ph + ".wk"));
    p.bk.push_back(bound_at(bound, ph + ".bk"));
    p.wv.push_back(bound_at(bound, ph + ".wv"));
    p.bv.push_back(bound_at(bound, ph + ".bv"));
  }
  p.wo = bound_at(bound, b + ".attn.wo");
  p.bo = bound_at(bound, b + ".attn.bo");
  p.ff_w1 = bound_at(bound, b + ".ff.w1");
  p.ff_b1 = bound_at(bound, b + ".ff.b1");
  p.ff_w2 = bound_at(bound, b + ".ff.w2");
  p.ff_b2 = bound_at(bound, b + ".ff.b2");
  p.ln1_g = bound_at(bound, b + ".ln1.g");
  p.ln1_b = bound_at(bound, b + ".ln1.b");
  p.ln2_g = bound_at(bound, b + ".ln2.g");
  p.ln2_b = bound_at(bound, b + ".ln2.b");
  return p;
}

template <typename T>
SamParams<T> DacenModel<T>::sam_at(const std::vector<Tensor<T>>& bound, int i) const {
  SamParams<T> p;
  const std::string b = "sam" + std::to_string(i);
  p.conv_w = bound_at(bound, b + ".conv.w");
  p.conv_b = bound_at(bound, b + ".conv.b");
  p.ff_w1 = bound_at(bound, b + ".ff.w1");
  p.ff_b1 = bound_at(bound, b + ".ff.b1");
  p.ff_w2 = bound_at(bound, b + ".ff.w2");
  p.ff_b2 = bound_at(bound, b + ".ff.b2");
  p.ln1_g = bound_at(bound, b + ".ln1.g");
  p.ln1_b = bound_at(bound, b + ".ln1.b");
  p.ln2_g = bound_at(bound, b + ".ln2.g");
  p.ln2_b = bound_at(bound, b + ".ln2.b");
  return p;
}

template <typename T>
Tensor<T> DacenModel<T>::forward(Tape<T>& tape, Tensor<T> input,
                                 const std::vector<Tensor<T>>& bound) const {
  const Shape& s = input.shape();
  if (s.size() != 4 || s[1] != spec_.n_rx || s[2] != spec_.n_tx ||
      s[3] != 2 * spec_.n_pilots)
    throw ShapeError("input stage expects (B," + std::to_string(spec_.n_rx) + "," +
                     std::to_string(spec_.n_tx) + "," +
                     std::to_string(2 * spec_.n_pilots) + "), got " + shape_str(s));
  const int batch = s[0];
  const int g = spec_.grid();
  const int s2 = spec_.seq_len();
  const T eps = static_cast<T>(spec_.ln_eps);
  const Variant v = abl_.variant;

  Tensor<T> h = reshape(input, {batch, g, 2 * spec_.n_pilots});
  h = linear(h, bound_at(bound, "l1.w"), bound_at(bound, "l1.b"));

  if (v == Variant::kSconvTam) {
    for (int i = 0; i < spec_.n_sam; ++i) {
      const std::string b = "sconv" + std::to_string(i);
      // (B,G,d) -> (B,d,NR,NT), same-padded conv, residual, layer norm
      Tensor<T> grid = reshape(transpose_last2(h), {batch, spec_.d_model, spec_.n_rx, spec_.n_tx});
      Tensor<T> y = conv2d(grid, bound_at(bound, b + ".conv.w"), bound_at(bound, b + ".conv.b"));
      y = transpose_last2(reshape(y, {batch, spec_.d_model, g}));
      h = layer_norm(add(y, h), bound_at(bound, b + ".ln.g"), bound_at(bound, b + ".ln.b"), eps);
    }
  } else if (v != Variant::kNoSams) {
    for (int i = 0; i < spec_.n_sam; ++i)
      h = sam_forward(h, sam_at(bound, i), spec_.n_rx, spec_.n_tx, spec_.ff_on_rc1, eps);
  }

  h = linear(h, bound_at(bound, "l2.w"), bound_at(bound, "l2.b"));  // (B,G,2NP)

  if (v == Variant::kNoTams)
    return reshape(h, {batch, spec_.n_rx, spec_.n_tx, s2});

  Tensor<T> t = transpose_last2(h);  // (B,2NP,G)
  t = linear(t, bound_at(bound, "l3.w"), bound_at(bound, "l3.b"));
  if (v != Variant::kSamTconv) {
    Tensor<T> pe = constant(tape, Shape{1, s2, spec_.d_model}, pe_);
    t = add(t, pe);
  }
  if (v == Variant::kSamTconv) {
    for (int i = 0; i < spec_.n_tam; ++i) {
      const std::string b = "tconv" + std::to_string(i);
      Tensor<T> seq = transpose_last2(t);  // (B,d,2NP)
      Tensor<T> y = conv1d(seq, bound_at(bound, b + ".conv.w"), bound_at(bound, b + ".conv.b"));
      y = transpose_last2(y);
      t = layer_norm(add(y, t), bound_at(bound, b + ".ln.g"), bound_at(bound, b + ".ln.b"), eps);
    }
  } else {
    for (int i = 0; i < spec_.n_tam; ++i)
      t = tam_forward(t, tam_at(bound, i), spec_.n_heads, spec_.ff_on_rc1, eps);
  }

  t = linear(t, bound_at(bound, "l4.w"), bound_at(bound, "l4.b"));  // (B,2NP,G)
  return reshape(transpose_last2(t), {batch, spec_.n_rx, spec_.n_tx, s2});
}

template <typename T>
std::vector<T> DacenModel<T>::infer(const std::vector<T>& input, int batch) const {
  Tape<T> tape;
  Tensor<T> x = constant(tape, {batch, spec_.n_rx, spec_.n_tx, 2 * spec_.n_pilots}, input);
  const auto bound = bind(tape, false);
  return forward(tape, x, bound).value();
}

template <typename T>
std::vector<T> pack_im_re(const ComplexTensor3& x) {
  std::vector<T> out(static_cast<size_t>(x.d0) * x.d1 * 2 * x.d2);
  size_t o = 0;
  for (int i = 0; i < x.d0; ++i)
    for (int j = 0; j < x.d1; ++j) {
      for (int k = 0; k < x.d2; ++k) out[o++] = static_cast<T>(x.at(i, j, k).imag());
      for (int k = 0; k < x.d2; ++k) out[o++] = static_cast<T>(x.at(i, j, k).real());
    }
  return out;
}

template <typename T>
ComplexTensor3 unpack_im_re(const std::vector<T>& v, int d0, int d1, int k) {
  if (v.size() != static_cast<size_t>(d0) * d1 * 2 * k)
    throw ShapeError("unpack_im_re: vector length does not match dimensions");
  ComplexTensor3 out(d0, d1, k);
  size_t o = 0;
  for (int i = 0; i < d0; ++i)
    for (int j = 0; j < d1; ++j) {
      for (int t = 0; t < k; ++t) out.at(i, j, t).imag(static_cast<double>(v[o++]));
      for (int t = 0; t < k; ++t) out.at(i, j, t).real(static_cast<double>(v[o++]));
    }
  return out;
}

#define DACEN_MODEL_INSTANTIATE(T)                                               \
  template std::vector<T> positional_encoding<T>(int, int, double);              \
  template Tensor<T> temporal_attention(Tensor<T>, const TamParams<T>&, int);    \
  template Tensor<T> tam_forward(Tensor<T>, const TamParams<T>&, int, bool, T);  \
  template Tensor<T> spatial_attention(Tensor<T>, const SamParams<T>&, int, int); \
  template Tensor<T> sam_forward(Tensor<T>, const SamParams<T>&, int, int, bool, T); \
  template class DacenModel<T>;                                                  \
  template std::vector<T> pack_im_re<T>(const ComplexTensor3&);                  \
  template ComplexTensor3 unpack_im_re<T>(const std::vector<T>&, int, int, int);

DACEN_MODEL_INSTANTIATE(float)
DACEN_MODEL_INSTANTIATE(double)

#undef DACEN_MODEL_INSTANTIATE

}  // namespace dacen
