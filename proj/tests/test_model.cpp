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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "dacen/model.hpp"
#include "dacen/rng.hpp"

using namespace dacen;

namespace {

std::vector<double> random_values(size_t n, uint64_t seed, double lo = -1.0,
                                  double hi = 1.0) {
  Rng rng(seed);
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(lo, hi);
  return v;
}

// Test-only toy spec used by the block-level checks.
DacenSpec toy_spec() {
  DacenSpec s;
  s.d_model = 8;
  s.d_ff = 8;
  s.n_heads = 2;
  s.n_sam = 1;
  s.n_tam = 1;
  s.n_taps = 2;  // seq_len 4
  s.n_rx = 2;
  s.n_tx = 3;
  s.n_pilots = 2;
  return s;
}

// Builds TAM parameter handles from a flat list of leaves in a fixed
// order: per head wq,bq,wk,bk,wv,bv; then wo,bo, ff w1,b1,w2,b2, ln pairs.
template <typename T>
TamParams<T> tam_from_leaves(const std::vector<Tensor<T>>& leaves, int n_heads) {
  TamParams<T> p;
  size_t i = 0;
  for (int h = 0; h < n_heads; ++h) {
    p.wq.push_back(leaves[i++]);
    p.bq.push_back(leaves[i++]);
    p.wk.push_back(leaves[i++]);
    p.bk.push_back(leaves[i++]);
    p.wv.push_back(leaves[i++]);
    p.bv.push_back(leaves[i++]);
  }
  p.wo = leaves[i++];
  p.bo = leaves[i++];
  p.ff_w1 = leaves[i++];
  p.ff_b1 = leaves[i++];
  p.ff_w2 = leaves[i++];
  p.ff_b2 = leaves[i++];
  p.ln1_g = leaves[i++];
  p.ln1_b = leaves[i++];
  p.ln2_g = leaves[i++];
  p.ln2_b = leaves[i++];
  return p;
}

std::vector<std::pair<Shape, std::vector<double>>> tam_inputs(int seq, int d, int dk,
                                                              int n_heads,
                                                              uint64_t seed) {
  std::vector<std::pair<Shape, std::vector<double>>> in;
  in.push_back({{1, seq, d}, random_values(static_cast<size_t>(seq) * d, seed)});
  uint64_t s = seed + 1;
  for (int h = 0; h < n_heads; ++h) {
    in.push_back({{d, dk}, random_values(static_cast<size_t>(d) * dk, s++)});
    in.push_back({{1, dk}, random_values(static_cast<size_t>(dk), s++)});
    in.push_back({{d, dk}, random_values(static_cast<size_t>(d) * dk, s++)});
    in.push_back({{1, dk}, random_values(static_cast<size_t>(dk), s++)});
    in.push_back({{d, dk}, random_values(static_cast<size_t>(d) * dk, s++)});
    in.push_back({{1, dk}, random_values(static_cast<size_t>(dk), s++)});
  }
  in.push_back({{d, d}, random_values(static_cast<size_t>(d) * d, s++)});
  in.push_back({{1, d}, random_values(static_cast<size_t>(d), s++)});
  in.push_back({{d, d}, random_values(static_cast<size_t>(d) * d, s++)});
  in.push_back({{1, d}, random_values(static_cast<size_t>(d), s++)});
  in.push_back({{d, d}, random_values(static_cast<size_t>(d) * d, s++)});
  in.push_back({{1, d}, random_values(static_cast<size_t>(d), s++)});
  in.push_back({{1, d}, random_values(static_cast<size_t>(d), s++, 0.5, 1.5)});
  in.push_back({{1, d}, random_values(static_cast<size_t>(d), s++)});
  in.push_back({{1, d}, random_values(static_cast<size_t>(d), s++, 0.5, 1.5)});
  in.push_back({{1, d}, random_values(static_cast<size_t>(d), s++)});
  return in;
}

// Brute-force multi-head attention with explicit loops (batch 1).
std::vector<double> attention_oracle(
    const std::vector<std::pair<Shape, std::vector<double>>>& in, int seq, int d,
    int dk, int n_heads) {
  const auto& x = in[0].second;
  auto proj = [&](const std::vector<double>& w, const std::vector<double>& b, int row,
                  int col) {
    double acc = b[static_cast<size_t>(col)];
    for (int l = 0; l < d; ++l)
      acc += x[static_cast<size_t>(row) * d + l] * w[static_cast<size_t>(l) * dk + col];
    return acc;
  };
  std::vector<double> heads(static_cast<size_t>(seq) * d);
  for (int h = 0; h < n_heads; ++h) {
    const auto& wq = in[static_cast<size_t>(1 + 6 * h)].second;
    const auto& bq = in[static_cast<size_t>(2 + 6 * h)].second;
    const auto& wk = in[static_cast<size_t>(3 + 6 * h)].second;
    const auto& bk = in[static_cast<size_t>(4 + 6 * h)].second;
    const auto& wv = in[static_cast<size_t>(5 + 6 * h)].second;
    const auto& bv = in[static_cast<size_t>(6 + 6 * h)].second;
    for (int i = 0; i < seq; ++i) {
      std::vector<double> logits(static_cast<size_t>(seq));
      for (int j = 0; j < seq; ++j) {
        double dot = 0;
        for (int c = 0; c < dk; ++c) dot += proj(wq, bq, i, c) * proj(wk, bk, j, c);
        logits[static_cast<size_t>(j)] = dot / std::sqrt(static_cast<double>(dk));
      }
      double mx = logits[0];
      for (double v : logits) mx = std::max(mx, v);
      double z = 0;
      for (double& v : logits) {
        v = std::exp(v - mx);
        z += v;
      }
      for (int c = 0; c < dk; ++c) {
        double acc = 0;
        for (int j = 0; j < seq; ++j)
          acc += logits[static_cast<size_t>(j)] / z * proj(wv, bv, j, c);
        heads[static_cast<size_t>(i) * d + h * dk + c] = acc;
      }
    }
  }
  const size_t wo_at = static_cast<size_t>(1 + 6 * n_heads);
  const auto& wo = in[wo_at].second;
  const auto& bo = in[wo_at + 1].second;
  std::vector<double> out(static_cast<size_t>(seq) * d);
  for (int i = 0; i < seq; ++i)
    for (int c = 0; c < d; ++c) {
      double acc = bo[static_cast<size_t>(c)];
      for (int l = 0; l < d; ++l)
        acc += heads[static_cast<size_t>(i) * d + l] * wo[static_cast<size_t>(l) * d + c];
      out[static_cast<size_t>(i) * d + c] = acc;
    }
  return out;
}

}  // namespace

TEST_CASE("positional encoding closed forms") {
  const auto pe = positional_encoding<double>(6, 8, 10000.0);
  // row 0 alternates sin 0 = 0, cos 0 = 1
  for (int i = 0; i < 8; i += 2) {
    CHECK(pe[static_cast<size_t>(i)] == doctest::Approx(0.0));
    CHECK(pe[static_cast<size_t>(i + 1)] == doctest::Approx(1.0));
  }
  CHECK(pe[8] == doctest::Approx(std::sin(1.0)));  // P[1,0] = sin(1)
  for (double v : pe) {
    CHECK(v >= -1.0);
    CHECK(v <= 1.0);
  }
  // rows pairwise distinct for p < omega
  for (int p = 0; p < 6; ++p)
    for (int q = p + 1; q < 6; ++q) {
      double diff = 0;
      for (int c = 0; c < 8; ++c)
        diff += std::abs(pe[static_cast<size_t>(p * 8 + c)] - pe[static_cast<size_t>(q * 8 + c)]);
      CHECK(diff > 1e-6);
    }
  CHECK_THROWS_AS(positional_encoding<double>(4, 7, 10000.0), ConfigError);
}

TEST_CASE("identical rows attend uniformly and stay identical") {
  const int seq = 5, d = 8, dk = 4, n_heads = 2;
  auto in = tam_inputs(seq, d, dk, n_heads, 40);
  // overwrite x with one row repeated
  const auto row = random_values(static_cast<size_t>(d), 41);
  for (int i = 0; i < seq; ++i)
    for (int c = 0; c < d; ++c) in[0].second[static_cast<size_t>(i) * d + c] = row[static_cast<size_t>(c)];
  Tape<double> tape;
  std::vector<Tensor<double>> leaves;
  for (const auto& [shape, data] : in) leaves.push_back(constant(tape, shape, data));
  TamParams<double> p = tam_from_leaves(std::vector<Tensor<double>>(leaves.begin() + 1, leaves.end()), n_heads);
  const auto out = temporal_attention(leaves[0], p, n_heads).value();
  for (int i = 1; i < seq; ++i)
    for (int c = 0; c < d; ++c)
      CHECK(out[static_cast<size_t>(i) * d + c] ==
            doctest::Approx(out[static_cast<size_t>(c)]).epsilon(1e-9));
}

TEST_CASE("zero logits with identity value path average the rows") {
  const int seq = 4, d = 4;
  Tape<double> tape;
  const auto xv = random_values(static_cast<size_t>(seq) * d, 42);
  auto x = constant(tape, {1, seq, d}, xv);
  auto zero_w = constant(tape, {d, d}, std::vector<double>(16, 0.0));
  auto zero_b = constant(tape, {1, d}, std::vector<double>(4, 0.0));
  std::vector<double> eye(16, 0.0);
  for (int i = 0; i < 4; ++i) eye[static_cast<size_t>(i) * 4 + i] = 1.0;
  auto id = constant(tape, {d, d}, eye);
  TamParams<double> p;
  p.wq = {zero_w};
  p.bq = {zero_b};
  p.wk = {zero_w};
  p.bk = {zero_b};
  p.wv = {id};
  p.bv = {zero_b};
  p.wo = id;
  p.bo = zero_b;
  const auto out = temporal_attention(x, p, 1).value();
  for (int c = 0; c < d; ++c) {
    double mean = 0;
    for (int i = 0; i < seq; ++i) mean += xv[static_cast<size_t>(i) * d + c];
    mean /= seq;
    for (int i = 0; i < seq; ++i)
      CHECK(out[static_cast<size_t>(i) * d + c] == doctest::Approx(mean).epsilon(1e-12));
  }
}

TEST_CASE("multi-head attention matches the double-loop oracle") {
  const int seq = 8, d = 16, dk = 8, n_heads = 2;
  const auto in = tam_inputs(seq, d, dk, n_heads, 50);
  Tape<double> tape;
  std::vector<Tensor<double>> leaves;
  for (const auto& [shape, data] : in) leaves.push_back(constant(tape, shape, data));
  TamParams<double> p = tam_from_leaves(std::vector<Tensor<double>>(leaves.begin() + 1, leaves.end()), n_heads);
  const auto got = temporal_attention(leaves[0], p, n_heads).value();
  const auto want = attention_oracle(in, seq, d, dk, n_heads);
  REQUIRE(got.size() == want.size());
  for (size_t i = 0; i < got.size(); ++i)
    CHECK(std::abs(got[i] - want[i]) < 1e-6);
}

TEST_CASE("attention rows of softmax sum to one inside the block") {
  // exercised through softmax directly in the op tests; here check the
  // permutation property instead: permuting input rows permutes outputs.
  const int seq = 6, d = 8, dk = 4, n_heads = 2;
  auto in = tam_inputs(seq, d, dk, n_heads, 52);
  auto permuted = in;
  const std::vector<int> perm{3, 0, 5, 1, 4, 2};
  for (int i = 0; i < seq; ++i)
    for (int c = 0; c < d; ++c)
      permuted[0].second[static_cast<size_t>(i) * d + c] =
          in[0].second[static_cast<size_t>(perm[static_cast<size_t>(i)]) * d + c];

  auto run = [&](const std::vector<std::pair<Shape, std::vector<double>>>& inputs) {
    Tape<double> tape;
    std::vector<Tensor<double>> leaves;
    for (const auto& [shape, data] : inputs) leaves.push_back(constant(tape, shape, data));
    TamParams<double> p = tam_from_leaves(std::vector<Tensor<double>>(leaves.begin() + 1, leaves.end()), n_heads);
    return temporal_attention(leaves[0], p, n_heads).value();
  };
  const auto base = run(in);
  const auto moved = run(permuted);
  for (int i = 0; i < seq; ++i)
    for (int c = 0; c < d; ++c)
      CHECK(moved[static_cast<size_t>(i) * d + c] ==
            doctest::Approx(base[static_cast<size_t>(perm[static_cast<size_t>(i)]) * d + c])
                .epsilon(1e-9));
}

TEST_CASE("tam_forward keeps shape and survives zeroed weights") {
  const int seq = 4, d = 8, dk = 4, n_heads = 2;
  auto in = tam_inputs(seq, d, dk, n_heads, 60);
  // zero attention and FF weights; layer-norm gains to 1, shifts to 0
  for (size_t i = 1; i < in.size(); ++i)
    std::fill(in[i].second.begin(), in[i].second.end(), 0.0);
  std::fill(in[in.size() - 4].second.begin(), in[in.size() - 4].second.end(), 1.0);
  std::fill(in[in.size() - 2].second.begin(), in[in.size() - 2].second.end(), 1.0);
  Tape<double> tape;
  std::vector<Tensor<double>> leaves;
  for (const auto& [shape, data] : in) leaves.push_back(constant(tape, shape, data));
  TamParams<double> p = tam_from_leaves(std::vector<Tensor<double>>(leaves.begin() + 1, leaves.end()), n_heads);
  const auto out = tam_forward(leaves[0], p, n_heads, false, 1e-5);
  CHECK(out.shape() == Shape{1, seq, d});
  for (double v : out.value()) CHECK(std::isfinite(v));
  // deterministic: run twice
  const auto again = tam_forward(leaves[0], p, n_heads, false, 1e-5);
  CHECK(out.value() == again.value());
}

TEST_CASE("tam_forward gradients pass the finite-difference oracle") {
  const int seq = 4, d = 8, dk = 4, n_heads = 2;
  const auto in = tam_inputs(seq, d, dk, n_heads, 61);
  auto build = [&](Tape<double>& tp, const std::vector<Tensor<double>>& leaves) {
    TamParams<double> p = tam_from_leaves(
        std::vector<Tensor<double>>(leaves.begin() + 1, leaves.end()), n_heads);
    auto y = tam_forward(leaves[0], p, n_heads, false, 1e-5);
    return reduce_sum(hadamard(y, y));
  };
  CHECK(grad_check<double>(build, in, 1e-5) < 1e-5);
}

TEST_CASE("spatial attention gate closed forms") {
  const int n_rx = 2, n_tx = 3, d = 4;
  const auto xv = random_values(static_cast<size_t>(n_rx * n_tx) * d, 70);
  Tape<double> tape;
  auto x = constant(tape, {1, n_rx * n_tx, d}, xv);
  SamParams<double> p;
  p.conv_w = constant<double>(tape, {1, 2, 1, 1}, {0, 0});
  p.conv_b = constant<double>(tape, {1}, {0});
  const auto half = spatial_attention(x, p, n_rx, n_tx).value();
  for (size_t i = 0; i < half.size(); ++i)
    CHECK(half[i] == doctest::Approx(xv[i] / 2).epsilon(1e-12));  // sigmoid(0)

  SamParams<double> sat = p;
  sat.conv_b = constant<double>(tape, {1}, {80.0});  // saturates the gate at 1
  const auto full = spatial_attention(x, sat, n_rx, n_tx).value();
  for (size_t i = 0; i < full.size(); ++i)
    CHECK(full[i] == doctest::Approx(xv[i]).epsilon(1e-9));
}

TEST_CASE("spatial attention matches an explicit-loop reference") {
  const int n_rx = 2, n_tx = 4, d = 6;
  const auto xv = random_values(static_cast<size_t>(n_rx * n_tx) * d, 71);
  const std::vector<double> wv = {0.8, -0.3};
  const double bv = 0.1;
  Tape<double> tape;
  auto x = constant(tape, {1, n_rx * n_tx, d}, xv);
  SamParams<double> p;
  p.conv_w = constant(tape, {1, 2, 1, 1}, wv);
  p.conv_b = constant<double>(tape, {1}, {bv});
  const auto got = spatial_attention(x, p, n_rx, n_tx).value();

  for (int g = 0; g < n_rx * n_tx; ++g) {
    double mx = xv[static_cast<size_t>(g) * d];
    double av = 0;
    for (int c = 0; c < d; ++c) {
      mx = std::max(mx, xv[static_cast<size_t>(g) * d + c]);
      av += xv[static_cast<size_t>(g) * d + c];
    }
    av /= d;
    const double gate = 1.0 / (1.0 + std::exp(-(wv[0] * mx + wv[1] * av + bv)));
    for (int c = 0; c < d; ++c)
      CHECK(got[static_cast<size_t>(g) * d + c] ==
            doctest::Approx(xv[static_cast<size_t>(g) * d + c] * gate).epsilon(1e-9));
    CHECK(gate > 0.0);
    CHECK(gate < 1.0);  // sigmoid range is open
  }
}

TEST_CASE("sam_forward keeps shape and passes the gradient oracle") {
  const int n_rx = 2, n_tx = 3, d = 8;
  std::vector<std::pair<Shape, std::vector<double>>> in;
  in.push_back({{1, n_rx * n_tx, d}, random_values(static_cast<size_t>(n_rx * n_tx) * d, 80)});
  in.push_back({{1, 2, 1, 1}, random_values(2, 81)});
  in.push_back({{1}, random_values(1, 82)});
  in.push_back({{d, d}, random_values(static_cast<size_t>(d) * d, 83)});
  in.push_back({{1, d}, random_values(static_cast<size_t>(d), 84)});
  in.push_back({{d, d}, random_values(static_cast<size_t>(d) * d, 85)});
  in.push_back({{1, d}, random_values(static_cast<size_t>(d), 86)});
  in.push_back({{1, d}, random_values(static_cast<size_t>(d), 87, 0.5, 1.5)});
  in.push_back({{1, d}, random_values(static_cast<size_t>(d), 88)});
  in.push_back({{1, d}, random_values(static_cast<size_t>(d), 89, 0.5, 1.5)});
  in.push_back({{1, d}, random_values(static_cast<size_t>(d), 90)});

  auto build = [&](Tape<double>& tp, const std::vector<Tensor<double>>& leaves) {
    SamParams<double> p;
    p.conv_w = leaves[1];
    p.conv_b = leaves[2];
    p.ff_w1 = leaves[3];
    p.ff_b1 = leaves[4];
    p.ff_w2 = leaves[5];
    p.ff_b2 = leaves[6];
    p.ln1_g = leaves[7];
    p.ln1_b = leaves[8];
    p.ln2_g = leaves[9];
    p.ln2_b = leaves[10];
    auto y = sam_forward(leaves[0], p, n_rx, n_tx, false, 1e-5);
    return reduce_sum(hadamard(y, y));
  };
  CHECK(grad_check<double>(build, in, 1e-5) < 1e-5);
}

TEST_CASE("dacen_forward shapes: paper and desk presets") {
  {
    DacenModel<float> model(DacenSpec::paper(6), {}, 1);
    Tape<float> tape;
    auto x = constant(tape, {1, 4, 32, 12},
                      std::vector<float>(static_cast<size_t>(4 * 32 * 12), 0.1f));
    const auto bound = model.bind(tape, false);
    CHECK(model.forward(tape, x, bound).shape() == Shape{1, 4, 32, 128});
  }
  {
    DacenModel<float> model(DacenSpec::desk(3), {}, 2);
    Tape<float> tape;
    auto x = constant(tape, {2, 2, 8, 6},
                      std::vector<float>(static_cast<size_t>(2 * 2 * 8 * 6), 0.1f));
    const auto bound = model.bind(tape, false);
    CHECK(model.forward(tape, x, bound).shape() == Shape{2, 2, 8, 32});
  }
}

TEST_CASE("dacen_forward names the stage on a bad input shape") {
  DacenModel<float> model(DacenSpec::desk(3), {}, 3);
  Tape<float> tape;
  auto x = constant(tape, {1, 2, 8, 4}, std::vector<float>(64, 0.f));
  const auto bound = model.bind(tape, false);
  CHECK_THROWS_WITH_AS(model.forward(tape, x, bound), doctest::Contains("input stage"),
                       ShapeError);
}

TEST_CASE("every variant preserves the forward shape contract") {
  for (Variant v : {Variant::kFull, Variant::kNoSams, Variant::kNoTams,
                    Variant::kSconvTam, Variant::kSamTconv}) {
    AblationSpec abl;
    abl.variant = v;
    DacenModel<float> model(toy_spec(), abl, 4);
    Tape<float> tape;
    auto x = constant(tape, {2, 2, 3, 4},
                      std::vector<float>(static_cast<size_t>(2 * 2 * 3 * 4), 0.5f));
    const auto bound = model.bind(tape, false);
    CHECK(model.forward(tape, x, bound).shape() == Shape{2, 2, 3, 4});
  }
}

TEST_CASE("full desk model end-to-end gradient check (sampled)") {
  DacenSpec spec = DacenSpec::desk(3);
  spec.n_sam = 1;
  spec.n_tam = 1;
  spec.d_model = 16;
  spec.d_ff = 16;
  spec.n_taps = 4;
  DacenModel<double> model(spec, {}, 5);
  const int in_elems = spec.n_rx * spec.n_tx * 2 * spec.n_pilots;
  std::vector<std::pair<Shape, std::vector<double>>> inputs;
  inputs.push_back({{1, spec.n_rx, spec.n_tx, 2 * spec.n_pilots},
                    random_values(static_cast<size_t>(in_elems), 91)});
  for (const auto& item : model.params().items())
    inputs.push_back({item.shape, item.data});

  auto build = [&](Tape<double>& tp, const std::vector<Tensor<double>>& leaves) {
    // Rebuild a model-shaped forward from leaf handles: reuse the model's
    // layout order (input first, then parameters in store order).
    std::vector<Tensor<double>> bound(leaves.begin() + 1, leaves.end());
    auto y = model.forward(tp, leaves[0], bound);
    return reduce_sum(hadamard(y, y));
  };
  CHECK(grad_check<double>(build, inputs, 1e-5, 4) < 1e-4);
}

TEST_CASE("positional encoding breaks row-permutation equivariance") {
  // With PE disabled the TAM stack is row-equivariant (shown above for the
  // attention layer); adding P must distinguish tap positions.
  DacenSpec spec = toy_spec();
  DacenModel<float> model(spec, {}, 6);
  const auto pe = model.pe();
  bool any_rows_differ = false;
  const int d = spec.d_model;
  for (int p = 1; p < spec.seq_len(); ++p) {
    double diff = 0;
    for (int c = 0; c < d; ++c)
      diff += std::abs(pe[static_cast<size_t>(p) * d + c] - pe[static_cast<size_t>(c)]);
    if (diff > 1e-3) any_rows_differ = true;
  }
  CHECK(any_rows_differ);
}

TEST_CASE("variant parameter layouts stay unique and well-formed") {
  for (Variant v : {Variant::kFull, Variant::kNoSams, Variant::kNoTams,
                    Variant::kSconvTam, Variant::kSamTconv}) {
    AblationSpec abl;
    abl.variant = v;
    const auto layout = param_layout(toy_spec(), abl);
    std::set<std::string> names;
    for (const auto& [name, shape] : layout) {
      CHECK(names.insert(name).second);
      CHECK(numel(shape) > 0);
    }
    if (v == Variant::kNoTams) {
      for (const auto& [name, shape] : layout) {
        CHECK(name.find("l3.") == std::string::npos);
        CHECK(name.find("l4.") == std::string::npos);
      }
    }
  }
}

TEST_CASE("pack and unpack are inverse, imaginary half first") {
  ComplexTensor3 x(2, 3, 4);
  Rng rng(92);
  for (auto& z : x.v) z = rng.cnormal();
  const auto packed = pack_im_re<double>(x);
  REQUIRE(packed.size() == 2 * 3 * 8);
  CHECK(packed[0] == doctest::Approx(x.at(0, 0, 0).imag()));
  CHECK(packed[4] == doctest::Approx(x.at(0, 0, 0).real()));
  const ComplexTensor3 back = unpack_im_re(packed, 2, 3, 4);
  for (size_t i = 0; i < x.v.size(); ++i) CHECK(std::abs(x.v[i] - back.v[i]) < 1e-12);
}

TEST_CASE("infer matches the tape forward") {
  DacenModel<float> model(toy_spec(), {}, 7);
  const auto xv = random_values(static_cast<size_t>(2 * 3 * 4), 93);
  std::vector<float> xf(xv.begin(), xv.end());
  const auto via_infer = model.infer(xf, 1);
  Tape<float> tape;
  auto x = constant(tape, {1, 2, 3, 4}, xf);
  const auto bound = model.bind(tape, false);
  CHECK(model.forward(tape, x, bound).value() == via_infer);
}
