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

#include "dacen/rng.hpp"
#include "dacen/tensor.hpp"

using namespace dacen;

namespace {

std::vector<double> random_values(size_t n, uint64_t seed, double lo = -1.0,
                                  double hi = 1.0) {
  Rng rng(seed);
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(lo, hi);
  return v;
}

}  // namespace

TEST_CASE("matmul identity and hand inner product") {
  Tape<double> tape;
  auto eye = constant<double>(tape, {2, 2}, {1, 0, 0, 1});
  auto m = constant<double>(tape, {2, 2}, {1, 2, 3, 4});
  CHECK(matmul(eye, m).value() == std::vector<double>{1, 2, 3, 4});

  auto row = constant<double>(tape, {1, 2}, {1, 2});
  auto col = constant<double>(tape, {2, 1}, {3, 4});
  CHECK(matmul(row, col).value() == std::vector<double>{11});
}

TEST_CASE("matmul rejects mismatched inner dimensions with both shapes") {
  Tape<double> tape;
  auto a = constant<double>(tape, {2, 3}, std::vector<double>(6, 1.0));
  auto b = constant<double>(tape, {2, 2}, std::vector<double>(4, 1.0));
  CHECK_THROWS_WITH_AS(matmul(a, b),
                       doctest::Contains("(2,3)") && doctest::Contains("(2,2)"),
                       ShapeError);
}

TEST_CASE("matmul gradient of sum(C) w.r.t. A is the column sums of B") {
  const auto av = random_values(12, 1);
  const auto bv = random_values(8, 2);
  Tape<double> tape;
  auto a = variable(tape, {3, 4}, av);
  auto b = variable(tape, {4, 2}, bv);
  auto s = reduce_sum(matmul(a, b));
  tape.backward(s.id);
  // dA[i,l] = sum_j B[l,j], identical for every row i.
  for (int i = 0; i < 3; ++i)
    for (int l = 0; l < 4; ++l) {
      const double want = bv[static_cast<size_t>(l) * 2] + bv[static_cast<size_t>(l) * 2 + 1];
      CHECK(a.grad()[static_cast<size_t>(i) * 4 + l] == doctest::Approx(want).epsilon(1e-12));
    }

  auto build = [](Tape<double>& tp, const std::vector<Tensor<double>>& in) {
    return reduce_sum(matmul(in[0], in[1]));
  };
  const double err = grad_check<double>(build, {{{3, 4}, av}, {{4, 2}, bv}}, 1e-5);
  CHECK(err < 1e-6);
}

TEST_CASE("batched matmul matches per-sample results and gradients") {
  const auto av = random_values(2 * 3 * 4, 3);
  const auto bv = random_values(4 * 2, 4);
  Tape<double> tape;
  auto a = variable(tape, {2, 3, 4}, av);
  auto b = variable(tape, {4, 2}, bv);
  auto c = matmul(a, b);
  REQUIRE(c.shape() == Shape{2, 3, 2});
  for (int n = 0; n < 2; ++n) {
    Tape<double> t2;
    std::vector<double> slice(av.begin() + n * 12, av.begin() + (n + 1) * 12);
    auto cn = matmul(constant(t2, {3, 4}, slice), constant(t2, {4, 2}, bv));
    for (int i = 0; i < 6; ++i)
      CHECK(c.value()[static_cast<size_t>(n) * 6 + i] ==
            doctest::Approx(cn.value()[static_cast<size_t>(i)]).epsilon(1e-12));
  }
  auto build = [](Tape<double>& tp, const std::vector<Tensor<double>>& in) {
    return reduce_sum(hadamard(matmul(in[0], in[1]), matmul(in[0], in[1])));
  };
  CHECK(grad_check<double>(build, {{{2, 3, 4}, av}, {{4, 2}, bv}}, 1e-5) < 1e-6);
}

TEST_CASE("elementwise basics") {
  Tape<double> tape;
  auto x = constant<double>(tape, {3}, {-1, 0, 2});
  CHECK(relu(x).value() == std::vector<double>{0, 0, 2});
  auto z = constant<double>(tape, {1}, {0});
  CHECK(sigmoid(z).value()[0] == doctest::Approx(0.5));

  auto a = constant<double>(tape, {2}, {1, 2});
  auto bad = constant<double>(tape, {3}, {1, 2, 3});
  CHECK_THROWS_AS(add(a, bad), ShapeError);
  CHECK_THROWS_AS(hadamard(a, bad), ShapeError);
}

TEST_CASE("hadamard broadcasts a trailing singleton axis") {
  const auto xv = random_values(24, 5);
  const auto mv = random_values(6, 6);
  Tape<double> tape;
  auto x = variable(tape, {2, 3, 4}, xv);
  auto m = variable(tape, {2, 3, 1}, mv);
  auto y = hadamard(x, m);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 4; ++k)
        CHECK(y.value()[static_cast<size_t>((i * 3 + j) * 4 + k)] ==
              doctest::Approx(xv[static_cast<size_t>((i * 3 + j) * 4 + k)] *
                              mv[static_cast<size_t>(i * 3 + j)]));

  auto build = [](Tape<double>& tp, const std::vector<Tensor<double>>& in) {
    auto h = hadamard(in[0], in[1]);
    return reduce_sum(hadamard(h, h));
  };
  CHECK(grad_check<double>(build, {{{2, 3, 4}, xv}, {{2, 3, 1}, mv}}, 1e-5) < 1e-6);
}

TEST_CASE("softmax closed forms and overflow safety") {
  Tape<double> tape;
  auto a = constant<double>(tape, {2}, {0, 0});
  CHECK(softmax_lastdim(a).value()[0] == doctest::Approx(0.5));

  auto b = constant<double>(tape, {2}, {std::log(1.0), std::log(3.0)});
  auto sb = softmax_lastdim(b).value();
  CHECK(sb[0] == doctest::Approx(0.25));
  CHECK(sb[1] == doctest::Approx(0.75));

  auto c = constant<double>(tape, {3}, {1000, 1000, 1000});
  for (double v : softmax_lastdim(c).value()) CHECK(v == doctest::Approx(1.0 / 3));
}

TEST_CASE("softmax slices sum to one on random inputs") {
  const auto xv = random_values(5 * 7, 7, -50.0, 50.0);
  Tape<double> tape;
  auto y = softmax_lastdim(constant(tape, {5, 7}, xv));
  for (int r = 0; r < 5; ++r) {
    double s = 0;
    for (int j = 0; j < 7; ++j) {
      const double v = y.value()[static_cast<size_t>(r) * 7 + j];
      CHECK(v >= 0.0);
      s += v;
    }
    CHECK(std::abs(s - 1.0) < 1e-6);
  }
}

TEST_CASE("layer_norm zero-variance and standardization cases") {
  Tape<double> tape;
  auto g = constant<double>(tape, {1, 4}, {1, 1, 1, 1});
  auto b = constant<double>(tape, {1, 4}, {0, 0, 0, 0});
  auto x = constant<double>(tape, {1, 4}, {1, 1, 1, 1});
  for (double v : layer_norm(x, g, b, 1e-5).value()) CHECK(v == doctest::Approx(0.0));

  auto g2 = constant<double>(tape, {1, 2}, {1, 1});
  auto b2 = constant<double>(tape, {1, 2}, {0, 0});
  auto x2 = constant<double>(tape, {1, 2}, {1, 3});
  auto y2 = layer_norm(x2, g2, b2, 1e-12).value();
  CHECK(y2[0] == doctest::Approx(-1.0).epsilon(1e-5));
  CHECK(y2[1] == doctest::Approx(1.0).epsilon(1e-5));

  auto gbad = constant<double>(tape, {1, 3}, {1, 1, 1});
  CHECK_THROWS_AS(layer_norm(x2, gbad, b2, 1e-5), ShapeError);
}

TEST_CASE("layer_norm gradients match finite differences") {
  const auto xv = random_values(32, 8);
  const auto gv = random_values(8, 9, 0.5, 1.5);
  const auto bv = random_values(8, 10);
  auto build = [](Tape<double>& tp, const std::vector<Tensor<double>>& in) {
    auto y = layer_norm(in[0], in[1], in[2], 1e-5);
    return reduce_sum(hadamard(y, y));
  };
  const double err =
      grad_check<double>(build, {{{4, 8}, xv}, {{1, 8}, gv}, {{1, 8}, bv}}, 1e-5);
  CHECK(err < 1e-5);
}

TEST_CASE("layer_norm is invariant to a constant shift pre-affine") {
  const auto xv = random_values(16, 11);
  std::vector<double> shifted = xv;
  for (auto& v : shifted) v += 7.25;
  Tape<double> tape;
  auto g = constant<double>(tape, {1, 8}, random_values(8, 12, 0.5, 2.0));
  auto b = constant<double>(tape, {1, 8}, random_values(8, 13));
  auto y1 = layer_norm(constant(tape, {2, 8}, xv), g, b, 1e-9);
  auto y2 = layer_norm(constant(tape, {2, 8}, shifted), g, b, 1e-9);
  for (size_t i = 0; i < y1.value().size(); ++i)
    CHECK(std::abs(y1.value()[i] - y2.value()[i]) < 1e-6);
}

TEST_CASE("pool_lastdim max tie-break and avg") {
  Tape<double> tape;
  auto x = variable<double>(tape, {3}, {3, 7, 7});
  auto m = pool_lastdim(x, PoolKind::kMax);
  CHECK(m.value()[0] == 7);
  tape.backward(reduce_sum(m).id);
  CHECK(x.grad() == std::vector<double>{0, 1, 0});  // lowest maximal index

  auto a = constant<double>(tape, {2}, {2, 4});
  CHECK(pool_lastdim(a, PoolKind::kAvg).value()[0] == doctest::Approx(3.0));
}

TEST_CASE("avg pool gradient is 1/d everywhere") {
  const auto xv = random_values(2 * 3 * 5, 14);
  auto build = [](Tape<double>& tp, const std::vector<Tensor<double>>& in) {
    return reduce_sum(pool_lastdim(in[0], PoolKind::kAvg));
  };
  CHECK(grad_check<double>(build, {{{2, 3, 5}, xv}}, 1e-5) < 1e-8);
  Tape<double> tape;
  auto x = variable(tape, {2, 3, 5}, xv);
  tape.backward(reduce_sum(pool_lastdim(x, PoolKind::kAvg)).id);
  for (double gv : x.grad()) CHECK(gv == doctest::Approx(0.2));
}

TEST_CASE("1x1 conv mixes channels, delta kernel is identity") {
  Tape<double> tape;
  // two input channels a and b over a 2x3 map, weights [1,1], bias 0
  std::vector<double> x = {1, 2, 3, 4, 5, 6, 10, 20, 30, 40, 50, 60};
  auto xin = constant(tape, {2, 2, 3}, x);
  auto w = constant<double>(tape, {1, 2, 1, 1}, {1, 1});
  auto b = constant<double>(tape, {1}, {0});
  auto y = conv2d(xin, w, b);
  REQUIRE(y.shape() == Shape{1, 2, 3});
  for (int i = 0; i < 6; ++i)
    CHECK(y.value()[static_cast<size_t>(i)] ==
          doctest::Approx(x[static_cast<size_t>(i)] + x[static_cast<size_t>(i + 6)]));

  auto seq = constant<double>(tape, {1, 5}, {5, 4, 3, 2, 1});
  auto wk = constant<double>(tape, {1, 1, 3}, {0, 1, 0});
  auto bk = constant<double>(tape, {1}, {0});
  CHECK(conv1d(seq, wk, bk).value() == std::vector<double>{5, 4, 3, 2, 1});
}

TEST_CASE("even kernels are rejected") {
  Tape<double> tape;
  auto x = constant<double>(tape, {1, 4, 4}, std::vector<double>(16, 1.0));
  auto w = constant<double>(tape, {1, 1, 2, 2}, std::vector<double>(4, 1.0));
  auto b = constant<double>(tape, {1}, {0});
  CHECK_THROWS_AS(conv2d(x, w, b), ConfigError);
}

TEST_CASE("2D conv gradients match finite differences") {
  const auto xv = random_values(2 * 4 * 6, 15);
  const auto wv = random_values(3 * 2 * 3 * 3, 16);
  const auto bv = random_values(3, 17);
  auto build = [](Tape<double>& tp, const std::vector<Tensor<double>>& in) {
    auto y = conv2d(in[0], in[1], in[2]);
    return reduce_sum(hadamard(y, y));
  };
  const double err = grad_check<double>(
      build, {{{2, 4, 6}, xv}, {{3, 2, 3, 3}, wv}, {{3}, bv}}, 1e-5);
  CHECK(err < 1e-5);
}

TEST_CASE("1D conv gradients match finite differences") {
  const auto xv = random_values(2 * 7, 18);
  const auto wv = random_values(2 * 2 * 3, 19);
  const auto bv = random_values(2, 20);
  auto build = [](Tape<double>& tp, const std::vector<Tensor<double>>& in) {
    auto y = conv1d(in[0], in[1], in[2]);
    return reduce_sum(hadamard(y, y));
  };
  CHECK(grad_check<double>(build, {{{2, 7}, xv}, {{2, 2, 3}, wv}, {{2}, bv}}, 1e-5) <
        1e-5);
}

TEST_CASE("transpose, reshape, concat round out the op set") {
  const auto xv = random_values(2 * 3 * 4, 21);
  auto build = [](Tape<double>& tp, const std::vector<Tensor<double>>& in) {
    auto t = transpose_last2(in[0]);
    auto r = reshape(t, {2, 12});
    auto c = concat(std::vector<Tensor<double>>{r, scale(r, 2.0)}, 1);
    return reduce_sum(hadamard(c, c));
  };
  CHECK(grad_check<double>(build, {{{2, 3, 4}, xv}}, 1e-5) < 1e-6);

  Tape<double> tape;
  auto x = constant<double>(tape, {2, 2}, {1, 2, 3, 4});
  CHECK(transpose_last2(x).value() == std::vector<double>{1, 3, 2, 4});
}

TEST_CASE("relu subgradient at zero is zero") {
  Tape<double> tape;
  auto x = variable<double>(tape, {3}, {-1, 0, 2});
  tape.backward(reduce_sum(relu(x)).id);
  CHECK(x.grad() == std::vector<double>{0, 0, 1});
}

TEST_CASE("grad_check on a linear function is exact to 1e-10") {
  const auto xv = random_values(6, 22);
  auto build = [](Tape<double>& tp, const std::vector<Tensor<double>>& in) {
    return reduce_sum(scale(in[0], 3.5));
  };
  CHECK(grad_check<double>(build, {{{6}, xv}}, 1e-5) < 1e-10);
}

TEST_CASE("adam first step moves by about -lr * sign(grad)") {
  std::vector<double> p{0.0};
  AdamState<double> st;
  AdamConfig cfg;
  cfg.lr = 0.1;
  adam_step<double>("p", p, {0.37}, st, cfg);
  CHECK(p[0] == doctest::Approx(-0.1).epsilon(1e-6));
  CHECK(st.step == 1);

  std::vector<double> q{1.5};
  AdamState<double> st2;
  adam_step<double>("q", q, {0.0}, st2, cfg);
  CHECK(q[0] == 1.5);  // zero gradient from a fresh state leaves the value
}

TEST_CASE("adam converges on a scalar quadratic") {
  std::vector<double> x{0.0};
  AdamState<double> st;
  AdamConfig cfg;
  cfg.lr = 0.3;
  for (int i = 0; i < 50; ++i) {
    const double g = 2.0 * (x[0] - 3.0);
    adam_step<double>("x", x, {g}, st, cfg);
  }
  CHECK(std::abs(x[0] - 3.0) < 0.5);
}

TEST_CASE("adam rejects non-finite gradients naming the tensor") {
  std::vector<double> p{1.0};
  AdamState<double> st;
  CHECK_THROWS_WITH_AS(adam_step<double>("l1.w", p, {std::nan("")}, st, {}),
                       doctest::Contains("l1.w"), NumericsError);
  CHECK(p[0] == 1.0);
}

TEST_CASE("adam matches the published recurrence to 1e-10") {
  // Closed-form check of two steps at fixed gradients.
  AdamConfig cfg;
  cfg.lr = 0.01;
  std::vector<double> p{0.5};
  AdamState<double> st;
  const double g1 = 0.3, g2 = -0.2;
  adam_step<double>("p", p, {g1}, st, cfg);
  double m = 0.1 * g1, v = 0.001 * g1 * g1;
  double mhat = m / (1 - 0.9), vhat = v / (1 - 0.999);
  double want = 0.5 - cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
  CHECK(p[0] == doctest::Approx(want).epsilon(1e-10));
  adam_step<double>("p", p, {g2}, st, cfg);
  m = 0.9 * m + 0.1 * g2;
  v = 0.999 * v + 0.001 * g2 * g2;
  mhat = m / (1 - 0.9 * 0.9);
  vhat = v / (1 - 0.999 * 0.999);
  want = want - cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
  CHECK(p[0] == doctest::Approx(want).epsilon(1e-10));
}

TEST_CASE("backward visits each node once: repeated use accumulates correctly") {
  // f(x) = sum((x + x) * x) has df/dx = 4x; a double-visit bug would break it.
  const std::vector<double> xv{1.0, -2.0, 0.5};
  Tape<double> tape;
  auto x = variable(tape, {3}, xv);
  auto y = reduce_sum(hadamard(add(x, x), x));
  tape.backward(y.id);
  for (int i = 0; i < 3; ++i)
    CHECK(x.grad()[static_cast<size_t>(i)] == doctest::Approx(4.0 * xv[static_cast<size_t>(i)]));
}

TEST_CASE("parameter store enforces unique names and tracks totals") {
  ParamStore<float> store;
  store.add("a", {2, 2}, std::vector<float>(4, 0.f));
  store.add("b", {3}, std::vector<float>(3, 0.f));
  CHECK(store.total_size() == 7);
  CHECK_THROWS_AS(store.add("a", {1}, {0.f}), ConfigError);
  CHECK(store.find("b") != nullptr);
  CHECK(store.find("c") == nullptr);
}
