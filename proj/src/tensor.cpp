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

#include "dacen/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <limits>
#include <memory>
#include <thread>

#include "dacen/rng.hpp"

namespace dacen {

int64_t numel(const Shape& shape) {
  int64_t n = 1;
  for (int d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::string s = "(";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + ")";
}

namespace {

std::atomic<int> g_threads{1};

void check_shape(bool ok, const std::string& msg) {
  if (!ok) throw ShapeError(msg);
}

// Row-partitioned parallel loop. Chunks are disjoint, so the result is
// bit-identical for any thread count.
template <typename Fn>
void parallel_rows(int64_t n, int64_t min_grain, const Fn& fn) {
  const int threads = g_threads.load(std::memory_order_relaxed);
  if (threads <= 1 || n < 2 * min_grain) {
    fn(0, n);
    return;
  }
  const int workers = static_cast<int>(std::min<int64_t>(threads, n / min_grain));
  if (workers <= 1) {
    fn(0, n);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(static_cast<size_t>(workers - 1));
  const int64_t chunk = (n + workers - 1) / workers;
  for (int w = 1; w < workers; ++w) {
    const int64_t lo = w * chunk;
    const int64_t hi = std::min<int64_t>(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([&fn, lo, hi] { fn(lo, hi); });
  }
  fn(0, std::min<int64_t>(chunk, n));
  for (auto& t : pool) t.join();
}

// C += A(m,k) * B(k,n)
template <typename T>
void mm_nn(const T* a, const T* b, T* c, int m, int k, int n) {
  parallel_rows(m, 16, [=](int64_t lo, int64_t hi) {
    for (int64_t i = lo; i < hi; ++i) {
      T* ci = c + i * n;
      const T* ai = a + i * k;
      for (int l = 0; l < k; ++l) {
        const T av = ai[l];
        const T* bl = b + static_cast<int64_t>(l) * n;
        for (int j = 0; j < n; ++j) ci[j] += av * bl[j];
      }
    }
  });
}

// C += A(m,k) * B(n,k)^T
template <typename T>
void mm_nt(const T* a, const T* b, T* c, int m, int k, int n) {
  parallel_rows(m, 16, [=](int64_t lo, int64_t hi) {
    for (int64_t i = lo; i < hi; ++i) {
      const T* ai = a + i * k;
      T* ci = c + i * n;
      for (int j = 0; j < n; ++j) {
        const T* bj = b + static_cast<int64_t>(j) * k;
        T acc = 0;
        for (int l = 0; l < k; ++l) acc += ai[l] * bj[l];
        ci[j] += acc;
      }
    }
  });
}

// C += A(k,m)^T * B(k,n)
template <typename T>
void mm_tn(const T* a, const T* b, T* c, int m, int k, int n) {
  parallel_rows(m, 16, [=](int64_t lo, int64_t hi) {
    for (int64_t i = lo; i < hi; ++i) {
      T* ci = c + i * n;
      for (int l = 0; l < k; ++l) {
        const T av = a[static_cast<int64_t>(l) * m + i];
        const T* bl = b + static_cast<int64_t>(l) * n;
        for (int j = 0; j < n; ++j) ci[j] += av * bl[j];
      }
    }
  });
}

// Odometer walk pairing every element of `out_shape` with its broadcast
// source offset in a tensor whose dimensions are each equal or 1.
template <typename Fn>
void for_each_broadcast(const Shape& out_shape, const Shape& b_shape, const Fn& fn) {
  const int rank = static_cast<int>(out_shape.size());
  std::vector<int64_t> b_stride(static_cast<size_t>(rank), 0);
  int64_t s = 1;
  for (int d = rank - 1; d >= 0; --d) {
    b_stride[static_cast<size_t>(d)] = (b_shape[static_cast<size_t>(d)] == 1) ? 0 : s;
    s *= b_shape[static_cast<size_t>(d)];
  }
  std::vector<int> idx(static_cast<size_t>(rank), 0);
  const int64_t total = numel(out_shape);
  int64_t b_off = 0;
  for (int64_t i = 0; i < total; ++i) {
    fn(i, b_off);
    for (int d = rank - 1; d >= 0; --d) {
      auto ud = static_cast<size_t>(d);
      if (++idx[ud] < out_shape[ud]) {
        b_off += b_stride[ud];
        break;
      }
      idx[ud] = 0;
      b_off -= b_stride[ud] * (out_shape[ud] - 1);
    }
  }
}

bool broadcast_ok(const Shape& a, const Shape& b) {
  if (a.size() != b.size()) return false;
  for (size_t d = 0; d < a.size(); ++d)
    if (b[d] != a[d] && b[d] != 1) return false;
  return true;
}

}  // namespace

void set_tensor_threads(int n) { g_threads.store(std::max(1, n)); }
int tensor_threads() { return g_threads.load(); }

template <typename T>
int Tape<T>::add_leaf(Shape shape, std::vector<T> value, bool requires_grad) {
  if (static_cast<int64_t>(value.size()) != numel(shape))
    throw ShapeError("leaf data length " + std::to_string(value.size()) +
                     " does not match shape " + shape_str(shape));
  Node n;
  n.shape = std::move(shape);
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  if (requires_grad) n.grad.assign(n.value.size(), T(0));
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

template <typename T>
int Tape<T>::add_node(Shape shape, std::vector<T> value, bool requires_grad,
                      std::function<void(Tape&)> backward) {
  Node n;
  n.shape = std::move(shape);
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  if (requires_grad) {
    n.grad.assign(n.value.size(), T(0));
    n.backward = std::move(backward);
  }
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

template <typename T>
void Tape<T>::backward(int root) {
  Node& r = at(root);
  if (r.value.size() != 1)
    throw ShapeError("backward root must be scalar, got " + shape_str(r.shape));
  if (!r.requires_grad) return;
  r.grad[0] = T(1);
  for (int i = root; i >= 0; --i) {
    Node& n = nodes_[static_cast<size_t>(i)];
    if (n.requires_grad && n.backward) n.backward(*this);
  }
}

template <typename T>
void Tape<T>::zero_grads() {
  for (auto& n : nodes_)
    std::fill(n.grad.begin(), n.grad.end(), T(0));
}

template <typename T>
Tensor<T> constant(Tape<T>& tape, Shape shape, std::vector<T> value) {
  return {&tape, tape.add_leaf(std::move(shape), std::move(value), false)};
}

template <typename T>
Tensor<T> variable(Tape<T>& tape, Shape shape, std::vector<T> value) {
  return {&tape, tape.add_leaf(std::move(shape), std::move(value), true)};
}

template <typename T>
Tensor<T> matmul(Tensor<T> a, Tensor<T> b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  check_shape(sa.size() >= 2 && sa.size() <= 3 && sb.size() >= 2 && sb.size() <= 3 &&
                  !(sa.size() == 2 && sb.size() == 3),
              "matmul expects (m,k)x(k,n), (B,m,k)x(k,n) or (B,m,k)x(B,k,n), got " +
                  shape_str(sa) + " x " + shape_str(sb));
  const bool batched_a = sa.size() == 3;
  const bool batched_b = sb.size() == 3;
  const int batch = batched_a ? sa[0] : 1;
  const int m = sa[batched_a ? 1 : 0];
  const int k = sa[batched_a ? 2 : 1];
  const int kb = sb[batched_b ? 1 : 0];
  const int n = sb[batched_b ? 2 : 1];
  check_shape(k == kb, "matmul inner dimensions disagree: " + shape_str(sa) +
                           " x " + shape_str(sb));
  check_shape(!batched_b || sb[0] == batch,
              "matmul batch sizes disagree: " + shape_str(sa) + " x " + shape_str(sb));

  Shape out_shape = batched_a ? Shape{batch, m, n} : Shape{m, n};
  std::vector<T> out(static_cast<size_t>(numel(out_shape)), T(0));
  const T* pa = a.value().data();
  const T* pb = b.value().data();
  const int64_t a_step = static_cast<int64_t>(m) * k;
  const int64_t b_step = batched_b ? static_cast<int64_t>(k) * n : 0;
  const int64_t c_step = static_cast<int64_t>(m) * n;
  for (int bi = 0; bi < batch; ++bi)
    mm_nn(pa + bi * a_step, pb + bi * b_step, out.data() + bi * c_step, m, k, n);

  bool rg = a.requires_grad() || b.requires_grad();
  Tape<T>& tape = *a.tape;
  int aid = a.id, bid = b.id;
  int id = tape.add_node(std::move(out_shape), std::move(out), rg, nullptr);
  if (rg) {
    tape.at(id).backward = [aid, bid, id, batch, m, k, n, a_step, b_step,
                            c_step](Tape<T>& tp) {
      const auto& dc = tp.at(id).grad;
      auto& na = tp.at(aid);
      auto& nb = tp.at(bid);
      for (int bi = 0; bi < batch; ++bi) {
        const T* dci = dc.data() + bi * c_step;
        if (na.requires_grad)  // dA += dC * B^T
          mm_nt(dci, nb.value.data() + bi * b_step, na.grad.data() + bi * a_step,
                m, n, k);
        if (nb.requires_grad)  // dB += A^T * dC
          mm_tn(na.value.data() + bi * a_step, dci, nb.grad.data() + bi * b_step,
                k, m, n);
      }
    };
  }
  return {&tape, id};
}

template <typename T>
Tensor<T> transpose_last2(Tensor<T> a) {
  const Shape& s = a.shape();
  check_shape(s.size() >= 2, "transpose_last2 needs rank >= 2, got " + shape_str(s));
  const int m = s[s.size() - 2];
  const int n = s[s.size() - 1];
  const int64_t batch = numel(s) / (static_cast<int64_t>(m) * n);
  Shape out_shape = s;
  out_shape[s.size() - 2] = n;
  out_shape[s.size() - 1] = m;

  std::vector<T> out(a.value().size());
  const T* pa = a.value().data();
  for (int64_t bi = 0; bi < batch; ++bi) {
    const T* src = pa + bi * m * n;
    T* dst = out.data() + bi * m * n;
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) dst[static_cast<int64_t>(j) * m + i] = src[static_cast<int64_t>(i) * n + j];
  }
  Tape<T>& tape = *a.tape;
  int aid = a.id;
  bool rg = a.requires_grad();
  int id = tape.add_node(std::move(out_shape), std::move(out), rg, nullptr);
  if (rg) {
    tape.at(id).backward = [aid, id, batch, m, n](Tape<T>& tp) {
      const auto& dout = tp.at(id).grad;
      auto& g = tp.at(aid).grad;
      for (int64_t bi = 0; bi < batch; ++bi) {
        const T* src = dout.data() + bi * m * n;
        T* dst = g.data() + bi * m * n;
        for (int j = 0; j < n; ++j)
          for (int i = 0; i < m; ++i) dst[static_cast<int64_t>(i) * n + j] += src[static_cast<int64_t>(j) * m + i];
      }
    };
  }
  return {&tape, id};
}

template <typename T>
Tensor<T> reshape(Tensor<T> a, Shape shape) {
  check_shape(numel(shape) == a.size(), "reshape from " + shape_str(a.shape()) +
                                            " to " + shape_str(shape) +
                                            " changes element count");
  Tape<T>& tape = *a.tape;
  int aid = a.id;
  bool rg = a.requires_grad();
  std::vector<T> out = a.value();
  int id = tape.add_node(std::move(shape), std::move(out), rg, nullptr);
  if (rg) {
    tape.at(id).backward = [aid, id](Tape<T>& tp) {
      const auto& dout = tp.at(id).grad;
      auto& g = tp.at(aid).grad;
      for (size_t i = 0; i < g.size(); ++i) g[i] += dout[i];
    };
  }
  return {&tape, id};
}

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, int axis) {
  check_shape(!parts.empty(), "concat of zero tensors");
  const Shape& s0 = parts[0].shape();
  const int rank = static_cast<int>(s0.size());
  check_shape(axis >= 0 && axis < rank, "concat axis out of range");
  int axis_total = 0;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    check_shape(static_cast<int>(s.size()) == rank, "concat rank mismatch");
    for (int d = 0; d < rank; ++d)
      check_shape(d == axis || s[static_cast<size_t>(d)] == s0[static_cast<size_t>(d)],
                  "concat shapes disagree off-axis: " + shape_str(s0) + " vs " +
                      shape_str(s));
    axis_total += s[static_cast<size_t>(axis)];
  }
  Shape out_shape = s0;
  out_shape[static_cast<size_t>(axis)] = axis_total;
  int64_t outer = 1, inner = 1;
  for (int d = 0; d < axis; ++d) outer *= s0[static_cast<size_t>(d)];
  for (int d = axis + 1; d < rank; ++d) inner *= s0[static_cast<size_t>(d)];

  std::vector<T> out(static_cast<size_t>(numel(out_shape)));
  int64_t off = 0;
  bool rg = false;
  std::vector<int> ids;
  std::vector<int64_t> spans;
  for (const auto& p : parts) {
    const int64_t span = p.shape()[static_cast<size_t>(axis)] * inner;
    for (int64_t o = 0; o < outer; ++o)
      std::memcpy(out.data() + o * axis_total * inner + off,
                  p.value().data() + o * span, static_cast<size_t>(span) * sizeof(T));
    off += span;
    rg = rg || p.requires_grad();
    ids.push_back(p.id);
    spans.push_back(span);
  }
  Tape<T>& tape = *parts[0].tape;
  int id = tape.add_node(std::move(out_shape), std::move(out), rg, nullptr);
  if (rg) {
    const int64_t total_span = static_cast<int64_t>(axis_total) * inner;
    tape.at(id).backward = [ids, spans, id, outer, total_span](Tape<T>& tp) {
      const auto& dout = tp.at(id).grad;
      int64_t off2 = 0;
      for (size_t pi = 0; pi < ids.size(); ++pi) {
        auto& np = tp.at(ids[pi]);
        if (np.requires_grad) {
          for (int64_t o = 0; o < outer; ++o) {
            const T* src = dout.data() + o * total_span + off2;
            T* dst = np.grad.data() + o * spans[pi];
            for (int64_t i = 0; i < spans[pi]; ++i) dst[i] += src[i];
          }
        }
        off2 += spans[pi];
      }
    };
  }
  return {&tape, id};
}

namespace {

enum class BinKind { kAdd, kSub, kMul };

template <typename T>
Tensor<T> binary_op(Tensor<T> a, Tensor<T> b, BinKind kind, const char* name) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  check_shape(broadcast_ok(sa, sb), std::string(name) + ": shape " + shape_str(sb) +
                                        " does not broadcast to " + shape_str(sa));
  const bool same = sa == sb;
  std::vector<T> out(a.value().size());
  const T* pa = a.value().data();
  const T* pb = b.value().data();
  if (same) {
    for (size_t i = 0; i < out.size(); ++i) {
      switch (kind) {
        case BinKind::kAdd: out[i] = pa[i] + pb[i]; break;
        case BinKind::kSub: out[i] = pa[i] - pb[i]; break;
        case BinKind::kMul: out[i] = pa[i] * pb[i]; break;
      }
    }
  } else {
    for_each_broadcast(sa, sb, [&](int64_t i, int64_t j) {
      switch (kind) {
        case BinKind::kAdd: out[static_cast<size_t>(i)] = pa[i] + pb[j]; break;
        case BinKind::kSub: out[static_cast<size_t>(i)] = pa[i] - pb[j]; break;
        case BinKind::kMul: out[static_cast<size_t>(i)] = pa[i] * pb[j]; break;
      }
    });
  }
  Tape<T>& tape = *a.tape;
  int aid = a.id, bid = b.id;
  bool rg = a.requires_grad() || b.requires_grad();
  Shape out_shape = sa;
  Shape b_shape = sb;
  int id = tape.add_node(std::move(out_shape), std::move(out), rg, nullptr);
  if (rg) {
    tape.at(id).backward = [aid, bid, id, kind, same, b_shape](Tape<T>& tp) {
      const auto& dout = tp.at(id).grad;
      auto& na = tp.at(aid);
      auto& nb = tp.at(bid);
      const T sgn = (kind == BinKind::kSub) ? T(-1) : T(1);
      if (kind == BinKind::kMul) {
        if (same) {
          if (na.requires_grad)
            for (size_t i = 0; i < dout.size(); ++i) na.grad[i] += dout[i] * nb.value[i];
          if (nb.requires_grad)
            for (size_t i = 0; i < dout.size(); ++i) nb.grad[i] += dout[i] * na.value[i];
        } else {
          for_each_broadcast(tp.at(id).shape, b_shape, [&](int64_t i, int64_t j) {
            if (na.requires_grad)
              na.grad[static_cast<size_t>(i)] += dout[static_cast<size_t>(i)] * nb.value[static_cast<size_t>(j)];
            if (nb.requires_grad)
              nb.grad[static_cast<size_t>(j)] += dout[static_cast<size_t>(i)] * na.value[static_cast<size_t>(i)];
          });
        }
      } else {
        if (na.requires_grad)
          for (size_t i = 0; i < dout.size(); ++i) na.grad[i] += dout[i];
        if (nb.requires_grad) {
          if (same) {
            for (size_t i = 0; i < dout.size(); ++i) nb.grad[i] += sgn * dout[i];
          } else {
            for_each_broadcast(tp.at(id).shape, b_shape, [&](int64_t i, int64_t j) {
              nb.grad[static_cast<size_t>(j)] += sgn * dout[static_cast<size_t>(i)];
            });
          }
        }
      }
    };
  }
  return {&tape, id};
}

}  // namespace

template <typename T>
Tensor<T> add(Tensor<T> a, Tensor<T> b) {
  return binary_op(a, b, BinKind::kAdd, "add");
}
template <typename T>
Tensor<T> sub(Tensor<T> a, Tensor<T> b) {
  return binary_op(a, b, BinKind::kSub, "sub");
}
template <typename T>
Tensor<T> hadamard(Tensor<T> a, Tensor<T> b) {
  return binary_op(a, b, BinKind::kMul, "hadamard");
}

template <typename T>
Tensor<T> scale(Tensor<T> a, T factor) {
  std::vector<T> out(a.value().size());
  const T* pa = a.value().data();
  for (size_t i = 0; i < out.size(); ++i) out[i] = pa[i] * factor;
  Tape<T>& tape = *a.tape;
  int aid = a.id;
  bool rg = a.requires_grad();
  int id = tape.add_node(a.shape(), std::move(out), rg, nullptr);
  if (rg) {
    tape.at(id).backward = [aid, id, factor](Tape<T>& tp) {
      const auto& dout = tp.at(id).grad;
      auto& g = tp.at(aid).grad;
      for (size_t i = 0; i < g.size(); ++i) g[i] += factor * dout[i];
    };
  }
  return {&tape, id};
}

template <typename T>
Tensor<T> relu(Tensor<T> a) {
  std::vector<T> out(a.value().size());
  const T* pa = a.value().data();
  for (size_t i = 0; i < out.size(); ++i) out[i] = pa[i] > T(0) ? pa[i] : T(0);
  Tape<T>& tape = *a.tape;
  int aid = a.id;
  bool rg = a.requires_grad();
  int id = tape.add_node(a.shape(), std::move(out), rg, nullptr);
  if (rg) {
    tape.at(id).backward = [aid, id](Tape<T>& tp) {
      const auto& dout = tp.at(id).grad;
      auto& na = tp.at(aid);
      for (size_t i = 0; i < dout.size(); ++i)
        if (na.value[i] > T(0)) na.grad[i] += dout[i];
    };
  }
  return {&tape, id};
}

template <typename T>
Tensor<T> sigmoid(Tensor<T> a) {
  std::vector<T> out(a.value().size());
  const T* pa = a.value().data();
  for (size_t i = 0; i < out.size(); ++i) {
    const T x = pa[i];
    out[i] = x >= T(0) ? T(1) / (T(1) + std::exp(-x))
                       : std::exp(x) / (T(1) + std::exp(x));
  }
  Tape<T>& tape = *a.tape;
  int aid = a.id;
  bool rg = a.requires_grad();
  int id = tape.add_node(a.shape(), std::move(out), rg, nullptr);
  if (rg) {
    tape.at(id).backward = [aid, id](Tape<T>& tp) {
      const auto& node = tp.at(id);
      auto& g = tp.at(aid).grad;
      for (size_t i = 0; i < node.grad.size(); ++i) {
        const T y = node.value[i];
        g[i] += node.grad[i] * y * (T(1) - y);
      }
    };
  }
  return {&tape, id};
}

template <typename T>
Tensor<T> softmax_lastdim(Tensor<T> a) {
  const Shape& s = a.shape();
  check_shape(!s.empty() && s.back() >= 1, "softmax_lastdim needs a last axis");
  const int d = s.back();
  const int64_t slices = numel(s) / d;
  std::vector<T> out(a.value().size());
  const T* pa = a.value().data();
  for (int64_t r = 0; r < slices; ++r) {
    const T* x = pa + r * d;
    T* y = out.data() + r * d;
    T mx = x[0];
    for (int j = 1; j < d; ++j) mx = std::max(mx, x[j]);
    T sum = 0;
    for (int j = 0; j < d; ++j) {
      y[j] = std::exp(x[j] - mx);
      sum += y[j];
    }
    const T inv = T(1) / sum;
    for (int j = 0; j < d; ++j) y[j] *= inv;
  }
  Tape<T>& tape = *a.tape;
  int aid = a.id;
  bool rg = a.requires_grad();
  int id = tape.add_node(a.shape(), std::move(out), rg, nullptr);
  if (rg) {
    tape.at(id).backward = [aid, id, slices, d](Tape<T>& tp) {
      const auto& node = tp.at(id);
      auto& g = tp.at(aid).grad;
      for (int64_t r = 0; r < slices; ++r) {
        const T* y = node.value.data() + r * d;
        const T* dy = node.grad.data() + r * d;
        T dot = 0;
        for (int j = 0; j < d; ++j) dot += dy[j] * y[j];
        T* gx = g.data() + r * d;
        for (int j = 0; j < d; ++j) gx[j] += y[j] * (dy[j] - dot);
      }
    };
  }
  return {&tape, id};
}

template <typename T>
Tensor<T> layer_norm(Tensor<T> x, Tensor<T> g, Tensor<T> b, T eps) {
  const Shape& s = x.shape();
  check_shape(!s.empty(), "layer_norm needs rank >= 1");
  const int d = s.back();
  check_shape(static_cast<int64_t>(g.size()) == d && static_cast<int64_t>(b.size()) == d,
              "layer_norm affine width mismatch: input " + shape_str(s) +
                  ", g " + shape_str(g.shape()) + ", b " + shape_str(b.shape()));
  if (eps <= T(0)) throw ConfigError("layer_norm eps must be positive");
  const int64_t slices = numel(s) / d;
  std::vector<T> out(x.value().size());
  std::vector<T> xhat(x.value().size());
  std::vector<T> inv_std(static_cast<size_t>(slices));
  const T* px = x.value().data();
  const T* pg = g.value().data();
  const T* pb = b.value().data();
  for (int64_t r = 0; r < slices; ++r) {
    const T* xr = px + r * d;
    T mean = 0;
    for (int j = 0; j < d; ++j) mean += xr[j];
    mean /= T(d);
    T var = 0;
    for (int j = 0; j < d; ++j) {
      const T c = xr[j] - mean;
      var += c * c;
    }
    var /= T(d);
    const T inv = T(1) / std::sqrt(var + eps);
    inv_std[static_cast<size_t>(r)] = inv;
    T* hr = xhat.data() + r * d;
    T* yr = out.data() + r * d;
    for (int j = 0; j < d; ++j) {
      hr[j] = (xr[j] - mean) * inv;
      yr[j] = hr[j] * pg[j] + pb[j];
    }
  }
  Tape<T>& tape = *x.tape;
  int xid = x.id, gid = g.id, bid = b.id;
  bool rg = x.requires_grad() || g.requires_grad() || b.requires_grad();
  int id = tape.add_node(x.shape(), std::move(out), rg, nullptr);
  if (rg) {
    auto xh = std::make_shared<std::vector<T>>(std::move(xhat));
    auto istd = std::make_shared<std::vector<T>>(std::move(inv_std));
    tape.at(id).backward = [xid, gid, bid, id, slices, d, xh, istd](Tape<T>& tp) {
      const auto& dout = tp.at(id).grad;
      auto& nx = tp.at(xid);
      auto& ng = tp.at(gid);
      auto& nb = tp.at(bid);
      const T* pg2 = ng.value.data();
      for (int64_t r = 0; r < slices; ++r) {
        const T* dy = dout.data() + r * d;
        const T* hr = xh->data() + r * d;
        if (ng.requires_grad)
          for (int j = 0; j < d; ++j) ng.grad[static_cast<size_t>(j)] += dy[j] * hr[j];
        if (nb.requires_grad)
          for (int j = 0; j < d; ++j) nb.grad[static_cast<size_t>(j)] += dy[j];
        if (nx.requires_grad) {
          T mean_u = 0, mean_uh = 0;
          for (int j = 0; j < d; ++j) {
            const T u = dy[j] * pg2[j];
            mean_u += u;
            mean_uh += u * hr[j];
          }
          mean_u /= T(d);
          mean_uh /= T(d);
          const T inv = (*istd)[static_cast<size_t>(r)];
          T* gx = nx.grad.data() + r * d;
          for (int j = 0; j < d; ++j) {
            const T u = dy[j] * pg2[j];
            gx[j] += inv * (u - mean_u - hr[j] * mean_uh);
          }
        }
      }
    };
  }
  return {&tape, id};
}

template <typename T>
Tensor<T> pool_lastdim(Tensor<T> a, PoolKind kind) {
  const Shape& s = a.shape();
  check_shape(!s.empty() && s.back() >= 1, "pool_lastdim needs a last axis");
  const int d = s.back();
  const int64_t slices = numel(s) / d;
  Shape out_shape = s;
  out_shape.back() = 1;
  std::vector<T> out(static_cast<size_t>(slices));
  std::vector<int> argmax;
  const T* pa = a.value().data();
  if (kind == PoolKind::kMax) {
    argmax.resize(static_cast<size_t>(slices));
    for (int64_t r = 0; r < slices; ++r) {
      const T* x = pa + r * d;
      int best = 0;
      for (int j = 1; j < d; ++j)
        if (x[j] > x[best]) best = j;  // ties keep the lowest index
      out[static_cast<size_t>(r)] = x[best];
      argmax[static_cast<size_t>(r)] = best;
    }
  } else {
    for (int64_t r = 0; r < slices; ++r) {
      const T* x = pa + r * d;
      T sum = 0;
      for (int j = 0; j < d; ++j) sum += x[j];
      out[static_cast<size_t>(r)] = sum / T(d);
    }
  }
  Tape<T>& tape = *a.tape;
  int aid = a.id;
  bool rg = a.requires_grad();
  int id = tape.add_node(std::move(out_shape), std::move(out), rg, nullptr);
  if (rg) {
    auto am = std::make_shared<std::vector<int>>(std::move(argmax));
    tape.at(id).backward = [aid, id, slices, d, kind, am](Tape<T>& tp) {
      const auto& dout = tp.at(id).grad;
      auto& g = tp.at(aid).grad;
      if (kind == PoolKind::kMax) {
        for (int64_t r = 0; r < slices; ++r)
          g[static_cast<size_t>(r * d + (*am)[static_cast<size_t>(r)])] += dout[static_cast<size_t>(r)];
      } else {
        const T inv = T(1) / T(d);
        for (int64_t r = 0; r < slices; ++r) {
          const T v = dout[static_cast<size_t>(r)] * inv;
          T* gx = g.data() + r * d;
          for (int j = 0; j < d; ++j) gx[j] += v;
        }
      }
    };
  }
  return {&tape, id};
}

namespace {

// Shared same-padded cross-correlation for 1D (H = 1) and 2D geometry.
// x (N,Cin,H,W), w (Cout,Cin,KH,KW), b (Cout) -> out (N,Cout,H,W).
template <typename T>
Tensor<T> conv_impl(Tensor<T> x, Tensor<T> w, Tensor<T> b, bool two_d,
                    const char* name) {
  const Shape& sx = x.shape();
  const Shape& sw = w.shape();
  const int spatial = two_d ? 2 : 1;
  const int rank_nobatch = 1 + spatial;
  check_shape(static_cast<int>(sx.size()) == rank_nobatch ||
                  static_cast<int>(sx.size()) == rank_nobatch + 1,
              std::string(name) + ": input rank must be " +
                  std::to_string(rank_nobatch) + " or " +
                  std::to_string(rank_nobatch + 1) + ", got " + shape_str(sx));
  check_shape(static_cast<int>(sw.size()) == 2 + spatial,
              std::string(name) + ": bad kernel shape " + shape_str(sw));
  const bool batched = static_cast<int>(sx.size()) == rank_nobatch + 1;
  const int nb = batched ? sx[0] : 1;
  const int cin = sx[batched ? 1 : 0];
  const int h = two_d ? sx[batched ? 2 : 1] : 1;
  const int wdt = sx[sx.size() - 1];
  const int cout = sw[0];
  const int kh = two_d ? sw[2] : 1;
  const int kw = sw[sw.size() - 1];
  check_shape(sw[1] == cin, std::string(name) + ": kernel expects " +
                                std::to_string(sw[1]) + " input channels, input has " +
                                std::to_string(cin));
  check_shape(static_cast<int64_t>(b.size()) == cout,
              std::string(name) + ": bias length must equal output channels");
  if (kh % 2 == 0 || kw % 2 == 0)
    throw ConfigError(std::string(name) + ": kernel size must be odd, got " +
                      shape_str(sw));
  const int ph = (kh - 1) / 2;
  const int pw = (kw - 1) / 2;

  Shape out_shape = sx;
  out_shape[batched ? 1 : 0] = cout;
  std::vector<T> out(static_cast<size_t>(numel(out_shape)));
  const T* px = x.value().data();
  const T* pwt = w.value().data();
  const T* pbias = b.value().data();
  const int64_t plane = static_cast<int64_t>(h) * wdt;
  const int64_t x_step = static_cast<int64_t>(cin) * plane;
  const int64_t o_step = static_cast<int64_t>(cout) * plane;
  for (int n = 0; n < nb; ++n) {
    for (int co = 0; co < cout; ++co) {
      T* o = out.data() + n * o_step + co * plane;
      for (int64_t i = 0; i < plane; ++i) o[i] = pbias[co];
      for (int ci = 0; ci < cin; ++ci) {
        const T* xi = px + n * x_step + ci * plane;
        const T* wk = pwt + (static_cast<int64_t>(co) * cin + ci) * kh * kw;
        for (int i = 0; i < h; ++i)
          for (int ki = 0; ki < kh; ++ki) {
            const int si = i + ki - ph;
            if (si < 0 || si >= h) continue;
            for (int j = 0; j < wdt; ++j) {
              T acc = 0;
              for (int kj = 0; kj < kw; ++kj) {
                const int sj = j + kj - pw;
                if (sj < 0 || sj >= wdt) continue;
                acc += wk[ki * kw + kj] * xi[static_cast<int64_t>(si) * wdt + sj];
              }
              o[static_cast<int64_t>(i) * wdt + j] += acc;
            }
          }
      }
    }
  }
  Tape<T>& tape = *x.tape;
  int xid = x.id, wid = w.id, bid = b.id;
  bool rg = x.requires_grad() || w.requires_grad() || b.requires_grad();
  int id = tape.add_node(std::move(out_shape), std::move(out), rg, nullptr);
  if (rg) {
    tape.at(id).backward = [xid, wid, bid, id, nb, cin, cout, h, wdt, kh, kw, ph,
                            pw, plane, x_step, o_step](Tape<T>& tp) {
      const auto& dout = tp.at(id).grad;
      auto& nx = tp.at(xid);
      auto& nw = tp.at(wid);
      auto& nbias = tp.at(bid);
      for (int n = 0; n < nb; ++n) {
        for (int co = 0; co < cout; ++co) {
          const T* dov = dout.data() + n * o_step + co * plane;
          if (nbias.requires_grad) {
            T acc = 0;
            for (int64_t i = 0; i < plane; ++i) acc += dov[i];
            nbias.grad[static_cast<size_t>(co)] += acc;
          }
          for (int ci = 0; ci < cin; ++ci) {
            const T* xi = nx.value.data() + n * x_step + ci * plane;
            const int64_t wbase = (static_cast<int64_t>(co) * cin + ci) * kh * kw;
            for (int i = 0; i < h; ++i)
              for (int ki = 0; ki < kh; ++ki) {
                const int si = i + ki - ph;
                if (si < 0 || si >= h) continue;
                for (int j = 0; j < wdt; ++j) {
                  const T dv = dov[static_cast<int64_t>(i) * wdt + j];
                  if (dv == T(0)) continue;
                  for (int kj = 0; kj < kw; ++kj) {
                    const int sj = j + kj - pw;
                    if (sj < 0 || sj >= wdt) continue;
                    const int64_t xoff = static_cast<int64_t>(si) * wdt + sj;
                    if (nw.requires_grad)
                      nw.grad[static_cast<size_t>(wbase + ki * kw + kj)] += dv * xi[xoff];
                    if (nx.requires_grad)
                      nx.grad[static_cast<size_t>(n * x_step + ci * plane + xoff)] +=
                          dv * nw.value[static_cast<size_t>(wbase + ki * kw + kj)];
                  }
                }
              }
          }
        }
      }
    };
  }
  return {&tape, id};
}

}  // namespace

template <typename T>
Tensor<T> conv1d(Tensor<T> x, Tensor<T> w, Tensor<T> b) {
  return conv_impl(x, w, b, false, "conv1d");
}

template <typename T>
Tensor<T> conv2d(Tensor<T> x, Tensor<T> w, Tensor<T> b) {
  return conv_impl(x, w, b, true, "conv2d");
}

template <typename T>
Tensor<T> reduce_sum(Tensor<T> a) {
  T sum = 0;
  for (const T v : a.value()) sum += v;
  Tape<T>& tape = *a.tape;
  int aid = a.id;
  bool rg = a.requires_grad();
  int id = tape.add_node({1}, {sum}, rg, nullptr);
  if (rg) {
    tape.at(id).backward = [aid, id](Tape<T>& tp) {
      const T d = tp.at(id).grad[0];
      auto& g = tp.at(aid).grad;
      for (auto& v : g) v += d;
    };
  }
  return {&tape, id};
}

template <typename T>
void adam_step(const std::string& name, std::vector<T>& param,
               const std::vector<T>& grad, AdamState<T>& state,
               const AdamConfig& cfg) {
  if (param.size() != grad.size())
    throw ShapeError("adam_step '" + name + "': param size " +
                     std::to_string(param.size()) + " vs grad size " +
                     std::to_string(grad.size()));
  if (state.m.empty()) {
    state.m.assign(param.size(), T(0));
    state.v.assign(param.size(), T(0));
  }
  if (state.m.size() != param.size())
    throw ShapeError("adam_step '" + name + "': moment buffers not shape-matched");
  for (const T gv : grad)
    if (!std::isfinite(static_cast<double>(gv)))
      throw NumericsError("adam_step '" + name + "': non-finite gradient, update rejected");

  state.step += 1;
  const double b1 = cfg.beta1, b2 = cfg.beta2;
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  for (size_t i = 0; i < param.size(); ++i) {
    const double g = static_cast<double>(grad[i]);
    const double m = b1 * static_cast<double>(state.m[i]) + (1.0 - b1) * g;
    const double v = b2 * static_cast<double>(state.v[i]) + (1.0 - b2) * g * g;
    state.m[i] = static_cast<T>(m);
    state.v[i] = static_cast<T>(v);
    const double mhat = m / bc1;
    const double vhat = v / bc2;
    param[i] = static_cast<T>(static_cast<double>(param[i]) -
                              cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps));
  }
}

template <typename T>
NamedTensor<T>& ParamStore<T>::add(std::string name, Shape shape, std::vector<T> data) {
  if (index_.count(name))
    throw ConfigError("duplicate parameter name '" + name + "'");
  if (static_cast<int64_t>(data.size()) != numel(shape))
    throw ShapeError("parameter '" + name + "': data length does not match " +
                     shape_str(shape));
  index_[name] = items_.size();
  items_.push_back({std::move(name), std::move(shape), std::move(data)});
  return items_.back();
}

template <typename T>
NamedTensor<T>* ParamStore<T>::find(const std::string& name) {
  auto it = index_.find(name);
  return it == index_.end() ? nullptr : &items_[it->second];
}

template <typename T>
const NamedTensor<T>* ParamStore<T>::find(const std::string& name) const {
  auto it = index_.find(name);
  return it == index_.end() ? nullptr : &items_[it->second];
}

template <typename T>
int64_t ParamStore<T>::total_size() const {
  int64_t n = 0;
  for (const auto& t : items_) n += static_cast<int64_t>(t.data.size());
  return n;
}

template <typename T>
double grad_check(
    const std::function<Tensor<T>(Tape<T>&, const std::vector<Tensor<T>>&)>& build,
    const std::vector<std::pair<Shape, std::vector<T>>>& inputs, T step,
    int probes_per_input, uint64_t probe_seed) {
  auto eval = [&](const std::vector<std::vector<T>>& data) {
    Tape<T> tape;
    std::vector<Tensor<T>> leaves;
    leaves.reserve(inputs.size());
    for (size_t i = 0; i < inputs.size(); ++i)
      leaves.push_back(variable(tape, inputs[i].first, data[i]));
    Tensor<T> out = build(tape, leaves);
    if (out.size() != 1)
      throw ShapeError("grad_check subgraph must be scalar-valued");
    return out.value()[0];
  };

  // Analytic pass.
  Tape<T> tape;
  std::vector<Tensor<T>> leaves;
  std::vector<std::vector<T>> data;
  for (const auto& [shape, values] : inputs) {
    data.push_back(values);
    leaves.push_back(variable(tape, shape, values));
  }
  Tensor<T> out = build(tape, leaves);
  if (out.size() != 1) throw ShapeError("grad_check subgraph must be scalar-valued");
  tape.backward(out.id);

  Rng rng(probe_seed);
  double max_err = 0.0;
  for (size_t i = 0; i < inputs.size(); ++i) {
    const size_t n = data[i].size();
    std::vector<size_t> probe;
    if (probes_per_input > 0 && static_cast<size_t>(probes_per_input) < n) {
      for (int p = 0; p < probes_per_input; ++p)
        probe.push_back(static_cast<size_t>(rng.uniform_int(static_cast<int>(n))));
    } else {
      probe.resize(n);
      for (size_t e = 0; e < n; ++e) probe[e] = e;
    }
    for (size_t e : probe) {
      const T saved = data[i][e];
      data[i][e] = saved + step;
      const double fp = static_cast<double>(eval(data));
      data[i][e] = saved - step;
      const double fm = static_cast<double>(eval(data));
      data[i][e] = saved;
      const double numeric = (fp - fm) / (2.0 * static_cast<double>(step));
      const double analytic = static_cast<double>(leaves[i].grad()[e]);
      const double err = std::abs(analytic - numeric) / std::max(1.0, std::abs(numeric));
      max_err = std::max(max_err, err);
    }
  }
  return max_err;
}

// Explicit instantiations for the two supported precisions.
#define DACEN_INSTANTIATE(T)                                                      \
  template class Tape<T>;                                                         \
  template class ParamStore<T>;                                                   \
  template Tensor<T> constant(Tape<T>&, Shape, std::vector<T>);                   \
  template Tensor<T> variable(Tape<T>&, Shape, std::vector<T>);                   \
  template Tensor<T> matmul(Tensor<T>, Tensor<T>);                                \
  template Tensor<T> transpose_last2(Tensor<T>);                                  \
  template Tensor<T> reshape(Tensor<T>, Shape);                                   \
  template Tensor<T> concat(const std::vector<Tensor<T>>&, int);                  \
  template Tensor<T> add(Tensor<T>, Tensor<T>);                                   \
  template Tensor<T> sub(Tensor<T>, Tensor<T>);                                   \
  template Tensor<T> hadamard(Tensor<T>, Tensor<T>);                              \
  template Tensor<T> scale(Tensor<T>, T);                                         \
  template Tensor<T> relu(Tensor<T>);                                             \
  template Tensor<T> sigmoid(Tensor<T>);                                          \
  template Tensor<T> softmax_lastdim(Tensor<T>);                                  \
  template Tensor<T> layer_norm(Tensor<T>, Tensor<T>, Tensor<T>, T);              \
  template Tensor<T> pool_lastdim(Tensor<T>, PoolKind);                           \
  template Tensor<T> conv1d(Tensor<T>, Tensor<T>, Tensor<T>);                     \
  template Tensor<T> conv2d(Tensor<T>, Tensor<T>, Tensor<T>);                     \
  template Tensor<T> reduce_sum(Tensor<T>);                                       \
  template void adam_step(const std::string&, std::vector<T>&,                    \
                          const std::vector<T>&, AdamState<T>&, const AdamConfig&); \
  template double grad_check(                                                     \
      const std::function<Tensor<T>(Tape<T>&, const std::vector<Tensor<T>>&)>&,   \
      const std::vector<std::pair<Shape, std::vector<T>>>&, T, int, uint64_t);

DACEN_INSTANTIATE(float)
DACEN_INSTANTIATE(double)

#undef DACEN_INSTANTIATE

}  // namespace dacen
