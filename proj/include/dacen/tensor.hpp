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
#include <functional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace dacen {

using Shape = std::vector<int>;

int64_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NumericsError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Number of worker threads tensor kernels may use for row-partitioned
/// loops. Partitions are disjoint, so results are bit-identical for any
/// value. Set once at startup (reads DACEN_THREADS).
void set_tensor_threads(int n);
int tensor_threads();

/// Reverse-mode differentiation tape.
///
/// Nodes are appended in evaluation order, which is already a topological
/// order, so backward() is a single reverse sweep that visits each node
/// exactly once. Gradient buffers exist only on nodes that require
/// gradients (leaves marked learnable and anything reachable from one).
template <typename T>
class Tape {
 public:
  struct Node {
    Shape shape;
    std::vector<T> value;
    std::vector<T> grad;  // sized iff requires_grad
    bool requires_grad = false;
    std::function<void(Tape&)> backward;  // empty for leaves
  };

  int add_leaf(Shape shape, std::vector<T> value, bool requires_grad);
  int add_node(Shape shape, std::vector<T> value, bool requires_grad,
               std::function<void(Tape&)> backward);

  Node& at(int id) { return nodes_[static_cast<size_t>(id)]; }
  const Node& at(int id) const { return nodes_[static_cast<size_t>(id)]; }
  size_t size() const { return nodes_.size(); }

  /// Seeds d(root)/d(root) = 1 and runs the reverse sweep. `root` must be
  /// scalar (numel == 1).
  void backward(int root);

  void zero_grads();

 private:
  std::vector<Node> nodes_;
};

/// Lightweight handle to a tape node.
template <typename T>
struct Tensor {
  Tape<T>* tape = nullptr;
  int id = -1;

  const Shape& shape() const { return tape->at(id).shape; }
  const std::vector<T>& value() const { return tape->at(id).value; }
  const std::vector<T>& grad() const { return tape->at(id).grad; }
  bool requires_grad() const { return tape->at(id).requires_grad; }
  int64_t size() const { return static_cast<int64_t>(value().size()); }
};

template <typename T>
Tensor<T> constant(Tape<T>& tape, Shape shape, std::vector<T> value);
template <typename T>
Tensor<T> variable(Tape<T>& tape, Shape shape, std::vector<T> value);

// ---- ops -------------------------------------------------------------

/// C = A·B. Accepts (m,k)x(k,n), (B,m,k)x(k,n) and (B,m,k)x(B,k,n).
template <typename T>
Tensor<T> matmul(Tensor<T> a, Tensor<T> b);

template <typename T>
Tensor<T> transpose_last2(Tensor<T> a);

/// Same data, new shape (sizes must agree).
template <typename T>
Tensor<T> reshape(Tensor<T> a, Shape shape);

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, int axis);

/// Binary elementwise ops broadcast the second argument: each of its
/// dimensions must equal the first argument's or be 1 (ranks equal).
template <typename T>
Tensor<T> add(Tensor<T> a, Tensor<T> b);
template <typename T>
Tensor<T> sub(Tensor<T> a, Tensor<T> b);
template <typename T>
Tensor<T> hadamard(Tensor<T> a, Tensor<T> b);

template <typename T>
Tensor<T> scale(Tensor<T> a, T factor);

/// relu subgradient at exactly 0 is 0.
template <typename T>
Tensor<T> relu(Tensor<T> a);
template <typename T>
Tensor<T> sigmoid(Tensor<T> a);

/// Max-subtracted softmax along the last axis; every slice sums to 1.
template <typename T>
Tensor<T> softmax_lastdim(Tensor<T> a);

/// Normalizes along the last axis, then applies the affine pair (g, b)
/// of that width.
template <typename T>
Tensor<T> layer_norm(Tensor<T> x, Tensor<T> g, Tensor<T> b, T eps);

enum class PoolKind { kMax, kAvg };

/// Reduces the last axis to length 1. Max routes its gradient to the
/// lowest maximal index.
template <typename T>
Tensor<T> pool_lastdim(Tensor<T> a, PoolKind kind);

/// Same-size cross-correlation with zero padding, odd kernels only.
/// conv1d: x (C_in,L) or (N,C_in,L), w (C_out,C_in,K), b (C_out).
/// conv2d: x (C_in,H,W) or (N,C_in,H,W), w (C_out,C_in,K,K), b (C_out).
template <typename T>
Tensor<T> conv1d(Tensor<T> x, Tensor<T> w, Tensor<T> b);
template <typename T>
Tensor<T> conv2d(Tensor<T> x, Tensor<T> w, Tensor<T> b);

/// Sum of all elements, shape {1}.
template <typename T>
Tensor<T> reduce_sum(Tensor<T> a);

// ---- optimizer ---------------------------------------------------------

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename T>
struct AdamState {
  std::vector<T> m, v;
  int64_t step = 0;
};

/// Bias-corrected Adam update in place. Rejects non-finite gradients with
/// a NumericsError naming the parameter.
template <typename T>
void adam_step(const std::string& name, std::vector<T>& param,
               const std::vector<T>& grad, AdamState<T>& state,
               const AdamConfig& cfg);

// ---- named parameter store ----------------------------------------------

template <typename T>
struct NamedTensor {
  std::string name;
  Shape shape;
  std::vector<T> data;
};

/// Ordered collection of uniquely named learnable tensors. Iteration
/// order is insertion order, which keeps optimizer updates and
/// checkpoints deterministic.
template <typename T>
class ParamStore {
 public:
  NamedTensor<T>& add(std::string name, Shape shape, std::vector<T> data);
  NamedTensor<T>* find(const std::string& name);
  const NamedTensor<T>* find(const std::string& name) const;

  std::vector<NamedTensor<T>>& items() { return items_; }
  const std::vector<NamedTensor<T>>& items() const { return items_; }
  int64_t total_size() const;

 private:
  std::vector<NamedTensor<T>> items_;
  std::unordered_map<std::string, size_t> index_;
};

// ---- numeric gradient oracle ---------------------------------------------

/// Builds a scalar-valued graph from leaf variables, then compares the
/// analytic gradient of every input against central finite differences.
/// Returns max over probed elements of
///   |analytic - numeric| / max(1, |numeric|).
/// With probes_per_input > 0, a deterministic random subset of that many
/// elements per input is probed instead of every element.
template <typename T>
double grad_check(
    const std::function<Tensor<T>(Tape<T>&, const std::vector<Tensor<T>>&)>&
        build,
    const std::vector<std::pair<Shape, std::vector<T>>>& inputs, T step,
    int probes_per_input = -1, uint64_t probe_seed = 0x5eed);

}  // namespace dacen
