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

#include "dacen/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <unordered_set>

#include "dacen/io.hpp"
#include "dacen/rng.hpp"

namespace dacen {

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (lr < 0.0) throw ConfigError("learning rate must be >= 0");
  if (max_iters < 1) throw ConfigError("max_iters must be >= 1");
  if (val_interval < 1) throw ConfigError("val_interval must be >= 1");
}

AdamConfig TrainConfig::adam() const {
  AdamConfig a;
  a.lr = lr;
  return a;
}

template <typename T>
void DataArrays<T>::validate() const {
  if (inputs.empty()) throw ConfigError("dataset is empty");
  if (label_of.size() != inputs.size() || weights.size() != inputs.size())
    throw ConfigError("dataset arrays are inconsistent");
  const size_t in_len = static_cast<size_t>(n_rx) * n_tx * in_width;
  const size_t out_len = static_cast<size_t>(n_rx) * n_tx * out_width;
  for (const auto& v : inputs)
    if (v.size() != in_len) throw ShapeError("dataset input row has the wrong length");
  for (const auto& v : labels)
    if (v.size() != out_len) throw ShapeError("dataset label row has the wrong length");
  for (int id : label_of)
    if (id < 0 || static_cast<size_t>(id) >= labels.size())
      throw ConfigError("dataset label reference out of range");
  for (T w : weights)
    if (!(w > T(0))) throw ConfigError("instance weights must be positive");
  // Validation must never see training inputs.
  std::unordered_set<int> train_set(train_ids.begin(), train_ids.end());
  for (int id : val_ids)
    if (train_set.count(id))
      throw ConfigError("sample " + std::to_string(id) + " is in both train and val");
}

template <typename T>
Tensor<T> mse_loss(Tensor<T> pred, Tensor<T> label, Tensor<T> weights) {
  if (pred.shape() != label.shape())
    throw ShapeError("mse_loss: prediction " + shape_str(pred.shape()) +
                     " vs label " + shape_str(label.shape()));
  const int batch = pred.shape()[0];
  Tensor<T> diff = sub(label, pred);
  Tensor<T> sq = hadamard(diff, diff);
  if (weights.id >= 0) {
    Shape wshape(pred.shape().size(), 1);
    wshape[0] = batch;
    if (static_cast<int64_t>(weights.size()) != batch)
      throw ShapeError("mse_loss: weight count must equal the batch size");
    sq = hadamard(sq, reshape(weights, wshape));
  }
  return scale(reduce_sum(sq), T(1) / static_cast<T>(batch));
}

namespace {

template <typename T>
struct BatchBuffers {
  std::vector<T> inputs, labels, weights;
};

template <typename T>
void fill_batch(const DataArrays<T>& data, const std::vector<int>& ids, size_t lo,
                size_t hi, BatchBuffers<T>& buf) {
  const size_t in_len = data.inputs[0].size();
  const size_t out_len = data.labels[0].size();
  const size_t batch = hi - lo;
  buf.inputs.resize(batch * in_len);
  buf.labels.resize(batch * out_len);
  buf.weights.resize(batch);
  for (size_t i = 0; i < batch; ++i) {
    const int id = ids[lo + i];
    std::copy(data.inputs[static_cast<size_t>(id)].begin(),
              data.inputs[static_cast<size_t>(id)].end(), buf.inputs.begin() + i * in_len);
    const auto& lab = data.labels[static_cast<size_t>(data.label_of[static_cast<size_t>(id)])];
    std::copy(lab.begin(), lab.end(), buf.labels.begin() + i * out_len);
    buf.weights[i] = data.weights[static_cast<size_t>(id)];
  }
}

}  // namespace

template <typename T>
double eval_mse(const DacenModel<T>& model, const DataArrays<T>& data,
                const std::vector<int>& ids, int batch_size) {
  if (ids.empty()) return std::numeric_limits<double>::quiet_NaN();
  const size_t out_len = data.labels[0].size();
  BatchBuffers<T> buf;
  double total = 0.0;
  for (size_t lo = 0; lo < ids.size(); lo += static_cast<size_t>(batch_size)) {
    const size_t hi = std::min(ids.size(), lo + static_cast<size_t>(batch_size));
    fill_batch(data, ids, lo, hi, buf);
    const int batch = static_cast<int>(hi - lo);
    Tape<T> tape;
    Tensor<T> x = constant(tape, {batch, data.n_rx, data.n_tx, data.in_width}, buf.inputs);
    const auto bound = model.bind(tape, false);
    const auto& pred = model.forward(tape, x, bound).value();
    for (size_t i = 0; i < static_cast<size_t>(batch) * out_len; ++i) {
      const double d = static_cast<double>(buf.labels[i]) - static_cast<double>(pred[i]);
      total += d * d;
    }
  }
  return total / static_cast<double>(ids.size());
}

template <typename T>
TrainRun train_model(DacenModel<T>& model, const DataArrays<T>& data,
                     const TrainConfig& cfg) {
  cfg.validate();
  data.validate();
  if (data.train_ids.empty()) throw ConfigError("no training samples");
  const auto t0 = std::chrono::steady_clock::now();

  TrainRun run;
  run.best_val = std::numeric_limits<double>::infinity();
  Rng rng(cfg.seed);
  std::vector<int> order = data.train_ids;
  size_t cursor = order.size();  // force an initial shuffle

  const AdamConfig adam_cfg = cfg.adam();
  auto& items = model.params().items();
  std::vector<AdamState<T>> opt(items.size());
  std::vector<std::vector<T>> best;
  BatchBuffers<T> buf;
  double train_acc = 0.0;
  int train_acc_n = 0;

  auto snapshot_best = [&] {
    best.clear();
    best.reserve(items.size());
    for (const auto& item : items) best.push_back(item.data);
  };
  auto restore_best = [&] {
    if (best.empty()) return;
    for (size_t i = 0; i < items.size(); ++i) items[i].data = best[i];
  };
  auto validate_now = [&](int iter) {
    const double val = eval_mse(model, data, data.val_ids, cfg.batch_size);
    const double tr = train_acc_n > 0 ? train_acc / train_acc_n : 0.0;
    run.log.push_back({iter, tr, val});
    train_acc = 0.0;
    train_acc_n = 0;
    if (!std::isnan(val) && val < run.best_val) {
      run.best_val = val;
      run.best_iter = iter;
      snapshot_best();
    }
  };

  for (int iter = 1; iter <= cfg.max_iters; ++iter) {
    if (cursor + static_cast<size_t>(cfg.batch_size) > order.size()) {
      // Fisher-Yates reshuffle at each epoch boundary.
      for (size_t i = order.size(); i > 1; --i)
        std::swap(order[i - 1], order[static_cast<size_t>(rng.uniform_int(static_cast<int>(i)))]);
      cursor = 0;
    }
    const size_t take = std::min(static_cast<size_t>(cfg.batch_size), order.size());
    fill_batch(data, order, cursor, cursor + take, buf);
    cursor += take;
    const int batch = static_cast<int>(take);

    Tape<T> tape;
    Tensor<T> x = constant(tape, {batch, data.n_rx, data.n_tx, data.in_width}, buf.inputs);
    Tensor<T> label = constant(tape, {batch, data.n_rx, data.n_tx, data.out_width}, buf.labels);
    Tensor<T> w = constant(tape, {batch}, buf.weights);
    const auto bound = model.bind(tape, true);
    Tensor<T> pred = model.forward(tape, x, bound);
    Tensor<T> loss = mse_loss(pred, label, w);
    const double loss_v = static_cast<double>(loss.value()[0]);
    if (!std::isfinite(loss_v)) {
      std::fprintf(stderr,
                   "train: non-finite loss at iteration %d, restoring the best "
                   "checkpoint (iteration %d)\n",
                   iter, run.best_iter);
      run.aborted_non_finite = true;
      break;
    }
    train_acc += loss_v;
    ++train_acc_n;
    tape.backward(loss.id);
    if (cfg.lr > 0.0) {
      for (size_t i = 0; i < items.size(); ++i)
        adam_step(items[i].name, items[i].data, bound[i].grad(), opt[i], adam_cfg);
    }
    if (iter % cfg.val_interval == 0 || iter == cfg.max_iters) validate_now(iter);
  }
  if (run.log.empty()) validate_now(0);
  restore_best();
  run.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return run;
}

std::string trainlog_csv(const TrainRun& run) {
  std::ostringstream out;
  out << "iteration,train_mse,val_mse\n";
  for (const auto& row : run.log)
    out << row.iteration << "," << format_double(row.train_mse) << ","
        << format_double(row.val_mse) << "\n";
  return out.str();
}

#define DACEN_TRAIN_INSTANTIATE(T)                                          \
  template struct DataArrays<T>;                                            \
  template Tensor<T> mse_loss(Tensor<T>, Tensor<T>, Tensor<T>);             \
  template TrainRun train_model(DacenModel<T>&, const DataArrays<T>&,       \
                                const TrainConfig&);                        \
  template double eval_mse(const DacenModel<T>&, const DataArrays<T>&,      \
                           const std::vector<int>&, int);

DACEN_TRAIN_INSTANTIATE(float)
DACEN_TRAIN_INSTANTIATE(double)

#undef DACEN_TRAIN_INSTANTIATE

}  // namespace dacen
