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

#include "dacen/transfer.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "dacen/io.hpp"

namespace dacen {

void SamplerConfig::validate(int n_high) const {
  if (r0 < 0 || spacing < 1 || n_low < 1)
    throw ConfigError("sampler needs r0 >= 0, spacing >= 1, n_low >= 1");
  const int last = r0 + spacing * (n_low - 1);
  if (last > n_high - 1)
    throw std::out_of_range("sampler index " + std::to_string(last) +
                            " exceeds the pilot axis bound " + std::to_string(n_high - 1));
}

std::vector<int> low_density_indices(const SamplerConfig& sc, int n_high) {
  sc.validate(n_high);
  std::vector<int> idx(static_cast<size_t>(sc.n_low));
  for (int k = 0; k < sc.n_low; ++k) idx[static_cast<size_t>(k)] = sc.r0 + sc.spacing * k;
  return idx;
}

std::optional<std::vector<int>> offset_indices(const SamplerConfig& sc, int n_high,
                                               int delta) {
  std::vector<int> idx = low_density_indices(sc, n_high);
  for (int& v : idx) {
    v += delta;
    if (v < 0 || v > n_high - 1) return std::nullopt;  // boundary exclusion
  }
  return idx;
}

ComplexTensor3 select_pilot_slices(const ComplexTensor3& y, const std::vector<int>& idx) {
  for (int k : idx)
    if (k < 0 || k >= y.d2)
      throw std::out_of_range("pilot slice " + std::to_string(k) + " outside [0, " +
                              std::to_string(y.d2 - 1) + "]");
  ComplexTensor3 out(y.d0, y.d1, static_cast<int>(idx.size()));
  for (int r = 0; r < y.d0; ++r)
    for (int t = 0; t < y.d1; ++t)
      for (size_t k = 0; k < idx.size(); ++k)
        out.at(r, t, static_cast<int>(k)) = y.at(r, t, idx[k]);
  return out;
}

double cosine_similarity_score(const ComplexTensor3& a, const ComplexTensor3& b) {
  if (a.d0 != b.d0 || a.d1 != b.d1 || a.d2 != b.d2)
    throw ShapeError("cosine similarity needs equal shapes");
  const int n_low = a.d2;
  double acc = 0.0;
  for (int j = 0; j < n_low; ++j) {
    cd inner(0.0, 0.0);
    double na = 0.0, nb = 0.0;
    for (int r = 0; r < a.d0; ++r)
      for (int t = 0; t < a.d1; ++t) {
        const cd va = a.at(r, t, j);
        const cd vb = b.at(r, t, j);
        inner += va * std::conj(vb);
        na += std::norm(va);
        nb += std::norm(vb);
      }
    if (na == 0.0 || nb == 0.0) {
      std::fprintf(stderr, "cosine_similarity: zero-norm slice %d scored 0\n", j);
      continue;
    }
    acc += std::abs(inner) / std::sqrt(na * nb);
  }
  return acc / static_cast<double>(n_low);
}

std::string to_string(SampleOrigin o) {
  switch (o) {
    case SampleOrigin::kBase: return "base";
    case SampleOrigin::kLeft: return "left";
    case SampleOrigin::kRight: return "right";
  }
  throw ConfigError("bad origin enum");
}

ExtendedTrainset build_extended_trainset(const DatasetBundle& ds,
                                         const std::vector<int>& source_ids,
                                         const SamplerConfig& sc) {
  if (source_ids.empty()) throw ConfigError("extended trainset needs a non-empty source");
  const int n_high = static_cast<int>(ds.pattern.rb_indices.size());
  const std::vector<int> base_idx = low_density_indices(sc, n_high);
  const auto left_idx = offset_indices(sc, n_high, -1);
  const auto right_idx = offset_indices(sc, n_high, +1);

  ExtendedTrainset out;
  for (int id : source_ids) {
    const ComplexTensor3& y_high = ds.samples[static_cast<size_t>(id)].y;
    ComplexTensor3 base = select_pilot_slices(y_high, base_idx);
    out.rows.push_back({id, SampleOrigin::kBase, 1.0, true});
    auto consider = [&](const std::optional<std::vector<int>>& idx, SampleOrigin origin) {
      if (!idx) return;
      ComplexTensor3 neighbor = select_pilot_slices(y_high, *idx);
      const double score = cosine_similarity_score(neighbor, base);
      const bool included = score >= sc.s_threshold;
      out.rows.push_back({id, origin, score, included});
      if (included)
        out.samples.push_back({id, origin, score, std::move(neighbor)});
    };
    consider(left_idx, SampleOrigin::kLeft);
    consider(right_idx, SampleOrigin::kRight);
    out.samples.push_back({id, SampleOrigin::kBase, 1.0, std::move(base)});
  }
  return out;
}

std::string weights_csv(const std::vector<WeightRow>& rows) {
  std::ostringstream out;
  out << "sample_id,origin,score,included\n";
  for (const auto& r : rows)
    out << r.source_id << "," << to_string(r.origin) << "," << format_double(r.score)
        << "," << (r.included ? 1 : 0) << "\n";
  return out.str();
}

template <typename T>
void transfer_parameters(const DacenModel<T>& source, DacenModel<T>& target) {
  std::string mismatched;
  for (auto& item : target.params().items()) {
    if (item.name.rfind("l1.", 0) == 0) continue;  // width follows the pilot count
    const NamedTensor<T>* src = source.params().find(item.name);
    if (!src || src->shape != item.shape) {
      mismatched += mismatched.empty() ? item.name : ", " + item.name;
      continue;
    }
    item.data = src->data;
  }
  for (const auto& item : source.params().items())
    if (item.name.rfind("l1.", 0) != 0 && !target.params().find(item.name))
      mismatched += mismatched.empty() ? item.name : ", " + item.name;
  if (!mismatched.empty())
    throw ConfigError("transfer: specs differ beyond the input layer: " + mismatched);
}

namespace {

template <typename T>
std::vector<T> pack_label(const DatasetBundle& ds, int id) {
  return pack_im_re<T>(ds.samples[static_cast<size_t>(id)].h_taps);
}

template <typename T>
DataArrays<T> arrays_shell(const DatasetBundle& ds, int in_width) {
  DataArrays<T> d;
  d.n_rx = ds.cfg.n_rx;
  d.n_tx = ds.cfg.n_tx;
  d.in_width = in_width;
  d.out_width = 2 * ds.tc.n_taps;
  return d;
}

}  // namespace

template <typename T>
DataArrays<T> high_density_arrays(const DatasetBundle& ds) {
  const int n_high = static_cast<int>(ds.pattern.rb_indices.size());
  DataArrays<T> d = arrays_shell<T>(ds, 2 * n_high);
  d.inputs.reserve(ds.samples.size());
  d.labels.reserve(ds.samples.size());
  for (size_t i = 0; i < ds.samples.size(); ++i) {
    d.inputs.push_back(pack_im_re<T>(ds.samples[i].y));
    d.labels.push_back(pack_label<T>(ds, static_cast<int>(i)));
    d.label_of.push_back(static_cast<int>(i));
    d.weights.push_back(T(1));
  }
  d.train_ids = ds.sample_ids(Split::kTrain);
  d.val_ids = ds.sample_ids(Split::kVal);
  return d;
}

template <typename T>
DataArrays<T> base_low_density_arrays(const DatasetBundle& ds, const SamplerConfig& sc) {
  const int n_high = static_cast<int>(ds.pattern.rb_indices.size());
  const std::vector<int> idx = low_density_indices(sc, n_high);
  DataArrays<T> d = arrays_shell<T>(ds, 2 * static_cast<int>(idx.size()));
  d.inputs.reserve(ds.samples.size());
  d.labels.reserve(ds.samples.size());
  for (size_t i = 0; i < ds.samples.size(); ++i) {
    d.inputs.push_back(pack_im_re<T>(select_pilot_slices(ds.samples[i].y, idx)));
    d.labels.push_back(pack_label<T>(ds, static_cast<int>(i)));
    d.label_of.push_back(static_cast<int>(i));
    d.weights.push_back(T(1));
  }
  d.train_ids = ds.sample_ids(Split::kTrain);
  d.val_ids = ds.sample_ids(Split::kVal);
  return d;
}

template <typename T>
TransferOutcome run_transfer(DacenModel<T>& source, DacenModel<T>& target,
                             const DatasetBundle& ds, const SamplerConfig& sc,
                             const TrainConfig& source_cfg, const TrainConfig& target_cfg) {
  const int n_high = static_cast<int>(ds.pattern.rb_indices.size());
  if (source.spec().n_pilots != n_high)
    throw ConfigError("source model expects " + std::to_string(source.spec().n_pilots) +
                      " pilot RBs, dataset has " + std::to_string(n_high));
  if (target.spec().n_pilots != sc.n_low)
    throw ConfigError("target model expects " + std::to_string(target.spec().n_pilots) +
                      " pilot RBs, sampler yields " + std::to_string(sc.n_low));

  TransferOutcome out;

  // Phase 1: source model on the high-density pilots.
  DataArrays<T> high = high_density_arrays<T>(ds);
  out.source_run = train_model(source, high, source_cfg);

  // Phase 2: sample generation and similarity gating, training split only.
  out.extended = build_extended_trainset(ds, ds.sample_ids(Split::kTrain), sc);

  // Phase 3: instance-weighted training from the transferred parameters.
  // Validation stays on base samples so model selection is unbiased.
  DataArrays<T> low = base_low_density_arrays<T>(ds, sc);
  low.train_ids.clear();
  for (const ExtendedSample& s : out.extended.samples) {
    if (s.origin == SampleOrigin::kBase) {
      low.train_ids.push_back(s.source_id);  // reuse the stored base row
      continue;
    }
    low.inputs.push_back(pack_im_re<T>(s.y));
    low.label_of.push_back(s.source_id);
    low.weights.push_back(static_cast<T>(s.weight));
    low.train_ids.push_back(static_cast<int>(low.inputs.size()) - 1);
  }
  transfer_parameters(source, target);
  out.target_run = train_model(target, low, target_cfg);
  return out;
}

#define DACEN_TRANSFER_INSTANTIATE(T)                                           \
  template void transfer_parameters(const DacenModel<T>&, DacenModel<T>&);      \
  template TransferOutcome run_transfer(DacenModel<T>&, DacenModel<T>&,         \
                                        const DatasetBundle&, const SamplerConfig&, \
                                        const TrainConfig&, const TrainConfig&); \
  template DataArrays<T> base_low_density_arrays(const DatasetBundle&,          \
                                                 const SamplerConfig&);         \
  template DataArrays<T> high_density_arrays(const DatasetBundle&);

DACEN_TRANSFER_INSTANTIATE(float)
DACEN_TRANSFER_INSTANTIATE(double)

#undef DACEN_TRANSFER_INSTANTIATE

}  // namespace dacen
