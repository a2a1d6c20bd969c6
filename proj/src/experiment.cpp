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

#include "dacen/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <map>
#include <sstream>

#include "dacen/complexity.hpp"

namespace dacen {

namespace fs = std::filesystem;

namespace {

TensorBlob blob_from_samples(const DatasetBundle& ds,
                             const ComplexTensor3 DatasetSample::*field) {
  const ComplexTensor3& first = ds.samples.front().*field;
  TensorBlob t;
  t.dtype = Dtype::kComplex64;
  t.dims = {static_cast<int64_t>(ds.samples.size()), first.d0, first.d1, first.d2};
  t.payload.resize(static_cast<size_t>(t.count()) * t.element_size());
  float* out = reinterpret_cast<float*>(t.payload.data());
  for (const DatasetSample& s : ds.samples) {
    const ComplexTensor3& x = s.*field;
    for (const cd& z : x.v) {
      *out++ = static_cast<float>(z.real());
      *out++ = static_cast<float>(z.imag());
    }
  }
  return t;
}

void samples_from_blob(const TensorBlob& t, DatasetBundle& ds,
                       ComplexTensor3 DatasetSample::*field) {
  if (t.dtype != Dtype::kComplex64 || t.dims.size() != 4)
    throw IoError("dataset tensor must be rank-4 complex64");
  if (t.dims[0] != static_cast<int64_t>(ds.samples.size()))
    throw IoError("dataset tensor sample count mismatch");
  const float* in = reinterpret_cast<const float*>(t.payload.data());
  for (DatasetSample& s : ds.samples) {
    ComplexTensor3 x(static_cast<int>(t.dims[1]), static_cast<int>(t.dims[2]),
                     static_cast<int>(t.dims[3]));
    for (cd& z : x.v) {
      const float re = *in++;
      const float im = *in++;
      z = cd(re, im);
    }
    s.*field = std::move(x);
  }
}

std::string join_ints(const std::vector<int>& v) {
  std::string out;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(v[i]);
  }
  return out;
}

std::vector<int> split_ints(const std::string& s) {
  std::vector<int> out;
  std::istringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) out.push_back(std::stoi(item));
  return out;
}

}  // namespace

FlatConfig dataset_manifest(const DatasetBundle& ds) {
  FlatConfig m;
  m.set("format.kind", "dacen-dataset");
  m.set("format.version", "1");
  m.set("system.n_tx", std::to_string(ds.cfg.n_tx));
  m.set("system.n_rx", std::to_string(ds.cfg.n_rx));
  m.set("system.n_subcarriers", std::to_string(ds.cfg.n_subcarriers));
  m.set("system.n_rb", std::to_string(ds.cfg.n_rb));
  m.set("system.sc_per_rb", std::to_string(ds.cfg.sc_per_rb));
  m.set("system.sample_rate_hz", format_double(ds.cfg.sample_rate_hz));
  m.set("system.carrier_hz", format_double(ds.cfg.carrier_hz));
  m.set("system.scs_hz", format_double(ds.cfg.scs_hz));
  m.set("system.n_clusters", std::to_string(ds.cfg.n_clusters));
  m.set("system.rician_k_db", format_double(ds.cfg.rician_k_db));
  m.set("system.delay_taps", std::to_string(ds.cfg.delay_taps));
  m.set("system.snapshot_sigma", format_double(ds.cfg.snapshot_sigma));
  m.set("transform.n_ifft", std::to_string(ds.tc.n_ifft));
  m.set("transform.n_taps", std::to_string(ds.tc.n_taps));
  m.set("pattern.rb_indices", join_ints(ds.pattern.rb_indices));
  m.set("pattern.despread_gain", std::to_string(ds.pattern.despread_gain));
  m.set("dataset.snr_db", format_double(ds.snr_db));
  m.set("dataset.seed", std::to_string(ds.seed));
  m.set("dataset.snapshots_per_ue", std::to_string(ds.snapshots_per_ue));
  m.set("dataset.n_train_ue", std::to_string(ds.n_train_ue));
  m.set("dataset.n_val_ue", std::to_string(ds.n_val_ue));
  m.set("dataset.n_test_ue", std::to_string(ds.n_test_ue));
  return m;
}

void save_dataset(const std::string& dir, const DatasetBundle& ds) {
  if (ds.samples.empty()) throw ConfigError("refusing to save an empty dataset");
  fs::create_directories(dir);
  FlatConfig m = dataset_manifest(ds);
  m.set("format.digest", std::to_string(m.digest()));
  write_text_file(dir + "/manifest.cfg", m.serialize());
  save_tensor(dir + "/y.dtns", blob_from_samples(ds, &DatasetSample::y));
  save_tensor(dir + "/hf_centers.dtns", blob_from_samples(ds, &DatasetSample::h_centers));
  save_tensor(dir + "/ht.dtns", blob_from_samples(ds, &DatasetSample::h_taps));
}

DatasetBundle load_dataset(const std::string& dir) {
  const FlatConfig m = FlatConfig::parse_file(dir + "/manifest.cfg");
  if (m.get_or("format.kind", "") != "dacen-dataset")
    throw IoError("'" + dir + "' is not a dataset directory");
  DatasetBundle ds;
  ds.cfg.n_tx = static_cast<int>(m.get_int("system.n_tx"));
  ds.cfg.n_rx = static_cast<int>(m.get_int("system.n_rx"));
  ds.cfg.n_subcarriers = static_cast<int>(m.get_int("system.n_subcarriers"));
  ds.cfg.n_rb = static_cast<int>(m.get_int("system.n_rb"));
  ds.cfg.sc_per_rb = static_cast<int>(m.get_int("system.sc_per_rb"));
  ds.cfg.sample_rate_hz = m.get_double("system.sample_rate_hz");
  ds.cfg.carrier_hz = m.get_double("system.carrier_hz");
  ds.cfg.scs_hz = m.get_double("system.scs_hz");
  ds.cfg.n_clusters = static_cast<int>(m.get_int("system.n_clusters"));
  ds.cfg.rician_k_db = m.get_double("system.rician_k_db");
  ds.cfg.delay_taps = static_cast<int>(m.get_int("system.delay_taps"));
  ds.cfg.snapshot_sigma = m.get_double("system.snapshot_sigma");
  ds.tc.n_ifft = static_cast<int>(m.get_int("transform.n_ifft"));
  ds.tc.n_taps = static_cast<int>(m.get_int("transform.n_taps"));
  ds.pattern.rb_indices = split_ints(m.get("pattern.rb_indices"));
  ds.pattern.despread_gain = static_cast<int>(m.get_int("pattern.despread_gain"));
  ds.snr_db = m.get_double("dataset.snr_db");
  ds.seed = static_cast<uint64_t>(m.get_int("dataset.seed"));
  ds.snapshots_per_ue = static_cast<int>(m.get_int("dataset.snapshots_per_ue"));
  ds.n_train_ue = static_cast<int>(m.get_int("dataset.n_train_ue"));
  ds.n_val_ue = static_cast<int>(m.get_int("dataset.n_val_ue"));
  ds.n_test_ue = static_cast<int>(m.get_int("dataset.n_test_ue"));

  ds.samples.resize(static_cast<size_t>(ds.n_ue()) * ds.snapshots_per_ue);
  for (size_t i = 0; i < ds.samples.size(); ++i) {
    ds.samples[i].ue = static_cast<int>(i) / ds.snapshots_per_ue;
    ds.samples[i].snapshot = static_cast<int>(i) % ds.snapshots_per_ue;
  }
  samples_from_blob(load_tensor(dir + "/y.dtns"), ds, &DatasetSample::y);
  samples_from_blob(load_tensor(dir + "/hf_centers.dtns"), ds, &DatasetSample::h_centers);
  samples_from_blob(load_tensor(dir + "/ht.dtns"), ds, &DatasetSample::h_taps);
  return ds;
}

void save_model(const std::string& dir, const DacenModel<float>& model,
                const SamplerConfig& sampler) {
  fs::create_directories(dir);
  const DacenSpec& s = model.spec();
  FlatConfig m;
  m.set("format.kind", "dacen-model");
  m.set("model.d_model", std::to_string(s.d_model));
  m.set("model.d_ff", std::to_string(s.d_ff));
  m.set("model.n_heads", std::to_string(s.n_heads));
  m.set("model.n_sam", std::to_string(s.n_sam));
  m.set("model.n_tam", std::to_string(s.n_tam));
  m.set("model.pe_omega", format_double(s.pe_omega));
  m.set("model.n_taps", std::to_string(s.n_taps));
  m.set("model.n_rx", std::to_string(s.n_rx));
  m.set("model.n_tx", std::to_string(s.n_tx));
  m.set("model.n_pilots", std::to_string(s.n_pilots));
  m.set("model.ff_on_rc1", s.ff_on_rc1 ? "1" : "0");
  m.set("model.ln_eps", format_double(s.ln_eps));
  m.set("model.variant", to_string(model.ablation().variant));
  m.set("model.k_spatial", std::to_string(model.ablation().k_spatial));
  m.set("model.k_temporal", std::to_string(model.ablation().k_temporal));
  m.set("sampler.r0", std::to_string(sampler.r0));
  m.set("sampler.spacing", std::to_string(sampler.spacing));
  m.set("sampler.n_low", std::to_string(sampler.n_low));
  m.set("sampler.s_threshold", format_double(sampler.s_threshold));
  write_text_file(dir + "/model.cfg", m.serialize());
  save_checkpoint(dir + "/model.ckpt", to_checkpoint(model.params()));
}

ModelArtifact load_model(const std::string& dir) {
  const FlatConfig m = FlatConfig::parse_file(dir + "/model.cfg");
  if (m.get_or("format.kind", "") != "dacen-model")
    throw IoError("'" + dir + "' is not a model directory");
  DacenSpec s;
  s.d_model = static_cast<int>(m.get_int("model.d_model"));
  s.d_ff = static_cast<int>(m.get_int("model.d_ff"));
  s.n_heads = static_cast<int>(m.get_int("model.n_heads"));
  s.n_sam = static_cast<int>(m.get_int("model.n_sam"));
  s.n_tam = static_cast<int>(m.get_int("model.n_tam"));
  s.pe_omega = m.get_double("model.pe_omega");
  s.n_taps = static_cast<int>(m.get_int("model.n_taps"));
  s.n_rx = static_cast<int>(m.get_int("model.n_rx"));
  s.n_tx = static_cast<int>(m.get_int("model.n_tx"));
  s.n_pilots = static_cast<int>(m.get_int("model.n_pilots"));
  s.ff_on_rc1 = m.get_int("model.ff_on_rc1") != 0;
  s.ln_eps = m.get_double("model.ln_eps");
  AblationSpec abl;
  abl.variant = variant_from_string(m.get("model.variant"));
  abl.k_spatial = static_cast<int>(m.get_int("model.k_spatial"));
  abl.k_temporal = static_cast<int>(m.get_int("model.k_temporal"));
  SamplerConfig sc;
  sc.r0 = static_cast<int>(m.get_int("sampler.r0"));
  sc.spacing = static_cast<int>(m.get_int("sampler.spacing"));
  sc.n_low = static_cast<int>(m.get_int("sampler.n_low"));
  sc.s_threshold = m.get_double("sampler.s_threshold");
  ModelArtifact art{DacenModel<float>(s, abl, 0), sc};
  from_checkpoint(load_checkpoint(dir + "/model.ckpt"), art.model.params());
  return art;
}

namespace {

struct CellData {
  PilotPattern low_pattern;
  std::vector<int> test_ids;
  SecondOrderStats base_stats;  // noise_var patched per SNR
};

void eval_cell(const DatasetBundle& ds, const EvalCell& cell,
               const std::vector<double>& snrs_db, uint64_t noise_seed,
               size_t cell_index, std::vector<MetricRow>& rows) {
  const int n_high = static_cast<int>(ds.pattern.rb_indices.size());
  const std::vector<int> base_idx = low_density_indices(cell.sampler, n_high);
  CellData cd_;
  cd_.low_pattern.despread_gain = ds.pattern.despread_gain;
  for (int k : base_idx)
    cd_.low_pattern.rb_indices.push_back(ds.pattern.rb_indices[static_cast<size_t>(k)]);
  cd_.test_ids = ds.sample_ids(Split::kTest);
  if (cd_.test_ids.empty()) throw ConfigError("eval: dataset has no test split");

  if (cell.run_lmmse) {
    std::vector<ComplexTensor3> train_centers;
    for (int id : ds.sample_ids(Split::kTrain))
      train_centers.push_back(ds.samples[static_cast<size_t>(id)].h_centers);
    cd_.base_stats = fit_stats(train_centers, cd_.low_pattern, ds.snr_db);
  }

  const double density = cd_.low_pattern.density(ds.cfg.n_rb);
  const Rng cell_rng = Rng(noise_seed).fork(cell_index);

  for (size_t si = 0; si < snrs_db.size(); ++si) {
    const double snr = snrs_db[si];
    Rng rng = cell_rng.fork(si);
    // One noisy measurement set per (cell, snr), shared by all methods.
    std::vector<PilotSample> observed;
    observed.reserve(cd_.test_ids.size());
    for (int id : cd_.test_ids)
      observed.push_back(transmit_pilots_from_centers(
          ds.samples[static_cast<size_t>(id)].h_centers, cd_.low_pattern, snr, rng));

    auto push_row = [&](const std::string& method, double nmse) {
      rows.push_back({method, density, snr, nmse, static_cast<int>(cd_.test_ids.size()),
                      noise_seed});
    };
    auto nmse_of = [&](auto&& estimator) {
      std::vector<double> err_sq(cd_.test_ids.size()), ref_sq(cd_.test_ids.size());
      for (size_t i = 0; i < cd_.test_ids.size(); ++i) {
        const ComplexTensor3& label =
            ds.samples[static_cast<size_t>(cd_.test_ids[i])].h_taps;
        const ComplexTensor3 est = estimator(observed[i]);
        double e = 0.0;
        for (size_t k = 0; k < label.v.size(); ++k) e += std::norm(label.v[k] - est.v[k]);
        err_sq[i] = e;
        ref_sq[i] = label.sq_norm();
      }
      return nmse_db_from_ratios(err_sq, ref_sq);
    };

    if (cell.run_ls)
      push_row("ls", nmse_of([&](const PilotSample& y) {
                 return ls_estimate(y, cd_.low_pattern, ds.cfg, ds.tc);
               }));
    if (cell.run_lmmse) {
      SecondOrderStats stats = cd_.base_stats;
      stats.noise_var =
          std::pow(10.0, -snr / 10.0) / cd_.low_pattern.despread_gain;
      push_row("lmmse", nmse_of([&](const PilotSample& y) {
                 return lmmse_estimate(y, stats, ds.cfg, ds.tc);
               }));
    }
    auto eval_model = [&](const DacenModel<float>* model, const std::string& name) {
      if (!model) return;
      if (model->spec().n_pilots != static_cast<int>(base_idx.size()))
        throw ConfigError("eval: model '" + name + "' expects " +
                          std::to_string(model->spec().n_pilots) +
                          " pilot RBs, density cell provides " +
                          std::to_string(base_idx.size()));
      std::vector<double> err_sq(cd_.test_ids.size()), ref_sq(cd_.test_ids.size());
      const int batch_cap = 64;
      const int in_w = 2 * model->spec().n_pilots;
      const int out_w = 2 * model->spec().n_taps;
      const size_t in_len = static_cast<size_t>(ds.cfg.n_rx) * ds.cfg.n_tx * in_w;
      for (size_t lo = 0; lo < cd_.test_ids.size(); lo += batch_cap) {
        const size_t hi = std::min(cd_.test_ids.size(), lo + batch_cap);
        std::vector<float> input((hi - lo) * in_len);
        for (size_t i = lo; i < hi; ++i) {
          const auto packed = pack_im_re<float>(observed[i].y);
          std::copy(packed.begin(), packed.end(), input.begin() + (i - lo) * in_len);
        }
        const std::vector<float> pred = model->infer(input, static_cast<int>(hi - lo));
        const size_t out_len = static_cast<size_t>(ds.cfg.n_rx) * ds.cfg.n_tx * out_w;
        for (size_t i = lo; i < hi; ++i) {
          std::vector<float> one(pred.begin() + static_cast<int64_t>((i - lo) * out_len),
                                 pred.begin() + static_cast<int64_t>((i - lo + 1) * out_len));
          const ComplexTensor3 est =
              unpack_im_re(one, ds.cfg.n_rx, ds.cfg.n_tx, model->spec().n_taps);
          const ComplexTensor3& label =
              ds.samples[static_cast<size_t>(cd_.test_ids[i])].h_taps;
          double e = 0.0;
          for (size_t k = 0; k < label.v.size(); ++k)
            e += std::norm(label.v[k] - est.v[k]);
          err_sq[i] = e;
          ref_sq[i] = label.sq_norm();
        }
      }
      push_row(name, nmse_db_from_ratios(err_sq, ref_sq));
    };
    eval_model(cell.scratch, "dacen");
    eval_model(cell.transferred, "dacen+tf");
  }
}

}  // namespace

std::vector<MetricRow> eval_sweep(const DatasetBundle& ds,
                                  const std::vector<EvalCell>& cells,
                                  const std::vector<double>& snrs_db,
                                  uint64_t noise_seed) {
  if (snrs_db.empty()) throw ConfigError("eval: SNR list is empty");
  // Cells are independent; results land in per-cell slots and are
  // concatenated in order, so any future parallel schedule emits
  // identical bytes.
  std::vector<std::vector<MetricRow>> slots(cells.size());
  for (size_t c = 0; c < cells.size(); ++c)
    eval_cell(ds, cells[c], snrs_db, noise_seed, c, slots[c]);
  std::vector<MetricRow> rows;
  for (auto& s : slots) rows.insert(rows.end(), s.begin(), s.end());
  return rows;
}

std::string metrics_csv(const std::vector<MetricRow>& rows) {
  std::ostringstream out;
  out << "method,density,snr_db,nmse_db,n_samples,seed\n";
  for (const auto& r : rows)
    out << r.method << "," << format_double(r.density) << "," << format_double(r.snr_db)
        << "," << format_double(r.nmse_db) << "," << r.n_samples << "," << r.seed
        << "\n";
  return out.str();
}

void write_metric_plots(const std::string& dir, const std::vector<MetricRow>& rows) {
  std::map<double, std::map<std::string, PlotSeries>> by_density;
  for (const auto& r : rows) {
    PlotSeries& s = by_density[r.density][r.method];
    s.label = r.method;
    s.x.push_back(r.snr_db);
    s.y.push_back(r.nmse_db);
  }
  for (const auto& [density, methods] : by_density) {
    std::vector<PlotSeries> series;
    for (const auto& [_, s] : methods) series.push_back(s);
    char name[64];
    std::snprintf(name, sizeof name, "nmse_density_%.4f.svg", density);
    char title[96];
    std::snprintf(title, sizeof title, "NMSE vs SNR at pilot density %.4f", density);
    write_text_file(dir + "/" + name,
                    render_line_plot_svg(title, "SNR (dB)", "NMSE (dB)", series));
  }
}

FlatConfig default_experiment_config() {
  FlatConfig c;
  c.set("system.preset", "desk");
  c.set("transform.n_ifft", "128");
  c.set("transform.n_taps", "16");
  c.set("dataset.n_train_ue", "200");
  c.set("dataset.n_val_ue", "25");
  c.set("dataset.n_test_ue", "50");
  c.set("dataset.snapshots_per_ue", "10");
  c.set("dataset.n_pilot", "4");
  c.set("dataset.snr_db", "10");
  c.set("dataset.seed", "1");
  c.set("model.preset", "desk");
  c.set("model.variant", "full");
  c.set("model.init_seed", "11");
  c.set("train.batch_size", "64");
  c.set("train.lr", "0.002");
  c.set("train.max_iters", "600");
  c.set("train.val_interval", "50");
  c.set("train.seed", "7");
  c.set("transfer.enabled", "1");
  c.set("transfer.r0", "1");
  c.set("transfer.spacing", "2");
  c.set("transfer.n_low", "1");
  c.set("transfer.s_threshold", "0.9");
  c.set("transfer.source_max_iters", "600");
  c.set("transfer.target_max_iters", "600");
  c.set("eval.snrs_db", "5,10,15,20,25");
  c.set("eval.noise_seed", "777");
  return c;
}

namespace {

SystemConfig system_from_config(const FlatConfig& c) {
  SystemConfig s = c.get_or("system.preset", "desk") == "paper" ? SystemConfig::paper()
                                                                : SystemConfig::desk();
  if (c.has("system.n_tx")) s.n_tx = static_cast<int>(c.get_int("system.n_tx"));
  if (c.has("system.n_rx")) s.n_rx = static_cast<int>(c.get_int("system.n_rx"));
  if (c.has("system.n_subcarriers"))
    s.n_subcarriers = static_cast<int>(c.get_int("system.n_subcarriers"));
  if (c.has("system.n_rb")) s.n_rb = static_cast<int>(c.get_int("system.n_rb"));
  if (c.has("system.n_clusters"))
    s.n_clusters = static_cast<int>(c.get_int("system.n_clusters"));
  if (c.has("system.rician_k_db")) s.rician_k_db = c.get_double("system.rician_k_db");
  if (c.has("system.delay_taps"))
    s.delay_taps = static_cast<int>(c.get_int("system.delay_taps"));
  if (c.has("system.snapshot_sigma"))
    s.snapshot_sigma = c.get_double("system.snapshot_sigma");
  return s;
}

DacenSpec model_from_config(const FlatConfig& c, const SystemConfig& sys,
                            const TransformConfig& tc, int n_pilots) {
  DacenSpec m = c.get_or("model.preset", "desk") == "paper" ? DacenSpec::paper(n_pilots)
                                                            : DacenSpec::desk(n_pilots);
  if (c.has("model.d_model")) m.d_model = static_cast<int>(c.get_int("model.d_model"));
  if (c.has("model.d_ff")) m.d_ff = static_cast<int>(c.get_int("model.d_ff"));
  if (c.has("model.n_heads")) m.n_heads = static_cast<int>(c.get_int("model.n_heads"));
  if (c.has("model.n_sam")) m.n_sam = static_cast<int>(c.get_int("model.n_sam"));
  if (c.has("model.n_tam")) m.n_tam = static_cast<int>(c.get_int("model.n_tam"));
  if (c.has("model.pe_omega")) m.pe_omega = c.get_double("model.pe_omega");
  if (c.has("model.ff_on_rc1")) m.ff_on_rc1 = c.get_int("model.ff_on_rc1") != 0;
  m.n_rx = sys.n_rx;
  m.n_tx = sys.n_tx;
  m.n_taps = tc.n_taps;
  m.n_pilots = n_pilots;
  return m;
}

TrainConfig train_from_config(const FlatConfig& c, const std::string& iters_key) {
  TrainConfig t;
  t.batch_size = static_cast<int>(c.get_int("train.batch_size"));
  t.lr = c.get_double("train.lr");
  t.max_iters = static_cast<int>(c.get_int(iters_key));
  t.val_interval = static_cast<int>(c.get_int("train.val_interval"));
  t.seed = static_cast<uint64_t>(c.get_int("train.seed"));
  return t;
}

}  // namespace

void run_experiment(const FlatConfig& user_cfg, const std::string& out_dir) {
  // Resolve on top of the defaults so the digest covers every knob.
  FlatConfig cfg = default_experiment_config();
  for (const auto& [k, v] : user_cfg.entries()) cfg.set(k, v);
  const uint64_t digest = cfg.digest();

  const fs::path root(out_dir);
  const fs::path digest_path = root / "config.digest";
  if (fs::exists(digest_path)) {
    const std::string prev = read_text_file(digest_path.string());
    if (prev != std::to_string(digest))
      throw ConfigError("artifacts directory '" + out_dir +
                        "' was produced by a different config (digest " + prev +
                        " vs " + std::to_string(digest) + "); refusing to resume");
  }
  fs::create_directories(root);
  write_text_file((root / "config.cfg").string(), cfg.serialize());
  write_text_file(digest_path.string(), std::to_string(digest));

  auto stage = [&](const char* name, auto&& fn) {
    try {
      fn();
    } catch (const std::exception& e) {
      throw std::runtime_error("stage '" + std::string(name) + "' failed: " + e.what());
    }
  };

  SystemConfig sys = system_from_config(cfg);
  TransformConfig tc;
  tc.n_ifft = static_cast<int>(cfg.get_int("transform.n_ifft"));
  tc.n_taps = static_cast<int>(cfg.get_int("transform.n_taps"));

  DatasetBundle ds;
  stage("generate", [&] {
    const PilotPattern pattern = PilotPattern::evenly_spaced(
        static_cast<int>(cfg.get_int("dataset.n_pilot")), sys.n_rb);
    DatasetBundle fresh = make_dataset(
        sys, tc, static_cast<int>(cfg.get_int("dataset.n_train_ue")),
        static_cast<int>(cfg.get_int("dataset.n_val_ue")),
        static_cast<int>(cfg.get_int("dataset.n_test_ue")),
        static_cast<int>(cfg.get_int("dataset.snapshots_per_ue")), pattern,
        cfg.get_double("dataset.snr_db"),
        static_cast<uint64_t>(cfg.get_int("dataset.seed")));
    save_dataset((root / "dataset").string(), fresh);
    // Reload so every later stage sees the canonical stored precision.
    ds = load_dataset((root / "dataset").string());
  });

  const int n_high = static_cast<int>(ds.pattern.rb_indices.size());
  SamplerConfig sampler;
  sampler.r0 = static_cast<int>(cfg.get_int("transfer.r0"));
  sampler.spacing = static_cast<int>(cfg.get_int("transfer.spacing"));
  sampler.n_low = static_cast<int>(cfg.get_int("transfer.n_low"));
  sampler.s_threshold = cfg.get_double("transfer.s_threshold");
  sampler.validate(n_high);

  const uint64_t init_seed = static_cast<uint64_t>(cfg.get_int("model.init_seed"));
  AblationSpec abl;
  abl.variant = variant_from_string(cfg.get_or("model.variant", "full"));

  DacenModel<float> scratch(model_from_config(cfg, sys, tc, sampler.n_low), abl,
                            init_seed);
  stage("train", [&] {
    const DataArrays<float> low = base_low_density_arrays<float>(ds, sampler);
    const TrainRun run = train_model(scratch, low, train_from_config(cfg, "train.max_iters"));
    write_text_file((root / "trainlog.csv").string(), trainlog_csv(run));
    save_model((root / "model_scratch").string(), scratch, sampler);
  });

  const bool do_transfer = cfg.get_int("transfer.enabled") != 0;
  std::optional<DacenModel<float>> transferred;
  if (do_transfer) {
    stage("transfer", [&] {
      DacenModel<float> source(model_from_config(cfg, sys, tc, n_high), abl, init_seed + 1);
      transferred.emplace(model_from_config(cfg, sys, tc, sampler.n_low), abl,
                          init_seed + 2);
      const TransferOutcome outcome = run_transfer(
          source, *transferred, ds, sampler,
          train_from_config(cfg, "transfer.source_max_iters"),
          train_from_config(cfg, "transfer.target_max_iters"));
      write_text_file((root / "trainlog_source.csv").string(),
                      trainlog_csv(outcome.source_run));
      write_text_file((root / "trainlog_transfer.csv").string(),
                      trainlog_csv(outcome.target_run));
      write_text_file((root / "weights.csv").string(), weights_csv(outcome.extended.rows));
      save_model((root / "model_source").string(), source,
                 SamplerConfig{0, 1, n_high, sampler.s_threshold});
      save_model((root / "model_transfer").string(), *transferred, sampler);
    });
  }

  stage("eval", [&] {
    std::vector<EvalCell> cells;
    EvalCell high;
    high.sampler = SamplerConfig{0, 1, n_high, sampler.s_threshold};
    cells.push_back(high);
    EvalCell low;
    low.sampler = sampler;
    low.scratch = &scratch;
    low.transferred = transferred ? &*transferred : nullptr;
    cells.push_back(low);
    const std::vector<double> snrs = cfg.get_list("eval.snrs_db");
    const auto rows = eval_sweep(ds, cells, snrs,
                                 static_cast<uint64_t>(cfg.get_int("eval.noise_seed")));
    write_text_file((root / "metrics.csv").string(), metrics_csv(rows));
    write_metric_plots(root.string(), rows);
  });

  stage("complexity", [&] {
    const ComplexityReport paper_rep =
        complexity_report(DacenSpec::paper(6), AblationSpec{});
    write_text_file((root / "complexity.csv").string(), complexity_csv(paper_rep));
    const ComplexityReport own =
        complexity_report(scratch.spec(), scratch.ablation());
    write_text_file((root / "complexity_desk.csv").string(), complexity_csv(own));
  });
}

}  // namespace dacen
