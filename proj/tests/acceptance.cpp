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

// Acceptance suite. Each criterion prints exactly one PASS/FAIL line;
// the exit status is the number of failed criteria. Run a single
// criterion with `acceptance <n>`, or everything with no arguments.

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "dacen/complexity.hpp"
#include "dacen/experiment.hpp"

using namespace dacen;
namespace fs = std::filesystem;

namespace {

struct Checker {
  bool ok = true;
  std::string first_failure;

  void expect(bool cond, const std::string& what) {
    if (!cond && ok) {
      ok = false;
      first_failure = what;
    }
  }
  void within(double got, double want, double rel_tol, const std::string& what) {
    const double rel = std::abs(got - want) / std::abs(want);
    expect(rel <= rel_tol, what + ": got " + std::to_string(got) + ", want " +
                               std::to_string(want) + " within " +
                               std::to_string(rel_tol * 100) + "%");
  }
};

std::vector<double> random_values(size_t n, uint64_t seed, double lo = -1.0,
                                  double hi = 1.0) {
  Rng rng(seed);
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(lo, hi);
  return v;
}

// ---- criterion 1: per-layer complexity closed forms ------------------------

bool criterion_1(std::string& detail) {
  Checker c;
  c.expect(tam_flops(64, 512) == 218103808, "tam_flops(64,512)");
  c.expect(sam_flops(4, 32, 512) == 67174656, "sam_flops(4,32,512)");
  c.expect(sconv_flops(4, 32, 3, 512) == 301989888, "sconv_flops(4,32,3,512)");
  c.expect(tconv_flops(64, 3, 512) == 100663296, "tconv_flops(64,3,512)");
  c.within(218103808.0, 218.47e6, 0.005, "TAM vs published");
  c.within(67174656.0, 67.18e6, 0.005, "SAM vs published");
  c.within(301989888.0, 302.06e6, 0.005, "SConv vs published");
  c.within(100663296.0, 100.73e6, 0.005, "TConv vs published");
  c.expect(tconv_params(3, 512, CountConvention::kPaper) == 786944, "TConv params exact");
  c.expect(sam_params(512, 512, CountConvention::kPaper) == 525312, "SAM-FF params exact");
  c.within(static_cast<double>(tam_params(512, 512, CountConvention::kPaper)), 1.58e6,
           0.005, "per-TAM params vs published");
  c.within(static_cast<double>(sconv_params(3, 512, CountConvention::kPaper)), 2.36e6,
           0.005, "SConv params vs published");
  detail = c.first_failure;
  return c.ok;
}

// ---- criterion 2: model-scale parameter totals ------------------------------

bool criterion_2(std::string& detail) {
  Checker c;
  const DacenSpec spec = DacenSpec::paper(6);
  AblationSpec abl;
  c.within(static_cast<double>(count_params(spec, abl, CountConvention::kPaper)),
           17.01e6, 0.01, "DACEN total");
  abl.variant = Variant::kNoSams;
  c.within(static_cast<double>(count_params(spec, abl, CountConvention::kPaper)),
           12.74e6, 0.01, "w/o SAMs total");
  abl.variant = Variant::kNoTams;
  c.within(static_cast<double>(count_params(spec, abl, CountConvention::kPaper)),
           4.27e6, 0.02, "w/o TAMs total");

  // Build the Table-III-scale model and confirm the walked count agrees.
  DacenModel<float> model(spec, {}, 1);
  c.expect(model.params().total_size() ==
               count_params(spec, {}, CountConvention::kFull),
           "built model parameter walk");
  detail = c.first_failure;
  return c.ok;
}

// ---- criterion 3: differentiation correctness -------------------------------

bool criterion_3(std::string& detail) {
  Checker c;
  using Build = std::function<Tensor<double>(Tape<double>&, const std::vector<Tensor<double>>&)>;
  auto check_op = [&](const char* name, const Build& build,
                      std::vector<std::pair<Shape, std::vector<double>>> inputs) {
    const double err = grad_check<double>(build, inputs, 1e-5);
    c.expect(err < 1e-5, std::string(name) + " grad err " + std::to_string(err));
  };

  check_op("matmul",
           [](Tape<double>& t, const std::vector<Tensor<double>>& in) {
             auto y = matmul(in[0], in[1]);
             return reduce_sum(hadamard(y, y));
           },
           {{{3, 4}, random_values(12, 1)}, {{4, 2}, random_values(8, 2)}});
  check_op("relu+sigmoid",
           [](Tape<double>& t, const std::vector<Tensor<double>>& in) {
             return reduce_sum(hadamard(relu(in[0]), sigmoid(in[0])));
           },
           {{{3, 5}, random_values(15, 3)}});
  check_op("softmax",
           [](Tape<double>& t, const std::vector<Tensor<double>>& in) {
             auto y = softmax_lastdim(in[0]);
             return reduce_sum(hadamard(y, in[0]));
           },
           {{{4, 6}, random_values(24, 4)}});
  check_op("layer_norm",
           [](Tape<double>& t, const std::vector<Tensor<double>>& in) {
             auto y = layer_norm(in[0], in[1], in[2], 1e-5);
             return reduce_sum(hadamard(y, y));
           },
           {{{4, 8}, random_values(32, 5)},
            {{1, 8}, random_values(8, 6, 0.5, 1.5)},
            {{1, 8}, random_values(8, 7)}});
  check_op("pool",
           [](Tape<double>& t, const std::vector<Tensor<double>>& in) {
             auto m = pool_lastdim(in[0], PoolKind::kMax);
             auto a = pool_lastdim(in[0], PoolKind::kAvg);
             return reduce_sum(hadamard(m, a));
           },
           {{{2, 3, 5}, random_values(30, 8)}});
  check_op("conv2d",
           [](Tape<double>& t, const std::vector<Tensor<double>>& in) {
             auto y = conv2d(in[0], in[1], in[2]);
             return reduce_sum(hadamard(y, y));
           },
           {{{2, 4, 5}, random_values(40, 9)},
            {{2, 2, 3, 3}, random_values(36, 10)},
            {{2}, random_values(2, 11)}});
  check_op("conv1d",
           [](Tape<double>& t, const std::vector<Tensor<double>>& in) {
             auto y = conv1d(in[0], in[1], in[2]);
             return reduce_sum(hadamard(y, y));
           },
           {{{2, 9}, random_values(18, 12)},
            {{2, 2, 3}, random_values(12, 13)},
            {{2}, random_values(2, 14)}});
  check_op("elementwise",
           [](Tape<double>& t, const std::vector<Tensor<double>>& in) {
             auto y = add(scale(in[0], 1.5), in[1]);
             return reduce_sum(hadamard(y, sub(in[0], in[1])));
           },
           {{{3, 4}, random_values(12, 15)}, {{3, 4}, random_values(12, 16)}});

  // Assembled blocks: a TAM and a SAM at toy scale, every element probed.
  {
    DacenSpec toy;
    toy.d_model = 8;
    toy.d_ff = 8;
    toy.n_heads = 2;
    toy.n_sam = 1;
    toy.n_tam = 1;
    toy.n_taps = 2;
    toy.n_rx = 2;
    toy.n_tx = 3;
    toy.n_pilots = 2;
    DacenModel<double> model(toy, {}, 17);
    std::vector<std::pair<Shape, std::vector<double>>> inputs;
    inputs.push_back({{1, toy.n_rx, toy.n_tx, 2 * toy.n_pilots},
                      random_values(static_cast<size_t>(toy.grid()) * 2 * toy.n_pilots, 18)});
    for (const auto& item : model.params().items()) inputs.push_back({item.shape, item.data});
    auto build = [&model](Tape<double>& t, const std::vector<Tensor<double>>& in) {
      auto y = model.forward(t, in[0], {in.begin() + 1, in.end()});
      return reduce_sum(hadamard(y, y));
    };
    const double err = grad_check<double>(build, inputs, 1e-5);
    c.expect(err < 1e-5, "toy TAM+SAM model grad err " + std::to_string(err));
  }
  // Full desk-scale model, sampled probes across every tensor.
  {
    const DacenSpec desk = DacenSpec::desk(3);
    DacenModel<double> model(desk, {}, 19);
    std::vector<std::pair<Shape, std::vector<double>>> inputs;
    inputs.push_back({{1, desk.n_rx, desk.n_tx, 2 * desk.n_pilots},
                      random_values(static_cast<size_t>(desk.grid()) * 2 * desk.n_pilots, 20)});
    for (const auto& item : model.params().items()) inputs.push_back({item.shape, item.data});
    auto build = [&model](Tape<double>& t, const std::vector<Tensor<double>>& in) {
      auto y = model.forward(t, in[0], {in.begin() + 1, in.end()});
      return reduce_sum(hadamard(y, y));
    };
    const double err = grad_check<double>(build, inputs, 1e-5, 3);
    c.expect(err < 1e-4, "desk-scale model grad err " + std::to_string(err));
  }
  detail = c.first_failure;
  return c.ok;
}

// ---- criterion 4: transform correctness -------------------------------------

bool criterion_4(std::string& detail) {
  Checker c;
  Rng rng(21);
  for (int n : {4, 16, 64}) {
    std::vector<cd> x(static_cast<size_t>(n));
    for (auto& z : x) z = rng.cnormal();
    const auto want = naive_idft(x);
    auto got = x;
    ifft(got);
    double err = 0;
    for (size_t i = 0; i < x.size(); ++i) err = std::max(err, std::abs(got[i] - want[i]));
    c.expect(err < 1e-12, "naive DFT oracle at N=" + std::to_string(n));
  }
  {
    std::vector<cd> x(1024);
    for (auto& z : x) z = rng.cnormal();
    auto y = x;
    ifft(y);
    double before = 0, after = 0;
    for (const auto& z : x) before += std::norm(z);
    for (const auto& z : y) after += std::norm(z);
    c.expect(std::abs(after - before / 1024.0) / (before / 1024.0) < 1e-9, "Parseval");
    fft(y);
    double err = 0;
    for (size_t i = 0; i < x.size(); ++i) err = std::max(err, std::abs(y[i] - x[i]));
    c.expect(err < 1e-10, "roundtrip at N=1024");
  }
  {
    // linearity of the truncated transform
    TransformConfig tc;
    tc.n_ifft = 128;
    tc.n_taps = 16;
    ComplexTensor3 a(1, 2, 96), b(1, 2, 96);
    for (auto& z : a.v) z = rng.cnormal();
    for (auto& z : b.v) z = rng.cnormal();
    ComplexTensor3 mix(1, 2, 96);
    const cd ca(0.5, 1.5), cb(-1.0, 0.25);
    for (size_t i = 0; i < mix.v.size(); ++i) mix.v[i] = ca * a.v[i] + cb * b.v[i];
    const auto ta = freq_to_time(a, tc), tb = freq_to_time(b, tc), tm = freq_to_time(mix, tc);
    double err = 0;
    for (size_t i = 0; i < tm.v.size(); ++i)
      err = std::max(err, std::abs(tm.v[i] - (ca * ta.v[i] + cb * tb.v[i])));
    c.expect(err < 1e-9, "linearity");
  }
  {
    // tau = 5/f_s concentrates on tap 5
    TransformConfig tc;
    tc.n_ifft = 1024;
    tc.n_taps = 64;
    ComplexTensor3 h(1, 1, 1024);
    for (int k = 0; k < 1024; ++k)
      h.at(0, 0, k) = std::exp(cd(0.0, -2.0 * M_PI * k * 5.0 / 1024.0));
    const ComplexTensor3 ht = freq_to_time(h, tc);
    double window = 0, total = 0;
    for (int p = 0; p < 64; ++p) {
      const double e = std::norm(ht.at(0, 0, p));
      total += e;
      if (p >= 4 && p <= 6) window += e;
    }
    c.expect(window / total > 0.99, "tap-5 concentration " + std::to_string(window / total));
  }
  detail = c.first_failure;
  return c.ok;
}

// ---- criterion 5: transfer-pipeline properties ------------------------------

bool criterion_5(std::string& detail) {
  Checker c;
  c.expect(low_density_indices({1, 4, 6, 0.9}, 26) == std::vector<int>{1, 5, 9, 13, 17, 21},
           "preset rho 6/52");
  c.expect(low_density_indices({5, 5, 4, 0.9}, 26) == std::vector<int>{5, 10, 15, 20},
           "preset rho 4/52");
  const auto left = offset_indices({5, 5, 4, 0.9}, 26, -1);
  const auto right = offset_indices({5, 5, 4, 0.9}, 26, +1);
  c.expect(left && *left == std::vector<int>{4, 9, 14, 19}, "left neighbors");
  c.expect(right && *right == std::vector<int>{6, 11, 16, 21}, "right neighbors");
  c.expect(low_density_indices({9, 8, 2, 0.9}, 26) == std::vector<int>{9, 17},
           "preset rho 2/52");

  SystemConfig cfg = SystemConfig::desk();
  cfg.n_clusters = 4;
  TransformConfig tc;
  tc.n_ifft = 128;
  tc.n_taps = 16;
  const DatasetBundle ds = make_dataset(cfg, tc, 20, 2, 2, 4,
                                        PilotPattern::evenly_spaced(4, cfg.n_rb), 10.0, 31);
  const auto train_ids = ds.sample_ids(Split::kTrain);
  const size_t n = train_ids.size();

  const auto base_only = build_extended_trainset(ds, train_ids, {1, 2, 2, 1.5});
  c.expect(base_only.samples.size() == n, "s_th > 1 keeps the base set");
  for (const auto& s : base_only.samples)
    c.expect(s.weight == 1.0 && s.origin == SampleOrigin::kBase, "unit base weights");

  const auto everything = build_extended_trainset(ds, train_ids, {1, 2, 2, 0.0});
  c.expect(everything.samples.size() == 3 * n, "s_th = 0 triples the set");

  size_t prev = SIZE_MAX;
  for (double sth : {0.0, 0.6, 0.9, 0.99, 1.1}) {
    const size_t size = build_extended_trainset(ds, train_ids, {1, 2, 2, sth}).samples.size();
    c.expect(size <= prev, "monotone in the threshold");
    prev = size;
  }

  Rng rng(32);
  ComplexTensor3 y(2, 4, 3);
  for (auto& z : y.v) z = rng.cnormal();
  ComplexTensor3 scaled = y;
  for (auto& z : scaled.v) z *= cd(-1.25, 2.0);
  c.expect(std::abs(cosine_similarity_score(y, scaled) - 1.0) < 1e-12,
           "similarity 1 under global complex scaling");
  ComplexTensor3 a(1, 2, 1), b(1, 2, 1);
  a.at(0, 0, 0) = cd(1, 0);
  b.at(0, 1, 0) = cd(0, 1);
  c.expect(cosine_similarity_score(a, b) == 0.0, "similarity 0 for orthogonal rows");
  detail = c.first_failure;
  return c.ok;
}

// ---- desk-scale presets shared by criteria 6 and 7 --------------------------

struct DeskBench {
  SystemConfig cfg;
  TransformConfig tc;
  DatasetBundle ds;
  SamplerConfig low;  // density 1/8 carved from the 4/8 pilot axis

  static DeskBench make(uint64_t seed) {
    DeskBench b;
    b.cfg = SystemConfig::desk();  // N_T=8, N_R=2, N_c=96, N_RB=8
    b.tc.n_ifft = 128;
    b.tc.n_taps = 16;
    // 200 train UEs x 10 snapshots = 2000 train, 50 x 10 = 500 test
    b.ds = make_dataset(b.cfg, b.tc, 200, 25, 50, 10,
                        PilotPattern::evenly_spaced(4, b.cfg.n_rb), 10.0, seed);
    b.low = SamplerConfig{1, 2, 1, 0.9};
    return b;
  }

  DacenSpec model_spec() const {
    DacenSpec s = DacenSpec::desk(low.n_low);  // d_model 64, N_SA = N_TA = 2
    return s;
  }

  TrainConfig train_cfg(uint64_t seed, int iters) const {
    TrainConfig t;
    t.batch_size = 64;
    t.lr = 2e-3;
    t.max_iters = iters;
    t.val_interval = 50;
    t.seed = seed;
    return t;
  }

  // NMSE of a trained model on the test split at the given SNR.
  double model_nmse(const DacenModel<float>& model, double snr_db) const {
    EvalCell cell;
    cell.sampler = low;
    cell.run_ls = false;
    cell.run_lmmse = false;
    cell.scratch = &model;
    const auto rows = eval_sweep(ds, {cell}, {snr_db}, 555);
    return rows.at(0).nmse_db;
  }
};

// ---- criterion 6: estimation quality at desk scale --------------------------

bool criterion_6(std::string& detail) {
  Checker c;
  DeskBench bench = DeskBench::make(61);
  c.expect(bench.ds.sample_ids(Split::kTrain).size() == 2000, "2000 training samples");
  c.expect(bench.ds.sample_ids(Split::kTest).size() == 500, "500 test samples");

  DacenModel<float> model(bench.model_spec(), {}, 611);
  const DataArrays<float> low = base_low_density_arrays<float>(bench.ds, bench.low);
  const TrainRun run = train_model(model, low, bench.train_cfg(612, 600));
  c.expect(!run.aborted_non_finite, "training stayed finite");

  EvalCell cell;
  cell.sampler = bench.low;
  cell.scratch = &model;
  const auto rows = eval_sweep(bench.ds, {cell}, {10.0}, 555);
  double ls = 0, lmmse = 0, dacen = 0;
  for (const auto& r : rows) {
    if (r.method == "ls") ls = r.nmse_db;
    if (r.method == "lmmse") lmmse = r.nmse_db;
    if (r.method == "dacen") dacen = r.nmse_db;
  }
  std::printf("  [criterion 6] 10 dB, density 1/8: LS %.2f dB, LMMSE %.2f dB, "
              "DACEN %.2f dB\n", ls, lmmse, dacen);
  c.expect(dacen <= ls - 3.0, "DACEN beats LS by 3 dB");
  c.expect(lmmse <= ls - 2.0, "LMMSE beats LS by 2 dB");
  c.expect(dacen < lmmse, "DACEN beats LMMSE at the lowest density");
  detail = c.first_failure;
  return c.ok;
}

// ---- criterion 7: transfer benefit over paired seeds ------------------------

bool criterion_7(std::string& detail) {
  Checker c;
  DeskBench bench = DeskBench::make(71);
  const int n_high = static_cast<int>(bench.ds.pattern.rb_indices.size());
  c.expect(bench.low.n_low * 4 == n_high, "rho_L is a quarter of rho_H");

  // Phase 1 runs once; each paired seed retrains phase 3 and the scratch
  // comparator with its own initialization and shuffling.
  DacenSpec source_spec = DacenSpec::desk(n_high);
  DacenModel<float> source(source_spec, {}, 711);
  const DataArrays<float> high = high_density_arrays<float>(bench.ds);
  const TrainRun source_run = train_model(source, high, bench.train_cfg(712, 600));
  c.expect(!source_run.aborted_non_finite, "source training stayed finite");

  const ExtendedTrainset ext =
      build_extended_trainset(bench.ds, bench.ds.sample_ids(Split::kTrain), bench.low);

  int tl_wins = 0;
  double scratch_acc = 0, tl_acc = 0;
  for (uint64_t seed : {1001, 1002, 1003}) {
    DacenModel<float> scratch(bench.model_spec(), {}, seed);
    DataArrays<float> low = base_low_density_arrays<float>(bench.ds, bench.low);
    train_model(scratch, low, bench.train_cfg(seed, 400));
    const double scratch_nmse = bench.model_nmse(scratch, 10.0);

    DacenModel<float> target(bench.model_spec(), {}, seed + 50);
    transfer_parameters(source, target);
    DataArrays<float> extended = base_low_density_arrays<float>(bench.ds, bench.low);
    extended.train_ids.clear();
    for (const ExtendedSample& s : ext.samples) {
      if (s.origin == SampleOrigin::kBase) {
        extended.train_ids.push_back(s.source_id);
        continue;
      }
      extended.inputs.push_back(pack_im_re<float>(s.y));
      extended.label_of.push_back(s.source_id);
      extended.weights.push_back(static_cast<float>(s.weight));
      extended.train_ids.push_back(static_cast<int>(extended.inputs.size()) - 1);
    }
    train_model(target, extended, bench.train_cfg(seed + 50, 400));
    const double tl_nmse = bench.model_nmse(target, 10.0);

    std::printf("  [criterion 7] seed %llu: scratch %.2f dB, transfer %.2f dB\n",
                static_cast<unsigned long long>(seed), scratch_nmse, tl_nmse);
    scratch_acc += scratch_nmse;
    tl_acc += tl_nmse;
    if (tl_nmse < scratch_nmse) ++tl_wins;
  }
  const double scratch_mean = scratch_acc / 3.0, tl_mean = tl_acc / 3.0;
  std::printf("  [criterion 7] means: scratch %.2f dB, transfer %.2f dB, wins %d/3\n",
              scratch_mean, tl_mean, tl_wins);
  c.expect(tl_mean <= scratch_mean + 0.1, "mean transfer NMSE within 0.1 dB of scratch");
  c.expect(tl_wins >= 2, "transfer strictly better in at least 2 of 3 seeds");
  detail = c.first_failure;
  return c.ok;
}

// ---- criterion 8: determinism and persistence --------------------------------

bool criterion_8(std::string& detail) {
  Checker c;
  const fs::path root = fs::temp_directory_path() / "dacen_acceptance8";
  fs::remove_all(root);

  FlatConfig cfg;
  cfg.set("dataset.n_train_ue", "24");
  cfg.set("dataset.n_val_ue", "3");
  cfg.set("dataset.n_test_ue", "3");
  cfg.set("dataset.snapshots_per_ue", "4");
  cfg.set("train.max_iters", "40");
  cfg.set("train.val_interval", "20");
  cfg.set("transfer.source_max_iters", "40");
  cfg.set("transfer.target_max_iters", "40");
  cfg.set("eval.snrs_db", "10");

  run_experiment(cfg, (root / "a").string());
  run_experiment(cfg, (root / "b").string());
  const std::string ma = read_text_file((root / "a" / "metrics.csv").string());
  const std::string mb = read_text_file((root / "b" / "metrics.csv").string());
  c.expect(!ma.empty() && ma == mb, "metrics.csv byte-identical across reruns");

  // digest mismatch refuses to resume
  FlatConfig other = cfg;
  other.set("train.max_iters", "41");
  bool refused = false;
  try {
    run_experiment(other, (root / "a").string());
  } catch (const std::exception& e) {
    refused = std::string(e.what()).find("digest") != std::string::npos ||
              std::string(e.what()).find("config") != std::string::npos;
  }
  c.expect(refused, "resume with a different config is refused");

  // tensor and checkpoint round-trips are bit-exact; CRC catches corruption
  TensorBlob t;
  t.dtype = Dtype::kComplex64;
  t.dims = {3, 2, 2};
  t.payload.resize(static_cast<size_t>(t.count()) * t.element_size());
  Rng rng(81);
  for (auto& b : t.payload) b = static_cast<uint8_t>(rng.next_u64() & 0xff);
  save_tensor((root / "x.dtns").string(), t);
  c.expect(load_tensor((root / "x.dtns").string()).payload == t.payload,
           "tensor roundtrip bit-exact");

  Checkpoint ck;
  ck.entries.emplace_back("w", t);
  save_checkpoint((root / "x.ckpt").string(), ck);
  c.expect(load_checkpoint((root / "x.ckpt").string()).entries[0].second.payload ==
               t.payload,
           "checkpoint roundtrip bit-exact");
  {
    auto bytes = read_text_file((root / "x.ckpt").string());
    bytes[bytes.size() / 3] = static_cast<char>(bytes[bytes.size() / 3] ^ 0x01);
    write_text_file((root / "bad.ckpt").string(), bytes);
    bool caught = false;
    try {
      load_checkpoint((root / "bad.ckpt").string());
    } catch (const IoError&) {
      caught = true;
    }
    c.expect(caught, "single-byte corruption detected by CRC");
  }
  fs::remove_all(root);
  detail = c.first_failure;
  return c.ok;
}

struct Criterion {
  int number;
  const char* name;
  bool (*fn)(std::string&);
};

const Criterion kCriteria[] = {
    {1, "per-layer complexity closed forms", criterion_1},
    {2, "model-scale parameter totals", criterion_2},
    {3, "differentiation correctness", criterion_3},
    {4, "transform correctness", criterion_4},
    {5, "transfer-pipeline properties", criterion_5},
    {6, "desk-scale estimation quality", criterion_6},
    {7, "transfer benefit over paired seeds", criterion_7},
    {8, "determinism and persistence", criterion_8},
};

}  // namespace

int main(int argc, char** argv) {
  set_tensor_threads(1);
  if (const char* env = std::getenv("DACEN_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) set_tensor_threads(n);
  }
  int failures = 0;
  const int only = argc > 1 ? std::atoi(argv[1]) : 0;
  for (const Criterion& cr : kCriteria) {
    if (only != 0 && cr.number != only) continue;
    std::string detail;
    bool ok = false;
    try {
      ok = cr.fn(detail);
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    std::printf("ACCEPTANCE %d [%s]: %s%s%s\n", cr.number, cr.name,
                ok ? "PASS" : "FAIL", detail.empty() ? "" : " -- ",
                detail.c_str());
    if (!ok) ++failures;
  }
  return failures;
}
