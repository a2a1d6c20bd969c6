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

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <string>

#include <CLI11.hpp>

#include "dacen/complexity.hpp"
#include "dacen/experiment.hpp"

namespace fs = std::filesystem;
using namespace dacen;

namespace {

int resolve_threads(int flag_threads, bool deterministic) {
  if (deterministic) return 1;
  if (flag_threads > 0) return flag_threads;
  if (const char* env = std::getenv("DACEN_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return 1;
}

// "k/n" or a plain fraction.
double parse_density(const std::string& s) {
  const auto slash = s.find('/');
  if (slash == std::string::npos) return std::stod(s);
  return std::stod(s.substr(0, slash)) / std::stod(s.substr(slash + 1));
}

SamplerConfig sampler_for_density(double density, int n_rb, int n_high, double sth) {
  SamplerConfig sc;
  sc.s_threshold = sth;
  sc.n_low = std::max(1, static_cast<int>(std::lround(density * n_rb)));
  if (sc.n_low > n_high)
    throw ConfigError("density asks for " + std::to_string(sc.n_low) +
                      " pilot RBs, dataset stores only " + std::to_string(n_high));
  sc.spacing = std::max(1, n_high / sc.n_low);
  while (sc.spacing > 1 && sc.spacing * (sc.n_low - 1) > n_high - 1) --sc.spacing;
  sc.r0 = (n_high - 1 - sc.spacing * (sc.n_low - 1)) / 2;
  sc.validate(n_high);
  return sc;
}

FlatConfig config_from_file_or_default(const std::string& path) {
  if (path.empty()) return FlatConfig();
  return FlatConfig::parse_file(path);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DACEN channel-estimation toolkit: synthetic massive-MIMO pilot "
               "simulator, dual-attention estimator, LS/LMMSE baselines, "
               "transfer-learning pipeline and complexity analyzer"};
  app.require_subcommand(1);

  int threads = 0;
  bool deterministic = false;
  app.add_option("--threads", threads, "worker threads (default: DACEN_THREADS or 1)");
  app.add_flag("--deterministic", deterministic, "force single-threaded execution");

  // generate
  auto* gen = app.add_subcommand("generate", "simulate a pilot/channel dataset");
  std::string gen_preset = "desk", gen_out = "dataset", gen_density = "";
  int gen_ue = 275, gen_snapshots = 10;
  double gen_snr = 10.0;
  uint64_t gen_seed = 1;
  std::string gen_split;
  gen->add_option("--preset", gen_preset, "system preset: paper|desk")
      ->check(CLI::IsMember({"paper", "desk"}));
  gen->add_option("--n-ue", gen_ue, "total UEs");
  gen->add_option("--snapshots", gen_snapshots, "snapshots per UE");
  gen->add_option("--density", gen_density, "pilot density, e.g. 26/52");
  gen->add_option("--snr-db", gen_snr, "generation SNR in dB");
  gen->add_option("--seed", gen_seed, "master seed");
  gen->add_option("--out", gen_out, "output directory")->required();
  gen->add_option("--split-ue", gen_split,
                  "explicit train,val,test UE counts (default 80/10/10%)");

  // train
  auto* train = app.add_subcommand("train", "train an estimator from scratch");
  std::string train_cfg_path, train_dataset, train_variant = "full", train_out = "model";
  uint64_t train_seed = 7;
  train->add_option("--config", train_cfg_path, "flat config file");
  train->add_option("--dataset", train_dataset, "dataset directory")->required();
  train->add_option("--variant", train_variant,
                    "full|no-sams|no-tams|sconv-tam|sam-tconv");
  train->add_option("--seed", train_seed, "training seed");
  train->add_option("--out", train_out, "output directory")->required();

  // transfer
  auto* tf = app.add_subcommand("transfer", "parameter-instance transfer pipeline");
  std::string tf_dataset, tf_out = "transfer", tf_source_cfg, tf_target_cfg;
  int tf_r0 = 1, tf_spacing = 4, tf_nlow = 6;
  double tf_sth = 0.9;
  uint64_t tf_seed = 7;
  tf->add_option("--source-dataset", tf_dataset, "high-density dataset directory")
      ->required();
  tf->add_option("--r0", tf_r0, "starting pilot-axis index (0-based)");
  tf->add_option("--spacing", tf_spacing, "index spacing I");
  tf->add_option("--n-low", tf_nlow, "low-density RB count N_L");
  tf->add_option("--sth", tf_sth, "cosine similarity threshold");
  tf->add_option("--source-config", tf_source_cfg, "flat config for phase 1 training");
  tf->add_option("--target-config", tf_target_cfg, "flat config for phase 3 training");
  tf->add_option("--seed", tf_seed, "training seed");
  tf->add_option("--out", tf_out, "output directory")->required();

  // baseline
  auto* base = app.add_subcommand("baseline", "evaluate LS or LMMSE on a dataset");
  std::string base_method = "ls", base_dataset, base_density = "";
  double base_snr = 10.0;
  base->add_option("--method", base_method, "ls|lmmse")
      ->check(CLI::IsMember({"ls", "lmmse"}));
  base->add_option("--density", base_density, "pilot density, e.g. 6/52");
  base->add_option("--snr-db", base_snr, "evaluation SNR in dB");
  base->add_option("dataset", base_dataset, "dataset directory")->required();

  // eval
  auto* ev = app.add_subcommand("eval", "NMSE sweep over SNR for saved models");
  std::string ev_dataset, ev_out = "eval", ev_scratch, ev_transfer, ev_snrs = "5,10,15,20,25";
  uint64_t ev_noise_seed = 777;
  bool ev_baselines = true;
  ev->add_option("--dataset", ev_dataset, "dataset directory")->required();
  ev->add_option("--model", ev_scratch, "scratch model directory");
  ev->add_option("--transfer-model", ev_transfer, "transferred model directory");
  ev->add_option("--snrs", ev_snrs, "comma-separated SNR list (dB)");
  ev->add_option("--noise-seed", ev_noise_seed, "seed for redrawn test noise");
  ev->add_flag("--baselines,!--no-baselines", ev_baselines, "include LS/LMMSE");
  ev->add_option("--out", ev_out, "output directory")->required();

  // complexity
  auto* cx = app.add_subcommand("complexity", "closed-form FLOPs/parameter tables");
  std::string cx_preset = "paper", cx_variant = "full", cx_convention = "both", cx_out;
  cx->add_option("--preset", cx_preset, "paper|desk")
      ->check(CLI::IsMember({"paper", "desk"}));
  cx->add_option("--variant", cx_variant, "variant for the parameter walk");
  cx->add_option("--convention", cx_convention, "paper|full|both")
      ->check(CLI::IsMember({"paper", "full", "both"}));
  cx->add_option("--out", cx_out, "also write complexity.csv here");

  // run
  auto* run = app.add_subcommand("run", "full pipeline: generate/train/transfer/eval");
  std::string run_cfg_path, run_out = "artifacts";
  run->add_option("--config", run_cfg_path, "flat config file (defaults when absent)");
  run->add_option("--out", run_out, "artifacts directory")->required();

  CLI11_PARSE(app, argc, argv);
  set_tensor_threads(resolve_threads(threads, deterministic));

  try {
    if (*gen) {
      SystemConfig sys = gen_preset == "paper" ? SystemConfig::paper() : SystemConfig::desk();
      TransformConfig tc;
      if (gen_preset == "paper") {
        tc.n_ifft = 1024;
        tc.n_taps = 64;
      } else {
        tc.n_ifft = 128;
        tc.n_taps = 16;
      }
      int n_pilot = gen_preset == "paper" ? 26 : 4;
      if (!gen_density.empty())
        n_pilot = std::max(1, static_cast<int>(std::lround(parse_density(gen_density) * sys.n_rb)));
      int n_train = gen_ue * 8 / 10;
      int n_val = gen_ue / 10;
      int n_test = gen_ue - n_train - n_val;
      if (!gen_split.empty()) {
        if (std::sscanf(gen_split.c_str(), "%d,%d,%d", &n_train, &n_val, &n_test) != 3)
          throw ConfigError("--split-ue expects train,val,test");
      }
      const DatasetBundle ds =
          make_dataset(sys, tc, n_train, n_val, n_test, gen_snapshots,
                       PilotPattern::evenly_spaced(n_pilot, sys.n_rb), gen_snr, gen_seed);
      save_dataset(gen_out, ds);
      std::printf("wrote %zu samples (%d UEs x %d snapshots) to %s\n",
                  ds.samples.size(), ds.n_ue(), gen_snapshots, gen_out.c_str());
    } else if (*train) {
      const DatasetBundle ds = load_dataset(train_dataset);
      const int n_high = static_cast<int>(ds.pattern.rb_indices.size());
      const FlatConfig c = config_from_file_or_default(train_cfg_path);
      SamplerConfig sc;  // identity by default: train at the stored density
      sc.r0 = static_cast<int>(c.has("sampler.r0") ? c.get_int("sampler.r0") : 0);
      sc.spacing = static_cast<int>(c.has("sampler.spacing") ? c.get_int("sampler.spacing") : 1);
      sc.n_low = static_cast<int>(c.has("sampler.n_low") ? c.get_int("sampler.n_low") : n_high);
      sc.validate(n_high);
      DacenSpec spec = c.get_or("model.preset", "desk") == "paper"
                           ? DacenSpec::paper(sc.n_low)
                           : DacenSpec::desk(sc.n_low);
      spec.n_rx = ds.cfg.n_rx;
      spec.n_tx = ds.cfg.n_tx;
      spec.n_taps = ds.tc.n_taps;
      if (c.has("model.d_model")) spec.d_model = static_cast<int>(c.get_int("model.d_model"));
      if (c.has("model.d_ff")) spec.d_ff = static_cast<int>(c.get_int("model.d_ff"));
      if (c.has("model.n_heads")) spec.n_heads = static_cast<int>(c.get_int("model.n_heads"));
      if (c.has("model.n_sam")) spec.n_sam = static_cast<int>(c.get_int("model.n_sam"));
      if (c.has("model.n_tam")) spec.n_tam = static_cast<int>(c.get_int("model.n_tam"));
      AblationSpec abl;
      abl.variant = variant_from_string(train_variant);
      TrainConfig tcfg;
      if (c.has("train.batch_size")) tcfg.batch_size = static_cast<int>(c.get_int("train.batch_size"));
      if (c.has("train.lr")) tcfg.lr = c.get_double("train.lr");
      if (c.has("train.max_iters")) tcfg.max_iters = static_cast<int>(c.get_int("train.max_iters"));
      if (c.has("train.val_interval")) tcfg.val_interval = static_cast<int>(c.get_int("train.val_interval"));
      tcfg.seed = train_seed;
      DacenModel<float> model(spec, abl, train_seed ^ 0xdace);
      const DataArrays<float> data = base_low_density_arrays<float>(ds, sc);
      const TrainRun run = train_model(model, data, tcfg);
      fs::create_directories(train_out);
      write_text_file(train_out + "/trainlog.csv", trainlog_csv(run));
      save_model(train_out, model, sc);
      std::printf("trained %s: best val MSE %.6g at iteration %d (%.1f s)\n",
                  train_variant.c_str(), run.best_val, run.best_iter, run.wall_seconds);
    } else if (*tf) {
      const DatasetBundle ds = load_dataset(tf_dataset);
      const int n_high = static_cast<int>(ds.pattern.rb_indices.size());
      SamplerConfig sc{tf_r0, tf_spacing, tf_nlow, tf_sth};
      sc.validate(n_high);
      auto train_cfg = [&](const std::string& path) {
        const FlatConfig c = config_from_file_or_default(path);
        TrainConfig t;
        if (c.has("train.batch_size")) t.batch_size = static_cast<int>(c.get_int("train.batch_size"));
        if (c.has("train.lr")) t.lr = c.get_double("train.lr");
        if (c.has("train.max_iters")) t.max_iters = static_cast<int>(c.get_int("train.max_iters"));
        if (c.has("train.val_interval")) t.val_interval = static_cast<int>(c.get_int("train.val_interval"));
        t.seed = tf_seed;
        return t;
      };
      DacenSpec src_spec = DacenSpec::desk(n_high);
      src_spec.n_rx = ds.cfg.n_rx;
      src_spec.n_tx = ds.cfg.n_tx;
      src_spec.n_taps = ds.tc.n_taps;
      DacenSpec dst_spec = src_spec;
      dst_spec.n_pilots = sc.n_low;
      DacenModel<float> source(src_spec, {}, tf_seed ^ 0xf00d);
      DacenModel<float> target(dst_spec, {}, tf_seed ^ 0xbeef);
      const TransferOutcome out = run_transfer(source, target, ds, sc,
                                               train_cfg(tf_source_cfg),
                                               train_cfg(tf_target_cfg));
      fs::create_directories(tf_out);
      write_text_file(tf_out + "/weights.csv", weights_csv(out.extended.rows));
      write_text_file(tf_out + "/trainlog_source.csv", trainlog_csv(out.source_run));
      write_text_file(tf_out + "/trainlog_transfer.csv", trainlog_csv(out.target_run));
      save_model(tf_out + "/model_source", source, SamplerConfig{0, 1, n_high, tf_sth});
      save_model(tf_out + "/model_transfer", target, sc);
      std::printf("transfer done: source best val %.6g, target best val %.6g\n",
                  out.source_run.best_val, out.target_run.best_val);
    } else if (*base) {
      const DatasetBundle ds = load_dataset(base_dataset);
      const int n_high = static_cast<int>(ds.pattern.rb_indices.size());
      SamplerConfig sc = base_density.empty()
                             ? SamplerConfig{0, 1, n_high, 0.9}
                             : sampler_for_density(parse_density(base_density),
                                                   ds.cfg.n_rb, n_high, 0.9);
      EvalCell cell;
      cell.sampler = sc;
      cell.run_ls = base_method == "ls";
      cell.run_lmmse = base_method == "lmmse";
      const auto rows = eval_sweep(ds, {cell}, {base_snr}, 777);
      std::printf("%s", metrics_csv(rows).c_str());
    } else if (*ev) {
      const DatasetBundle ds = load_dataset(ev_dataset);
      const int n_high = static_cast<int>(ds.pattern.rb_indices.size());
      std::vector<double> snrs;
      {
        std::istringstream in(ev_snrs);
        std::string item;
        while (std::getline(in, item, ',')) snrs.push_back(std::stod(item));
      }
      std::optional<ModelArtifact> scratch, transferred;
      if (!ev_scratch.empty()) scratch = load_model(ev_scratch);
      if (!ev_transfer.empty()) transferred = load_model(ev_transfer);
      std::vector<EvalCell> cells;
      if (ev_baselines) {
        EvalCell high;
        high.sampler = SamplerConfig{0, 1, n_high, 0.9};
        cells.push_back(high);
      }
      EvalCell low;
      low.sampler = scratch   ? scratch->sampler
                    : transferred ? transferred->sampler
                                  : SamplerConfig{0, 1, n_high, 0.9};
      low.run_ls = low.run_lmmse = ev_baselines;
      low.scratch = scratch ? &scratch->model : nullptr;
      low.transferred = transferred ? &transferred->model : nullptr;
      if (low.scratch || low.transferred || cells.empty()) cells.push_back(low);
      const auto rows = eval_sweep(ds, cells, snrs, ev_noise_seed);
      fs::create_directories(ev_out);
      write_text_file(ev_out + "/metrics.csv", metrics_csv(rows));
      write_metric_plots(ev_out, rows);
      std::printf("%s", metrics_csv(rows).c_str());
    } else if (*cx) {
      const DacenSpec spec =
          cx_preset == "paper" ? DacenSpec::paper(6) : DacenSpec::desk(1);
      AblationSpec abl;
      abl.variant = variant_from_string(cx_variant);
      const ComplexityReport rep = complexity_report(spec, abl);
      std::printf("%s", complexity_table(rep).c_str());
      if (cx_convention != "both") {
        const CountConvention conv = cx_convention == "paper" ? CountConvention::kPaper
                                                              : CountConvention::kFull;
        std::printf("%s-convention parameter total (%s, %s): %lld\n",
                    cx_convention.c_str(), cx_preset.c_str(), cx_variant.c_str(),
                    static_cast<long long>(count_params(spec, abl, conv)));
      }
      if (!cx_out.empty()) {
        fs::create_directories(cx_out);
        write_text_file(cx_out + "/complexity.csv", complexity_csv(rep));
      }
    } else if (*run) {
      run_experiment(config_from_file_or_default(run_cfg_path), run_out);
      std::printf("experiment artifacts in %s\n", run_out.c_str());
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
