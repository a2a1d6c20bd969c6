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

#include "dacen/complexity.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace dacen {

namespace {

int64_t sq(int64_t x) { return x * x; }

}  // namespace

int64_t tam_flops(int n_taps, int d_model) {
  const int64_t s2 = 2 * static_cast<int64_t>(n_taps);
  return 6 * s2 * sq(d_model) + 2 * sq(s2) * d_model;
}

int64_t sam_flops(int n_rx, int n_tx, int d_model) {
  const int64_t g = static_cast<int64_t>(n_rx) * n_tx;
  return 2 * g + g * d_model + 2 * g * sq(d_model);
}

int64_t sconv_flops(int n_rx, int n_tx, int k_s, int d_model) {
  return static_cast<int64_t>(n_rx) * n_tx * sq(k_s) * sq(d_model);
}

int64_t tconv_flops(int n_taps, int k_t, int d_model) {
  return 2 * static_cast<int64_t>(n_taps) * k_t * sq(d_model);
}

int64_t tam_params(int d_model, int d_ff, CountConvention c) {
  // Q/K/V across heads collapse to d_model x d_model each, plus W^O and
  // the feed-forward pair; biases for all six maps.
  const int64_t d = d_model, f = d_ff;
  int64_t n = 4 * sq(d) + 2 * d * f            // weights
              + 4 * d + f + d;                 // q,k,v,o biases + b1 + b2
  if (c == CountConvention::kFull) n += 4 * d;  // two layer-norm affines
  return n;
}

int64_t sam_params(int d_model, int d_ff, CountConvention c) {
  const int64_t d = d_model, f = d_ff;
  int64_t n = 2 * d * f + f + d;  // the published row counts the FF pair only
  if (c == CountConvention::kFull) n += 3 + 4 * d;  // 1x1 conv (2->1) + affines
  return n;
}

int64_t sconv_params(int k_s, int d_model, CountConvention c) {
  int64_t n = sq(k_s) * sq(d_model) + d_model;
  if (c == CountConvention::kFull) n += 2 * d_model;
  return n;
}

int64_t tconv_params(int k_t, int d_model, CountConvention c) {
  int64_t n = static_cast<int64_t>(k_t) * sq(d_model) + d_model;
  if (c == CountConvention::kFull) n += 2 * d_model;
  return n;
}

int64_t count_params(const DacenSpec& spec, const AblationSpec& abl, CountConvention c) {
  if (c == CountConvention::kFull) {
    int64_t n = 0;
    for (const auto& [name, shape] : param_layout(spec, abl)) n += numel(shape);
    return n;
  }
  const int64_t d = spec.d_model;
  const int64_t g = spec.grid();
  const int64_t s2 = spec.seq_len();
  const int64_t l12 = (2 * spec.n_pilots) * d + d + d * s2 + s2;
  const int64_t l34 = g * d + d + d * g + g;
  switch (abl.variant) {
    case Variant::kFull:
      return spec.n_tam * tam_params(spec.d_model, spec.d_ff, c) +
             spec.n_sam * sam_params(spec.d_model, spec.d_ff, c) + l12 + l34;
    case Variant::kNoSams:
      return spec.n_tam * tam_params(spec.d_model, spec.d_ff, c) + l12 + l34;
    case Variant::kNoTams:
      return spec.n_sam * sam_params(spec.d_model, spec.d_ff, c) + l12;
    case Variant::kSconvTam:
      return spec.n_tam * tam_params(spec.d_model, spec.d_ff, c) +
             spec.n_sam * sconv_params(abl.k_spatial, spec.d_model, c) + l12 + l34;
    case Variant::kSamTconv:
      return spec.n_tam * tconv_params(abl.k_temporal, spec.d_model, c) +
             spec.n_sam * sam_params(spec.d_model, spec.d_ff, c) + l12 + l34;
  }
  throw ConfigError("bad variant enum");
}

int64_t count_flops(const DacenSpec& spec, const AblationSpec& abl) {
  const int64_t d = spec.d_model;
  const int64_t g = spec.grid();
  const int64_t s2 = spec.seq_len();
  const int64_t l1 = g * (2 * spec.n_pilots) * d;
  const int64_t l2 = g * d * s2;
  const int64_t l3 = s2 * g * d;
  const int64_t l4 = s2 * d * g;
  switch (abl.variant) {
    case Variant::kFull:
      return spec.n_tam * tam_flops(spec.n_taps, spec.d_model) +
             spec.n_sam * sam_flops(spec.n_rx, spec.n_tx, spec.d_model) + l1 + l2 + l3 + l4;
    case Variant::kNoSams:
      return spec.n_tam * tam_flops(spec.n_taps, spec.d_model) + l1 + l2 + l3 + l4;
    case Variant::kNoTams:
      return spec.n_sam * sam_flops(spec.n_rx, spec.n_tx, spec.d_model) + l1 + l2;
    case Variant::kSconvTam:
      return spec.n_tam * tam_flops(spec.n_taps, spec.d_model) +
             spec.n_sam * sconv_flops(spec.n_rx, spec.n_tx, abl.k_spatial, spec.d_model) +
             l1 + l2 + l3 + l4;
    case Variant::kSamTconv:
      return spec.n_tam * tconv_flops(spec.n_taps, abl.k_temporal, spec.d_model) +
             spec.n_sam * sam_flops(spec.n_rx, spec.n_tx, spec.d_model) + l1 + l2 + l3 + l4;
  }
  throw ConfigError("bad variant enum");
}

namespace {

bool is_paper_scale(const DacenSpec& spec) {
  return spec.d_model == 512 && spec.d_ff == 512 && spec.n_sam == 8 &&
         spec.n_tam == 8 && spec.n_taps == 64 && spec.n_rx == 4 && spec.n_tx == 32;
}

}  // namespace

ComplexityReport complexity_report(const DacenSpec& spec, const AblationSpec& abl) {
  ComplexityReport rep;
  const bool paper = is_paper_scale(spec);
  auto layer = [&](const std::string& label, int64_t flops, int64_t pp, int64_t pf,
                   double ref_flops, double ref_params) {
    ComplexityRow row{label, flops, pp, pf, std::nullopt, std::nullopt};
    if (paper) {
      row.published_flops = ref_flops;
      row.published_params = ref_params;
    }
    rep.layers.push_back(std::move(row));
  };
  layer("TAM", tam_flops(spec.n_taps, spec.d_model),
        tam_params(spec.d_model, spec.d_ff, CountConvention::kPaper),
        tam_params(spec.d_model, spec.d_ff, CountConvention::kFull), 218.47e6, 1.58e6);
  layer("TConv", tconv_flops(spec.n_taps, abl.k_temporal, spec.d_model),
        tconv_params(abl.k_temporal, spec.d_model, CountConvention::kPaper),
        tconv_params(abl.k_temporal, spec.d_model, CountConvention::kFull), 100.73e6,
        786.94e3);
  layer("SAM", sam_flops(spec.n_rx, spec.n_tx, spec.d_model),
        sam_params(spec.d_model, spec.d_ff, CountConvention::kPaper),
        sam_params(spec.d_model, spec.d_ff, CountConvention::kFull), 67.18e6, 525.31e3);
  layer("SConv", sconv_flops(spec.n_rx, spec.n_tx, abl.k_spatial, spec.d_model),
        sconv_params(abl.k_spatial, spec.d_model, CountConvention::kPaper),
        sconv_params(abl.k_spatial, spec.d_model, CountConvention::kFull), 302.06e6,
        2.36e6);

  struct ModelRef {
    Variant variant;
    const char* label;
    double flops, params;
  };
  const ModelRef model_refs[] = {
      {Variant::kFull, "DACEN", 2.31e9, 17.01e6},
      {Variant::kNoSams, "w/o SAMs (TAM only)", 1.76e9, 12.74e6},
      {Variant::kNoTams, "w/o TAMs (SAM only)", 0.55e9, 4.27e6},
      {Variant::kSconvTam, "SConv-TAM", 3.96e9, 29.92e6},
      {Variant::kSamTconv, "SAM-TConv", 1.35e9, 10.57e6},
  };
  for (const auto& ref : model_refs) {
    AblationSpec a = abl;
    a.variant = ref.variant;
    ComplexityRow row;
    row.label = ref.label;
    row.flops = count_flops(spec, a);
    row.params_paper = count_params(spec, a, CountConvention::kPaper);
    row.params_full = count_params(spec, a, CountConvention::kFull);
    if (paper && spec.n_pilots == 6) {
      row.published_flops = ref.flops;
      row.published_params = ref.params;
    }
    rep.models.push_back(std::move(row));
  }
  return rep;
}

namespace {

std::string human(int64_t v) {
  char buf[32];
  if (v >= 1000000000)
    std::snprintf(buf, sizeof buf, "%.2f G", static_cast<double>(v) / 1e9);
  else if (v >= 1000000)
    std::snprintf(buf, sizeof buf, "%.2f M", static_cast<double>(v) / 1e6);
  else if (v >= 1000)
    std::snprintf(buf, sizeof buf, "%.2f k", static_cast<double>(v) / 1e3);
  else
    std::snprintf(buf, sizeof buf, "%lld", static_cast<long long>(v));
  return buf;
}

void csv_rows(std::ostringstream& out, const std::string& kind,
              const std::vector<ComplexityRow>& rows) {
  for (const auto& r : rows) {
    out << kind << "," << r.label << "," << r.flops << "," << r.params_paper << ","
        << r.params_full << ",";
    if (r.published_flops) out << static_cast<int64_t>(*r.published_flops);
    out << ",";
    if (r.published_params) out << static_cast<int64_t>(*r.published_params);
    out << "\n";
  }
}

}  // namespace

std::string complexity_csv(const ComplexityReport& report) {
  std::ostringstream out;
  out << "kind,label,flops,params_paper,params_full,published_flops,published_params\n";
  csv_rows(out, "layer", report.layers);
  csv_rows(out, "model", report.models);
  return out.str();
}

std::string complexity_table(const ComplexityReport& report) {
  std::ostringstream out;
  auto section = [&](const char* header, const std::vector<ComplexityRow>& rows) {
    out << header << "\n";
    char line[160];
    out << "  label                  flops        params(paper)  params(full)   published(flops/params)\n";
    for (const auto& r : rows) {
      std::snprintf(line, sizeof line, "  %-22s %-12s %-14s %-14s", r.label.c_str(),
                    human(r.flops).c_str(), human(r.params_paper).c_str(),
                    human(r.params_full).c_str());
      out << line;
      if (r.published_flops && r.published_params)
        out << " " << human(static_cast<int64_t>(*r.published_flops)) << " / "
            << human(static_cast<int64_t>(*r.published_params));
      out << "\n";
    }
  };
  section("Per-layer complexity (multiply-accumulates / learnables):", report.layers);
  section("Per-model complexity:", report.models);
  return out.str();
}

}  // namespace dacen
