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
#include <map>
#include <string>
#include <vector>

#include "dacen/tensor.hpp"

namespace dacen {

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// On-disk tensor. Layout (all little-endian):
///   "DTNS" | version u8 (=1) | dtype u8 | rank u8 | dims u64[rank] | payload
/// dtype: 0 real32, 1 real64, 2 complex64 (interleaved real32),
///        3 complex128 (interleaved real64). Payload is row-major;
/// complex payloads interleave (re, im) per element.
enum class Dtype : uint8_t {
  kReal32 = 0,
  kReal64 = 1,
  kComplex64 = 2,
  kComplex128 = 3,
};

struct TensorBlob {
  Dtype dtype = Dtype::kReal32;
  std::vector<int64_t> dims;
  std::vector<uint8_t> payload;  // element_size * prod(dims) bytes

  int64_t count() const;
  size_t element_size() const;
};

std::vector<uint8_t> encode_tensor(const TensorBlob& t);
TensorBlob decode_tensor(const uint8_t* data, size_t size, size_t* consumed = nullptr);

void save_tensor(const std::string& path, const TensorBlob& t);
TensorBlob load_tensor(const std::string& path);

/// Checkpoint of named tensors:
///   "DACK" | version u8 (=1) | count u32 | count x (name_len u32 | name |
///   embedded tensor record) | crc32 u32 of all preceding bytes.
struct Checkpoint {
  std::vector<std::pair<std::string, TensorBlob>> entries;  // unique names
};

void save_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::string& path);

Checkpoint to_checkpoint(const ParamStore<float>& params);
Checkpoint to_checkpoint(const ParamStore<double>& params);
void from_checkpoint(const Checkpoint& ck, ParamStore<float>& params);
void from_checkpoint(const Checkpoint& ck, ParamStore<double>& params);

uint32_t crc32(const uint8_t* data, size_t size, uint32_t seed = 0);

// ---- flat config files ----------------------------------------------------

/// Flat `key = value` file with [section] headers; keys are stored as
/// "section.key". No nesting, '#' starts a comment.
class FlatConfig {
 public:
  static FlatConfig parse_file(const std::string& path);
  static FlatConfig parse_text(const std::string& text);

  bool has(const std::string& key) const;
  std::string get(const std::string& key) const;
  std::string get_or(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key) const;
  int64_t get_int(const std::string& key) const;
  std::vector<double> get_list(const std::string& key) const;  // comma separated

  void set(const std::string& key, const std::string& value);
  const std::map<std::string, std::string>& entries() const { return values_; }

  /// Canonical serialization (sorted keys) used both for writing and for
  /// the reproducibility digest.
  std::string serialize() const;
  uint64_t digest() const;  // FNV-1a of serialize()

 private:
  std::map<std::string, std::string> values_;
};

// ---- small text helpers ---------------------------------------------------

void write_text_file(const std::string& path, const std::string& text);
std::string read_text_file(const std::string& path);

std::string format_double(double v);  // shortest round-trip-safe formatting

/// One polyline per series; x ticks labelled, y axis in dB.
struct PlotSeries {
  std::string label;
  std::vector<double> x, y;
};
std::string render_line_plot_svg(const std::string& title, const std::string& x_label,
                                 const std::string& y_label,
                                 const std::vector<PlotSeries>& series);

}  // namespace dacen
