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

#include "dacen/io.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace dacen {

namespace {

constexpr char kTensorMagic[4] = {'D', 'T', 'N', 'S'};
constexpr char kCheckpointMagic[4] = {'D', 'A', 'C', 'K'};
constexpr uint8_t kVersion = 1;

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<uint8_t>& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

struct Reader {
  const uint8_t* data;
  size_t size;
  size_t pos = 0;

  void need(size_t n, const char* what) const {
    if (pos + n > size)
      throw IoError(std::string("truncated record: need ") + std::to_string(n) +
                    " bytes for " + what + " at offset " + std::to_string(pos) +
                    ", only " + std::to_string(size - pos) + " available");
  }
  uint8_t u8(const char* what) {
    need(1, what);
    return data[pos++];
  }
  uint32_t u32(const char* what) {
    need(4, what);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(data[pos + i]) << (8 * i);
    pos += 4;
    return v;
  }
  uint64_t u64(const char* what) {
    need(8, what);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(data[pos + i]) << (8 * i);
    pos += 8;
    return v;
  }
};

std::array<uint32_t, 256> make_crc_table() {
  std::array<uint32_t, 256> table{};
  for (uint32_t i = 0; i < 256; ++i) {
    uint32_t c = i;
    for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xedb88320u ^ (c >> 1) : c >> 1;
    table[i] = c;
  }
  return table;
}

std::vector<uint8_t> read_binary_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path + "' for reading");
  f.seekg(0, std::ios::end);
  const auto size = f.tellg();
  f.seekg(0);
  std::vector<uint8_t> buf(static_cast<size_t>(size));
  if (size > 0) f.read(reinterpret_cast<char*>(buf.data()), size);
  if (!f) throw IoError("read failure on '" + path + "'");
  return buf;
}

void write_binary_file(const std::string& path, const std::vector<uint8_t>& bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open '" + path + "' for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("write failure on '" + path + "'");
}

}  // namespace

uint32_t crc32(const uint8_t* data, size_t size, uint32_t seed) {
  static const std::array<uint32_t, 256> table = make_crc_table();
  uint32_t c = seed ^ 0xffffffffu;
  for (size_t i = 0; i < size; ++i) c = table[(c ^ data[i]) & 0xffu] ^ (c >> 8);
  return c ^ 0xffffffffu;
}

int64_t TensorBlob::count() const {
  int64_t n = 1;
  for (int64_t d : dims) n *= d;
  return n;
}

size_t TensorBlob::element_size() const {
  switch (dtype) {
    case Dtype::kReal32: return 4;
    case Dtype::kReal64: return 8;
    case Dtype::kComplex64: return 8;
    case Dtype::kComplex128: return 16;
  }
  throw IoError("unknown dtype code");
}

std::vector<uint8_t> encode_tensor(const TensorBlob& t) {
  if (t.dims.size() > 255) throw IoError("tensor rank exceeds 255");
  const size_t expect = static_cast<size_t>(t.count()) * t.element_size();
  if (t.payload.size() != expect)
    throw IoError("tensor payload is " + std::to_string(t.payload.size()) +
                  " bytes, dims require " + std::to_string(expect));
  std::vector<uint8_t> out;
  out.reserve(7 + 8 * t.dims.size() + t.payload.size());
  out.insert(out.end(), kTensorMagic, kTensorMagic + 4);
  out.push_back(kVersion);
  out.push_back(static_cast<uint8_t>(t.dtype));
  out.push_back(static_cast<uint8_t>(t.dims.size()));
  for (int64_t d : t.dims) put_u64(out, static_cast<uint64_t>(d));
  out.insert(out.end(), t.payload.begin(), t.payload.end());
  return out;
}

TensorBlob decode_tensor(const uint8_t* data, size_t size, size_t* consumed) {
  Reader r{data, size};
  r.need(4, "magic");
  if (std::memcmp(data, kTensorMagic, 4) != 0)
    throw IoError("bad tensor magic at offset 0");
  r.pos = 4;
  const uint8_t version = r.u8("version");
  if (version != kVersion)
    throw IoError("unsupported tensor version " + std::to_string(version));
  const uint8_t dtype = r.u8("dtype");
  if (dtype > 3) throw IoError("unknown dtype code " + std::to_string(dtype));
  const uint8_t rank = r.u8("rank");
  TensorBlob t;
  t.dtype = static_cast<Dtype>(dtype);
  t.dims.resize(rank);
  for (int i = 0; i < rank; ++i) t.dims[static_cast<size_t>(i)] = static_cast<int64_t>(r.u64("dims"));
  const size_t bytes = static_cast<size_t>(t.count()) * t.element_size();
  r.need(bytes, "payload");
  t.payload.assign(data + r.pos, data + r.pos + bytes);
  r.pos += bytes;
  if (consumed) *consumed = r.pos;
  return t;
}

void save_tensor(const std::string& path, const TensorBlob& t) {
  write_binary_file(path, encode_tensor(t));
}

TensorBlob load_tensor(const std::string& path) {
  const auto bytes = read_binary_file(path);
  try {
    size_t consumed = 0;
    TensorBlob t = decode_tensor(bytes.data(), bytes.size(), &consumed);
    if (consumed != bytes.size())
      throw IoError(std::to_string(bytes.size() - consumed) + " trailing bytes");
    return t;
  } catch (const IoError& e) {
    throw IoError("'" + path + "': " + e.what());
  }
}

void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  std::vector<uint8_t> out;
  out.insert(out.end(), kCheckpointMagic, kCheckpointMagic + 4);
  out.push_back(kVersion);
  put_u32(out, static_cast<uint32_t>(ck.entries.size()));
  for (const auto& [name, tensor] : ck.entries) {
    put_u32(out, static_cast<uint32_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    const auto enc = encode_tensor(tensor);
    out.insert(out.end(), enc.begin(), enc.end());
  }
  put_u32(out, crc32(out.data(), out.size()));
  write_binary_file(path, out);
}

Checkpoint load_checkpoint(const std::string& path) {
  const auto bytes = read_binary_file(path);
  try {
    Reader r{bytes.data(), bytes.size()};
    r.need(4, "magic");
    if (std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0)
      throw IoError("bad checkpoint magic at offset 0");
    r.pos = 4;
    if (r.u8("version") != kVersion) throw IoError("unsupported checkpoint version");
    if (bytes.size() < 4) throw IoError("missing checksum");
    const uint32_t stored = [&] {
      uint32_t v = 0;
      for (int i = 0; i < 4; ++i)
        v |= static_cast<uint32_t>(bytes[bytes.size() - 4 + static_cast<size_t>(i)]) << (8 * i);
      return v;
    }();
    const uint32_t actual = crc32(bytes.data(), bytes.size() - 4);
    if (stored != actual) {
      char buf[96];
      std::snprintf(buf, sizeof buf, "checksum mismatch: stored %08x, computed %08x",
                    stored, actual);
      throw IoError(buf);
    }
    const uint32_t count = r.u32("tensor count");
    Checkpoint ck;
    ck.entries.reserve(count);
    for (uint32_t i = 0; i < count; ++i) {
      const uint32_t name_len = r.u32("name length");
      r.need(name_len, "name");
      std::string name(reinterpret_cast<const char*>(bytes.data() + r.pos), name_len);
      r.pos += name_len;
      size_t consumed = 0;
      ck.entries.emplace_back(
          std::move(name),
          decode_tensor(bytes.data() + r.pos, bytes.size() - 4 - r.pos, &consumed));
      r.pos += consumed;
    }
    if (r.pos != bytes.size() - 4)
      throw IoError("unexpected bytes after last tensor at offset " +
                    std::to_string(r.pos));
    for (size_t i = 0; i < ck.entries.size(); ++i)
      for (size_t j = i + 1; j < ck.entries.size(); ++j)
        if (ck.entries[i].first == ck.entries[j].first)
          throw IoError("duplicate tensor name '" + ck.entries[i].first + "'");
    return ck;
  } catch (const IoError& e) {
    throw IoError("'" + path + "': " + e.what());
  }
}

namespace {

template <typename T>
Checkpoint to_checkpoint_impl(const ParamStore<T>& params) {
  Checkpoint ck;
  for (const auto& item : params.items()) {
    TensorBlob t;
    t.dtype = sizeof(T) == 4 ? Dtype::kReal32 : Dtype::kReal64;
    t.dims.assign(item.shape.begin(), item.shape.end());
    t.payload.resize(item.data.size() * sizeof(T));
    std::memcpy(t.payload.data(), item.data.data(), t.payload.size());
    ck.entries.emplace_back(item.name, std::move(t));
  }
  return ck;
}

template <typename T>
void from_checkpoint_impl(const Checkpoint& ck, ParamStore<T>& params) {
  const Dtype want = sizeof(T) == 4 ? Dtype::kReal32 : Dtype::kReal64;
  for (const auto& [name, tensor] : ck.entries) {
    NamedTensor<T>* dst = params.find(name);
    if (!dst) throw IoError("checkpoint tensor '" + name + "' has no destination");
    if (tensor.dtype != want)
      throw IoError("checkpoint tensor '" + name + "' has the wrong precision");
    if (tensor.count() != static_cast<int64_t>(dst->data.size()))
      throw IoError("checkpoint tensor '" + name + "' has " +
                    std::to_string(tensor.count()) + " values, expected " +
                    std::to_string(dst->data.size()));
    std::memcpy(dst->data.data(), tensor.payload.data(), tensor.payload.size());
  }
}

}  // namespace

Checkpoint to_checkpoint(const ParamStore<float>& params) { return to_checkpoint_impl(params); }
Checkpoint to_checkpoint(const ParamStore<double>& params) { return to_checkpoint_impl(params); }
void from_checkpoint(const Checkpoint& ck, ParamStore<float>& params) { from_checkpoint_impl(ck, params); }
void from_checkpoint(const Checkpoint& ck, ParamStore<double>& params) { from_checkpoint_impl(ck, params); }

// ---- flat config ------------------------------------------------------------

FlatConfig FlatConfig::parse_file(const std::string& path) {
  return parse_text(read_text_file(path));
}

FlatConfig FlatConfig::parse_text(const std::string& text) {
  FlatConfig cfg;
  std::istringstream in(text);
  std::string line, section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    auto strip = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r\n");
      if (b == std::string::npos) return std::string();
      const auto e = s.find_last_not_of(" \t\r\n");
      return s.substr(b, e - b + 1);
    };
    line = strip(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw IoError("config line " + std::to_string(line_no) + ": bad section header");
      section = strip(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw IoError("config line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = strip(line.substr(0, eq));
    const std::string value = strip(line.substr(eq + 1));
    if (key.empty())
      throw IoError("config line " + std::to_string(line_no) + ": empty key");
    cfg.values_[section.empty() ? key : section + "." + key] = value;
  }
  return cfg;
}

bool FlatConfig::has(const std::string& key) const { return values_.count(key) > 0; }

std::string FlatConfig::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw IoError("missing config key '" + key + "'");
  return it->second;
}

std::string FlatConfig::get_or(const std::string& key, const std::string& fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

double FlatConfig::get_double(const std::string& key) const {
  const std::string s = get(key);
  try {
    size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw IoError("config key '" + key + "' is not a number: '" + s + "'");
  }
}

int64_t FlatConfig::get_int(const std::string& key) const {
  const std::string s = get(key);
  int64_t v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    throw IoError("config key '" + key + "' is not an integer: '" + s + "'");
  return v;
}

std::vector<double> FlatConfig::get_list(const std::string& key) const {
  std::vector<double> out;
  std::istringstream in(get(key));
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw IoError("config key '" + key + "' has a non-numeric element '" + item + "'");
    }
  }
  return out;
}

void FlatConfig::set(const std::string& key, const std::string& value) {
  values_[key] = value;
}

std::string FlatConfig::serialize() const {
  // std::map keeps keys sorted; group into sections for readability.
  std::string out;
  std::string current_section;
  bool first = true;
  for (const auto& [key, value] : values_) {
    const auto dot = key.find('.');
    const std::string section = dot == std::string::npos ? "" : key.substr(0, dot);
    const std::string bare = dot == std::string::npos ? key : key.substr(dot + 1);
    if (section != current_section || first) {
      if (!first) out += "\n";
      if (!section.empty()) out += "[" + section + "]\n";
      current_section = section;
      first = false;
    }
    out += bare + " = " + value + "\n";
  }
  return out;
}

uint64_t FlatConfig::digest() const {
  const std::string s = serialize();
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open '" + path + "' for writing");
  f << text;
  if (!f) throw IoError("write failure on '" + path + "'");
}

std::string read_text_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path + "' for reading");
  std::ostringstream out;
  out << f.rdbuf();
  return out.str();
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  // Prefer the shortest representation that round-trips.
  for (int prec = 1; prec <= 16; ++prec) {
    char cand[40];
    std::snprintf(cand, sizeof cand, "%.*g", prec, v);
    if (std::stod(cand) == v) return cand;
  }
  return buf;
}

std::string render_line_plot_svg(const std::string& title, const std::string& x_label,
                                 const std::string& y_label,
                                 const std::vector<PlotSeries>& series) {
  const int width = 640, height = 420;
  const int ml = 64, mr = 160, mt = 40, mb = 48;
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (const auto& s : series)
    for (size_t i = 0; i < s.x.size(); ++i) {
      xmin = std::min(xmin, s.x[i]);
      xmax = std::max(xmax, s.x[i]);
      ymin = std::min(ymin, s.y[i]);
      ymax = std::max(ymax, s.y[i]);
    }
  if (xmin > xmax) { xmin = 0; xmax = 1; }
  if (ymin > ymax) { ymin = 0; ymax = 1; }
  if (xmax == xmin) xmax = xmin + 1;
  if (ymax == ymin) ymax = ymin + 1;
  const double px = (width - ml - mr) / (xmax - xmin);
  const double py = (height - mt - mb) / (ymax - ymin);
  auto sx = [&](double x) { return ml + (x - xmin) * px; };
  auto sy = [&](double y) { return height - mb - (y - ymin) * py; };

  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                 "#ff7f0e", "#8c564b", "#17becf"};
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
      << "\" height=\"" << height << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << width / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">"
      << title << "</text>\n";
  // axes
  svg << "<line x1=\"" << ml << "\" y1=\"" << height - mb << "\" x2=\"" << width - mr
      << "\" y2=\"" << height - mb << "\" stroke=\"black\"/>\n";
  svg << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\""
      << height - mb << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double xv = xmin + (xmax - xmin) * i / 4.0;
    const double yv = ymin + (ymax - ymin) * i / 4.0;
    svg << "<text x=\"" << sx(xv) << "\" y=\"" << height - mb + 16
        << "\" text-anchor=\"middle\">" << format_double(std::round(xv * 100) / 100)
        << "</text>\n";
    svg << "<text x=\"" << ml - 6 << "\" y=\"" << sy(yv) + 4
        << "\" text-anchor=\"end\">" << format_double(std::round(yv * 100) / 100)
        << "</text>\n";
  }
  svg << "<text x=\"" << (ml + width - mr) / 2 << "\" y=\"" << height - 10
      << "\" text-anchor=\"middle\">" << x_label << "</text>\n";
  svg << "<text x=\"16\" y=\"" << (mt + height - mb) / 2
      << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
      << (mt + height - mb) / 2 << ")\">" << y_label << "</text>\n";
  for (size_t si = 0; si < series.size(); ++si) {
    const auto& s = series[si];
    const char* color = colors[si % 7];
    svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (size_t i = 0; i < s.x.size(); ++i)
      svg << sx(s.x[i]) << "," << sy(s.y[i]) << " ";
    svg << "\"/>\n";
    const double ly = mt + 16.0 * static_cast<double>(si);
    svg << "<line x1=\"" << width - mr + 8 << "\" y1=\"" << ly << "\" x2=\""
        << width - mr + 28 << "\" y2=\"" << ly << "\" stroke=\"" << color
        << "\" stroke-width=\"1.5\"/>\n";
    svg << "<text x=\"" << width - mr + 34 << "\" y=\"" << ly + 4 << "\">" << s.label
        << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace dacen
