// Copyright 2026 The dsup Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "dsup/io.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"

namespace dsup {
namespace {

using json = nlohmann::json;

constexpr char kCheckpointMagic[4] = {'D', 'S', 'U', 'P'};
constexpr char kSoftLabelMagic[4] = {'D', 'S', 'S', 'L'};

class ByteWriter {
 public:
  void u32(std::uint32_t v) {
    for (int k = 0; k < 4; ++k) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * k)));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void raw(const void* data, std::size_t n) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    bytes_.insert(bytes_.end(), p, p + n);
  }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
};

class ByteReader {
 public:
  ByteReader(std::span<const std::uint8_t> bytes, const char* what) : bytes_(bytes), what_(what) {}

  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw FormatError(std::string(what_) + ": truncated data");
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int k = 0; k < 4; ++k) v |= static_cast<std::uint32_t>(bytes_[pos_++]) << (8 * k);
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  std::string str(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
  const char* what_;
};

void write_netpbm(const std::filesystem::path& path, const char* magic, const Dims& dims,
                  std::span<const std::uint8_t> payload) {
  std::string header = std::string(magic) + "\n" + std::to_string(dims.width) + " " +
                       std::to_string(dims.height) + "\n255\n";
  std::vector<std::uint8_t> bytes(header.begin(), header.end());
  bytes.insert(bytes.end(), payload.begin(), payload.end());
  write_file_bytes(path, bytes);
}

// Parses a P5/P6 header and returns the payload.
std::pair<Dims, std::vector<std::uint8_t>> read_netpbm(const std::filesystem::path& path,
                                                       const char* magic, int samples) {
  const auto bytes = read_file_bytes(path);
  std::size_t pos = 0;
  auto fail = [&](const std::string& why) -> FormatError {
    return FormatError(path.string() + ": " + why);
  };
  auto token = [&]() {
    for (;;) {
      while (pos < bytes.size() && std::isspace(bytes[pos])) ++pos;
      if (pos < bytes.size() && bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
        continue;
      }
      break;
    }
    std::string t;
    while (pos < bytes.size() && !std::isspace(bytes[pos])) t.push_back(static_cast<char>(bytes[pos++]));
    return t;
  };
  if (token() != magic) throw fail(std::string("expected ") + magic + " header");
  int w = 0;
  int h = 0;
  int maxval = 0;
  try {
    w = std::stoi(token());
    h = std::stoi(token());
    maxval = std::stoi(token());
  } catch (const std::exception&) {
    throw fail("malformed header");
  }
  if (w < 1 || h < 1) throw fail("invalid dimensions");
  if (maxval != 255) throw fail("only 8-bit rasters are supported");
  ++pos;  // single whitespace before the payload
  const std::size_t n = static_cast<std::size_t>(w) * static_cast<std::size_t>(h) *
                        static_cast<std::size_t>(samples);
  if (pos > bytes.size() || bytes.size() - pos < n) throw fail("truncated payload");
  return {Dims(h, w), std::vector<std::uint8_t>(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                                                bytes.begin() + static_cast<std::ptrdiff_t>(pos + n))};
}

std::string layer_tensor_name(std::size_t layer, const char* kind) {
  return "layer" + std::to_string(layer) + "." + kind;
}

template <typename T>
T required(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw FormatError(where + ": missing field \"" + key + "\"");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw FormatError(where + ": field \"" + key + "\" has the wrong type");
  }
}

template <typename T>
std::optional<T> optional_field(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw FormatError(where + ": field \"" + key + "\" has the wrong type");
  }
}

std::vector<json> read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  std::vector<json> rows;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      rows.push_back(json::parse(line));
    } catch (const json::parse_error& e) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return rows;
}

}  // namespace

std::uint8_t quantize_strength(double strength) {
  if (!std::isfinite(strength)) throw NumericError("quantize_strength: non-finite strength");
  return static_cast<std::uint8_t>(std::lround(std::clamp(strength, 0.0, 1.0) * 255.0));
}

std::uint8_t quantize_channel(float v) {
  if (!std::isfinite(v)) throw NumericError("quantize_channel: non-finite value");
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
}

BoundaryStrengthMap quantized(const BoundaryStrengthMap& map) {
  std::vector<double> v(map.values().size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = dequantize_strength(quantize_strength(map[i]));
  return BoundaryStrengthMap(map.dims(), std::move(v));
}

void write_ppm(const std::filesystem::path& path, const RgbImage& image) {
  if (image.rgb.size() != image.dims.pixel_count() * 3) {
    throw std::invalid_argument("write_ppm: image buffer does not match its dimensions");
  }
  std::vector<std::uint8_t> payload(image.rgb.size());
  std::transform(image.rgb.begin(), image.rgb.end(), payload.begin(), quantize_channel);
  write_netpbm(path, "P6", image.dims, payload);
}

RgbImage read_ppm(const std::filesystem::path& path) {
  auto [dims, payload] = read_netpbm(path, "P6", 3);
  RgbImage image(dims);
  for (std::size_t i = 0; i < payload.size(); ++i) image.rgb[i] = payload[i] / 255.0f;
  return image;
}

void write_pgm(const std::filesystem::path& path, const Dims& dims,
               std::span<const std::uint8_t> values) {
  if (values.size() != dims.pixel_count()) {
    throw std::invalid_argument("write_pgm: value count does not match dimensions");
  }
  write_netpbm(path, "P5", dims, values);
}

std::pair<Dims, std::vector<std::uint8_t>> read_pgm(const std::filesystem::path& path) {
  return read_netpbm(path, "P5", 1);
}

void write_label_map(const std::filesystem::path& path, const PixelLabelMap& labels) {
  write_pgm(path, labels.dims(), labels.labels());
}

PixelLabelMap read_label_map(const std::filesystem::path& path) {
  auto [dims, values] = read_pgm(path);
  return PixelLabelMap(dims, std::move(values));
}

void write_strength_map(const std::filesystem::path& path, const BoundaryStrengthMap& map) {
  std::vector<std::uint8_t> values(map.values().size());
  for (std::size_t i = 0; i < values.size(); ++i) values[i] = quantize_strength(map[i]);
  write_pgm(path, map.dims(), values);
}

BoundaryStrengthMap read_strength_map(const std::filesystem::path& path) {
  auto [dims, values] = read_pgm(path);
  std::vector<double> s(values.size());
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = dequantize_strength(values[i]);
  return BoundaryStrengthMap(dims, std::move(s));
}

std::vector<std::uint8_t> encode_soft_label(const SoftSegLabel& soft) {
  soft.validate();
  ByteWriter w;
  w.raw(kSoftLabelMagic, 4);
  w.u32(kSoftLabelVersion);
  w.u32(static_cast<std::uint32_t>(soft.dims().height));
  w.u32(static_cast<std::uint32_t>(soft.dims().width));
  w.u32(static_cast<std::uint32_t>(soft.num_object_classes()));
  for (std::uint32_t m : soft.masks()) w.u32(m);
  return w.take();
}

SoftSegLabel decode_soft_label(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes, "soft label");
  if (r.str(4) != std::string(kSoftLabelMagic, 4)) throw FormatError("soft label: bad magic");
  const std::uint32_t version = r.u32();
  if (version != kSoftLabelVersion) {
    throw FormatError("soft label: unsupported version " + std::to_string(version));
  }
  const auto h = static_cast<int>(r.u32());
  const auto w = static_cast<int>(r.u32());
  const auto c = static_cast<int>(r.u32());
  if (h < 1 || w < 1 || c < 1 || c + 1 > SoftSegLabel::kMaxChannels) {
    throw FormatError("soft label: invalid header");
  }
  SoftSegLabel soft(Dims(h, w), c);
  r.need(soft.pixel_count() * 4);
  for (std::size_t i = 0; i < soft.pixel_count(); ++i) soft.set_mask(i, r.u32());
  if (!r.done()) throw FormatError("soft label: trailing bytes");
  try {
    soft.validate();
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("soft label: ") + e.what());
  }
  return soft;
}

void write_soft_label(const std::filesystem::path& path, const SoftSegLabel& soft) {
  write_file_bytes(path, encode_soft_label(soft));
}

SoftSegLabel read_soft_label(const std::filesystem::path& path) {
  try {
    return decode_soft_label(read_file_bytes(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

std::vector<std::uint8_t> encode_checkpoint(const NetParams& params) {
  params.arch.validate();
  ByteWriter w;
  w.raw(kCheckpointMagic, 4);
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(params.arch.num_object_classes));
  w.u32(static_cast<std::uint32_t>(params.arch.layers.size()));
  for (const auto& l : params.arch.layers) {
    w.u32(static_cast<std::uint32_t>(l.in_channels));
    w.u32(static_cast<std::uint32_t>(l.out_channels));
    w.u32(static_cast<std::uint32_t>(l.stride));
    w.u32((l.relu ? 1u : 0u) | (l.upsample_before ? 2u : 0u));
  }
  w.u32(static_cast<std::uint32_t>(params.layers.size() * 2));
  auto tensor = [&](const std::string& name, std::vector<std::uint32_t> dims,
                    const std::vector<float>& data) {
    w.u32(static_cast<std::uint32_t>(name.size()));
    w.raw(name.data(), name.size());
    w.u32(static_cast<std::uint32_t>(dims.size()));
    for (auto d : dims) w.u32(d);
    for (float v : data) w.f32(v);
  };
  for (std::size_t k = 0; k < params.layers.size(); ++k) {
    const auto& layer = params.layers[k];
    const auto out = static_cast<std::uint32_t>(layer.spec.out_channels);
    const auto in = static_cast<std::uint32_t>(layer.spec.in_channels);
    tensor(layer_tensor_name(k, "weight"), {out, in, 3, 3}, layer.weight);
    tensor(layer_tensor_name(k, "bias"), {out}, layer.bias);
  }
  return w.take();
}

NetParams decode_checkpoint(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes, "checkpoint");
  if (r.str(4) != std::string(kCheckpointMagic, 4)) throw FormatError("checkpoint: bad magic");
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw FormatError("checkpoint: unsupported format version " + std::to_string(version) +
                      " (expected " + std::to_string(kCheckpointVersion) + ")");
  }
  Architecture arch;
  arch.num_object_classes = static_cast<int>(r.u32());
  const std::uint32_t layer_count = r.u32();
  if (layer_count > 1024) throw FormatError("checkpoint: implausible layer count");
  for (std::uint32_t k = 0; k < layer_count; ++k) {
    LayerSpec l;
    l.in_channels = static_cast<int>(r.u32());
    l.out_channels = static_cast<int>(r.u32());
    l.stride = static_cast<int>(r.u32());
    const std::uint32_t flags = r.u32();
    if (flags & ~3u) throw FormatError("checkpoint: unknown layer flags");
    l.relu = (flags & 1u) != 0;
    l.upsample_before = (flags & 2u) != 0;
    arch.layers.push_back(l);
  }
  try {
    arch.validate();
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("checkpoint: ") + e.what());
  }
  NetParams params = NetParams::zeros_like(arch);
  const std::uint32_t tensor_count = r.u32();
  if (tensor_count != params.layers.size() * 2) {
    throw FormatError("checkpoint: expected " + std::to_string(params.layers.size() * 2) +
                      " tensors, found " + std::to_string(tensor_count));
  }
  for (std::size_t k = 0; k < params.layers.size(); ++k) {
    auto& layer = params.layers[k];
    const auto out = static_cast<std::uint32_t>(layer.spec.out_channels);
    const auto in = static_cast<std::uint32_t>(layer.spec.in_channels);
    auto tensor = [&](const std::string& expect_name, const std::vector<std::uint32_t>& expect_dims,
                      std::vector<float>& data) {
      const std::uint32_t name_len = r.u32();
      if (name_len > 256) throw FormatError("checkpoint: implausible tensor name length");
      const std::string name = r.str(name_len);
      if (name != expect_name) {
        throw FormatError("checkpoint: expected tensor " + expect_name + ", found " + name);
      }
      const std::uint32_t rank = r.u32();
      if (rank != expect_dims.size()) throw FormatError("checkpoint: tensor " + name + " has wrong rank");
      for (std::uint32_t d = 0; d < rank; ++d) {
        if (r.u32() != expect_dims[d]) {
          throw FormatError("checkpoint: tensor " + name + " does not match the architecture");
        }
      }
      r.need(data.size() * 4);
      for (float& v : data) v = r.f32();
    };
    tensor(layer_tensor_name(k, "weight"), {out, in, 3, 3}, layer.weight);
    tensor(layer_tensor_name(k, "bias"), {out}, layer.bias);
  }
  if (!r.done()) throw FormatError("checkpoint: trailing bytes");
  return params;
}

void write_checkpoint(const std::filesystem::path& path, const NetParams& params) {
  write_file_bytes(path, encode_checkpoint(params));
}

NetParams read_checkpoint(const std::filesystem::path& path) {
  try {
    return decode_checkpoint(read_file_bytes(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void write_manifest(const std::filesystem::path& dir, const Manifest& manifest) {
  const auto& h = manifest.header;
  json header = {{"kind", "dataset"},
                 {"format", kDatasetFormat},
                 {"num_classes", h.num_classes},
                 {"height", h.dims.height},
                 {"width", h.dims.width},
                 {"seed", h.seed},
                 {"train", h.train_count},
                 {"val", h.val_count}};
  if (h.mask_strategy) header["mask_strategy"] = *h.mask_strategy;
  if (h.mask_alpha) header["alpha"] = *h.mask_alpha;
  if (h.mask_seed) header["mask_seed"] = *h.mask_seed;

  std::string text = header.dump() + "\n";
  for (const auto& r : manifest.records) {
    json j = {{"id", r.id}, {"split", r.split}, {"image", r.image}};
    if (r.labels) j["labels"] = *r.labels;
    if (r.strength) j["strength"] = *r.strength;
    if (r.soft) j["soft"] = *r.soft;
    if (r.image_label) j["image_label"] = *r.image_label;
    text += j.dump() + "\n";
  }
  write_text_file(dir / "manifest.jsonl", text);

  std::string boxes;
  for (const auto& [id, b] : manifest.boxes) {
    boxes += json{{"id", id}, {"class", b.class_id}, {"x0", b.x0}, {"y0", b.y0}, {"x1", b.x1}, {"y1", b.y1}}
                 .dump() +
             "\n";
  }
  write_text_file(dir / "boxes.jsonl", boxes);
}

Manifest read_manifest(const std::filesystem::path& dir) {
  const auto manifest_path = dir / "manifest.jsonl";
  const auto rows = read_jsonl(manifest_path);
  const std::string where = manifest_path.string();
  if (rows.empty()) throw FormatError(where + ": empty manifest");
  const json& hj = rows.front();
  if (optional_field<std::string>(hj, "kind", where) != "dataset") {
    throw FormatError(where + ": first line must be the dataset header");
  }
  const int format = required<int>(hj, "format", where);
  if (format != kDatasetFormat) {
    throw FormatError(where + ": unsupported dataset format " + std::to_string(format));
  }
  Manifest m;
  m.header.num_classes = required<int>(hj, "num_classes", where);
  try {
    m.header.dims = Dims(required<int>(hj, "height", where), required<int>(hj, "width", where));
    (void)ClassConfig(m.header.num_classes);
  } catch (const std::invalid_argument& e) {
    throw FormatError(where + ": " + e.what());
  }
  m.header.seed = required<std::uint64_t>(hj, "seed", where);
  m.header.train_count = required<int>(hj, "train", where);
  m.header.val_count = required<int>(hj, "val", where);
  m.header.mask_strategy = optional_field<std::string>(hj, "mask_strategy", where);
  m.header.mask_alpha = optional_field<double>(hj, "alpha", where);
  m.header.mask_seed = optional_field<std::uint64_t>(hj, "mask_seed", where);

  std::set<std::string> ids;
  for (std::size_t k = 1; k < rows.size(); ++k) {
    const json& j = rows[k];
    const std::string at = where + ":" + std::to_string(k + 1);
    ManifestRecord r;
    r.id = required<std::string>(j, "id", at);
    r.split = required<std::string>(j, "split", at);
    if (r.split != "train" && r.split != "val") {
      throw FormatError(at + ": split must be \"train\" or \"val\"");
    }
    r.image = required<std::string>(j, "image", at);
    r.labels = optional_field<std::string>(j, "labels", at);
    r.strength = optional_field<std::string>(j, "strength", at);
    r.soft = optional_field<std::string>(j, "soft", at);
    r.image_label = optional_field<std::vector<std::uint8_t>>(j, "image_label", at);
    if (!ids.insert(r.id).second) throw FormatError(at + ": duplicate sample id " + r.id);
    m.records.push_back(std::move(r));
  }

  const auto boxes_path = dir / "boxes.jsonl";
  if (std::filesystem::exists(boxes_path)) {
    const auto box_rows = read_jsonl(boxes_path);
    for (std::size_t k = 0; k < box_rows.size(); ++k) {
      const json& j = box_rows[k];
      const std::string at = boxes_path.string() + ":" + std::to_string(k + 1);
      std::string id = required<std::string>(j, "id", at);
      if (!ids.contains(id)) throw FormatError(at + ": box references unknown sample " + id);
      BoundingBox b{required<int>(j, "class", at), required<int>(j, "x0", at),
                    required<int>(j, "y0", at), required<int>(j, "x1", at), required<int>(j, "y1", at)};
      m.boxes.emplace_back(std::move(id), b);
    }
  }
  return m;
}

Dataset load_dataset(const std::filesystem::path& dir) {
  const Manifest m = read_manifest(dir);
  Dataset ds;
  ds.num_object_classes = m.header.num_classes;
  ds.dims = m.header.dims;
  const ClassConfig classes = ds.classes();

  std::map<std::string, std::vector<BoundingBox>> boxes;
  for (const auto& [id, b] : m.boxes) boxes[id].push_back(b);

  for (const auto& r : m.records) {
    const std::string where = "sample " + r.id;
    Sample s;
    s.id = r.id;
    s.image = read_ppm(dir / r.image);
    auto check_dims = [&](const Dims& d, const char* what) {
      if (!(d == ds.dims)) {
        throw FormatError(where + ": " + what + " is " + to_string(d) + ", dataset is " +
                          to_string(ds.dims));
      }
    };
    check_dims(s.image.dims, "image");
    try {
      if (r.labels) {
        s.pixel_labels = read_label_map(dir / *r.labels);
        check_dims(s.pixel_labels->dims(), "label map");
        s.pixel_labels->validate(classes);
      }
      if (r.strength) {
        s.strength = read_strength_map(dir / *r.strength);
        check_dims(s.strength->dims(), "strength map");
      }
      if (r.soft) {
        const std::filesystem::path p = dir / *r.soft;
        if (p.extension() == ".pgm") {
          const PixelLabelMap hard = read_label_map(p);
          check_dims(hard.dims(), "hard pseudo-label");
          hard.validate(classes);
          s.box_target = soft_from_hard(hard, ds.num_object_classes);
        } else {
          s.box_target = read_soft_label(p);
          check_dims(s.box_target->dims(), "soft label");
          if (s.box_target->num_object_classes() != ds.num_object_classes) {
            throw FormatError(where + ": soft label class count does not match the dataset");
          }
        }
      }
      if (r.image_label) {
        s.image_label = ImageLabel{*r.image_label};
        s.image_label->validate(classes);
      }
      if (auto it = boxes.find(r.id); it != boxes.end()) {
        for (const auto& b : it->second) b.validate(ds.dims, classes);
        s.boxes = it->second;
      }
    } catch (const std::invalid_argument& e) {
      throw FormatError(where + ": " + e.what());
    }
    (r.split == "train" ? ds.train : ds.val).push_back(std::move(s));
  }
  return ds;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  write_file_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

}  // namespace dsup
