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

// File formats.
//
//   images            binary PPM (P6), 8-bit RGB
//   label maps        binary PGM (P5), value = class index, 255 = ignore
//   strength maps     binary PGM (P5), strength = value / 255
//   soft labels       "DSSL" container, little-endian:
//                       magic[4] version:u32 height:u32 width:u32 C:u32
//                       then one u32 per pixel (row-major): 0xFFFFFFFF for
//                       UNCERTAIN, else a class bitmask (bit c <-> s_c = 1)
//   checkpoints       "DSUP" container, little-endian:
//                       magic[4] version:u32 C:u32 layer_count:u32
//                       per layer: in:u32 out:u32 stride:u32 flags:u32
//                         (bit 0 relu, bit 1 upsample before)
//                       tensor_count:u32
//                       per tensor: name_len:u32 name rank:u32 dims:u32*rank
//                                   float32 data
//   manifest.jsonl    one JSON object per line; the first is the dataset
//                     header, then one record per sample
//   boxes.jsonl       one {id, class, x0, y0, x1, y1} object per box

#ifndef DSUP_IO_HPP_
#define DSUP_IO_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dsup/boxmask.hpp"
#include "dsup/core.hpp"
#include "dsup/dataset.hpp"
#include "dsup/labels.hpp"
#include "dsup/toynet.hpp"

namespace dsup {

inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr std::uint32_t kSoftLabelVersion = 1;
inline constexpr int kDatasetFormat = 1;

// Raised for unreadable, truncated or malformed files.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::uint8_t quantize_strength(double strength);
inline double dequantize_strength(std::uint8_t v) { return v / 255.0; }
std::uint8_t quantize_channel(float v);
BoundaryStrengthMap quantized(const BoundaryStrengthMap& map);

void write_ppm(const std::filesystem::path& path, const RgbImage& image);
RgbImage read_ppm(const std::filesystem::path& path);

void write_pgm(const std::filesystem::path& path, const Dims& dims,
               std::span<const std::uint8_t> values);
std::pair<Dims, std::vector<std::uint8_t>> read_pgm(const std::filesystem::path& path);

void write_label_map(const std::filesystem::path& path, const PixelLabelMap& labels);
PixelLabelMap read_label_map(const std::filesystem::path& path);

// Strengths above 1 saturate at 255.
void write_strength_map(const std::filesystem::path& path, const BoundaryStrengthMap& map);
BoundaryStrengthMap read_strength_map(const std::filesystem::path& path);

std::vector<std::uint8_t> encode_soft_label(const SoftSegLabel& soft);
SoftSegLabel decode_soft_label(std::span<const std::uint8_t> bytes);
void write_soft_label(const std::filesystem::path& path, const SoftSegLabel& soft);
SoftSegLabel read_soft_label(const std::filesystem::path& path);

std::vector<std::uint8_t> encode_checkpoint(const NetParams& params);
// Rejects bad magic, a different format version and inconsistent tensors.
NetParams decode_checkpoint(std::span<const std::uint8_t> bytes);
void write_checkpoint(const std::filesystem::path& path, const NetParams& params);
NetParams read_checkpoint(const std::filesystem::path& path);

struct DatasetHeader {
  int num_classes = 0;
  Dims dims;
  std::uint64_t seed = 0;
  int train_count = 0;
  int val_count = 0;
  std::optional<std::string> mask_strategy;
  std::optional<double> mask_alpha;
  std::optional<std::uint64_t> mask_seed;
};

struct ManifestRecord {
  std::string id;
  std::string split;  // "train" or "val"
  std::string image;
  std::optional<std::string> labels;
  std::optional<std::string> strength;
  std::optional<std::string> soft;
  std::optional<std::vector<std::uint8_t>> image_label;
};

struct Manifest {
  DatasetHeader header;
  std::vector<ManifestRecord> records;
  std::vector<std::pair<std::string, BoundingBox>> boxes;
};

void write_manifest(const std::filesystem::path& dir, const Manifest& manifest);
// Rejects duplicate ids and boxes that reference unknown samples.
Manifest read_manifest(const std::filesystem::path& dir);

// Loads every raster the manifest references. Box-branch targets come from
// "soft" paths (.ssl soft labels or .pgm hard pseudo-labels).
Dataset load_dataset(const std::filesystem::path& dir);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace dsup

#endif  // DSUP_IO_HPP_
