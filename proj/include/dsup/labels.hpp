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

// Label containers shared by the mask pipeline, the losses and the metrics.

#ifndef DSUP_LABELS_HPP_
#define DSUP_LABELS_HPP_

#include <cstdint>
#include <vector>

#include "dsup/core.hpp"

namespace dsup {

// Hard per-pixel class indices in {0..C}, or kIgnoreLabel.
class PixelLabelMap {
 public:
  PixelLabelMap() = default;
  explicit PixelLabelMap(Dims dims, std::uint8_t fill = 0);
  PixelLabelMap(Dims dims, std::vector<std::uint8_t> labels);

  const Dims& dims() const { return dims_; }
  std::size_t pixel_count() const { return labels_.size(); }

  std::uint8_t& operator[](std::size_t i) { return labels_[i]; }
  std::uint8_t operator[](std::size_t i) const { return labels_[i]; }
  std::uint8_t& at(int x, int y) { return labels_[dims_.index(x, y)]; }
  std::uint8_t at(int x, int y) const { return labels_[dims_.index(x, y)]; }

  const std::vector<std::uint8_t>& labels() const { return labels_; }

  // Throws std::invalid_argument if any value is neither a class nor ignore.
  void validate(const ClassConfig& classes) const;

  friend bool operator==(const PixelLabelMap&, const PixelLabelMap&) = default;

 private:
  Dims dims_;
  std::vector<std::uint8_t> labels_;
};

// Per-pixel class-membership sets s_{i,c}, stored as a bitmask (bit c set
// iff s_{i,c} = 1), or the distinct UNCERTAIN state. Bitmask storage
// bounds C + 1 to 31 channels.
class SoftSegLabel {
 public:
  static constexpr std::uint32_t kUncertain = 0xFFFFFFFFu;
  static constexpr int kMaxChannels = 31;

  SoftSegLabel() = default;
  // Every pixel starts as background {0}.
  SoftSegLabel(Dims dims, int num_object_classes);

  const Dims& dims() const { return dims_; }
  int num_object_classes() const { return num_object_classes_; }
  std::size_t pixel_count() const { return masks_.size(); }

  bool is_uncertain(std::size_t i) const { return masks_[i] == kUncertain; }
  std::uint32_t class_mask(std::size_t i) const { return masks_[i]; }
  bool has_class(std::size_t i, int c) const {
    return !is_uncertain(i) && ((masks_[i] >> c) & 1u) != 0;
  }
  // s_i = |class set|; 0 for uncertain pixels.
  int class_count(std::size_t i) const;

  void set_mask(std::size_t i, std::uint32_t mask) { masks_[i] = mask; }
  void set_uncertain(std::size_t i) { masks_[i] = kUncertain; }
  void set_single(std::size_t i, int c) { masks_[i] = 1u << c; }

  const std::vector<std::uint32_t>& masks() const { return masks_; }

  // Throws std::invalid_argument on empty sets or bits beyond channel C.
  void validate() const;

  friend bool operator==(const SoftSegLabel&, const SoftSegLabel&) = default;

 private:
  Dims dims_;
  int num_object_classes_ = 0;
  std::vector<std::uint32_t> masks_;
};

// Singleton soft label equivalent to a hard map; ignored pixels become
// UNCERTAIN.
SoftSegLabel soft_from_hard(const PixelLabelMap& hard, int num_object_classes);

}  // namespace dsup

#endif  // DSUP_LABELS_HPP_
