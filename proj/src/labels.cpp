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

#include "dsup/labels.hpp"

#include <bit>
#include <string>

namespace dsup {

PixelLabelMap::PixelLabelMap(Dims dims, std::uint8_t fill)
    : dims_(dims), labels_(dims.pixel_count(), fill) {}

PixelLabelMap::PixelLabelMap(Dims dims, std::vector<std::uint8_t> labels)
    : dims_(dims), labels_(std::move(labels)) {
  if (labels_.size() != dims_.pixel_count()) {
    throw std::invalid_argument("PixelLabelMap: label count does not match dims " +
                                to_string(dims_));
  }
}

void PixelLabelMap::validate(const ClassConfig& classes) const {
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    const int v = labels_[i];
    if (v != kIgnoreLabel && !classes.is_class(v)) {
      throw std::invalid_argument("PixelLabelMap: pixel " + std::to_string(i) + " has label " +
                                  std::to_string(v) + " outside {0.." +
                                  std::to_string(classes.num_object_classes()) + "} and != 255");
    }
  }
}

SoftSegLabel::SoftSegLabel(Dims dims, int num_object_classes)
    : dims_(dims), num_object_classes_(num_object_classes), masks_(dims.pixel_count(), 1u) {
  if (num_object_classes < 1 || num_object_classes + 1 > kMaxChannels) {
    throw std::invalid_argument("SoftSegLabel: supports 1..30 object classes, got " +
                                std::to_string(num_object_classes));
  }
}

int SoftSegLabel::class_count(std::size_t i) const {
  return is_uncertain(i) ? 0 : std::popcount(masks_[i]);
}

void SoftSegLabel::validate() const {
  const std::uint32_t allowed = (1u << (num_object_classes_ + 1)) - 1u;
  for (std::size_t i = 0; i < masks_.size(); ++i) {
    if (is_uncertain(i)) continue;
    if (masks_[i] == 0u) {
      throw std::invalid_argument("SoftSegLabel: pixel " + std::to_string(i) +
                                  " has an empty class set and is not uncertain");
    }
    if ((masks_[i] & ~allowed) != 0u) {
      throw std::invalid_argument("SoftSegLabel: pixel " + std::to_string(i) +
                                  " references a class beyond C");
    }
  }
}

SoftSegLabel soft_from_hard(const PixelLabelMap& hard, int num_object_classes) {
  SoftSegLabel soft(hard.dims(), num_object_classes);
  for (std::size_t i = 0; i < hard.pixel_count(); ++i) {
    if (hard[i] == kIgnoreLabel) {
      soft.set_uncertain(i);
    } else {
      if (hard[i] > num_object_classes) {
        throw std::invalid_argument("soft_from_hard: label exceeds C at pixel " + std::to_string(i));
      }
      soft.set_single(i, hard[i]);
    }
  }
  return soft;
}

}  // namespace dsup
