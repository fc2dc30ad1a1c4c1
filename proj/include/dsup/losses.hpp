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

// Annotation-specific losses over one shared feature map. Each returns the
// loss value together with the analytic gradient with respect to every
// feature-map entry.
//
//   image:  -(1/C) sum_{c>=1} [l_c log sig(v_c) + (1 - l_c) log(1 - sig(v_c))],
//           v = channel means of f. Background is excluded.
//   box:    -(1/C) sum_i (1/s_i) sum_{c in S_i} log softmax(f_i)_c,
//           uncertain pixels skipped.
//   pixel:  -(1/C) sum_i log softmax(f_i)_{p_i}, ignored pixels skipped.
//
// Box and pixel losses are sums over pixels, not means, so they scale with
// image area.

#ifndef DSUP_LOSSES_HPP_
#define DSUP_LOSSES_HPP_

#include <cstdint>
#include <vector>

#include "dsup/core.hpp"
#include "dsup/labels.hpp"

namespace dsup {

// Presence vector l_1..l_C (background excluded).
struct ImageLabel {
  std::vector<std::uint8_t> presence;

  int num_object_classes() const { return static_cast<int>(presence.size()); }
  bool any_present() const;
  // Entries must be 0/1 and the length must equal C.
  void validate(const ClassConfig& classes) const;

  friend bool operator==(const ImageLabel&, const ImageLabel&) = default;
};

ClassScoreVector global_average_pool(const FeatureMap& f);

LossResult image_loss(const FeatureMap& f, const ImageLabel& label);
LossResult box_loss(const FeatureMap& f, const SoftSegLabel& soft);
LossResult pixel_loss(const FeatureMap& f, const PixelLabelMap& labels);

}  // namespace dsup

#endif  // DSUP_LOSSES_HPP_
