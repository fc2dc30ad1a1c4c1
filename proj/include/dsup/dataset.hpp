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

#ifndef DSUP_DATASET_HPP_
#define DSUP_DATASET_HPP_

#include <optional>
#include <string>
#include <vector>

#include "dsup/boxmask.hpp"
#include "dsup/core.hpp"
#include "dsup/labels.hpp"
#include "dsup/losses.hpp"

namespace dsup {

// One image with whichever annotations are available. Which of them is
// used during training depends on the subset the sample is assigned to.
struct Sample {
  std::string id;
  RgbImage image;
  std::optional<PixelLabelMap> pixel_labels;
  std::vector<BoundingBox> boxes;
  std::optional<ImageLabel> image_label;
  std::optional<BoundaryStrengthMap> strength;
  // Precomputed box-branch target (soft labels, or hard pseudo-labels
  // stored as singleton sets).
  std::optional<SoftSegLabel> box_target;
};

struct Dataset {
  int num_object_classes = 0;
  Dims dims;
  std::vector<Sample> train;
  std::vector<Sample> val;

  ClassConfig classes() const { return ClassConfig(num_object_classes); }
};

}  // namespace dsup

#endif  // DSUP_DATASET_HPP_
