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

// Box-level annotations to soft segmentation labels.
//
// Each box is turned into an object mask by normalizing the boundary
// strength inside the box, flood filling from the box center at several
// strength cutoffs, and keeping the first (finest) region that covers at
// least alpha percent of the box. The remaining part of the coarsest region
// is marked uncertain. Object masks of one image are then merged into a
// per-pixel class set; pixels claimed by several classes keep all of them.

#ifndef DSUP_BOXMASK_HPP_
#define DSUP_BOXMASK_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dsup/core.hpp"
#include "dsup/labels.hpp"

namespace dsup {

// Inclusive pixel rectangle annotated with an object class in {1..C}.
struct BoundingBox {
  int class_id = 1;
  int x0 = 0;
  int y0 = 0;
  int x1 = 0;
  int y1 = 0;

  int width() const { return x1 - x0 + 1; }
  int height() const { return y1 - y0 + 1; }
  std::size_t area() const {
    return static_cast<std::size_t>(width()) * static_cast<std::size_t>(height());
  }
  bool contains(int x, int y) const { return x >= x0 && x <= x1 && y >= y0 && y <= y1; }
  PixelCoord center() const { return {(x0 + x1) / 2, (y0 + y1) / 2}; }

  void validate(const Dims& dims, const ClassConfig& classes) const;

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
  friend auto operator<=>(const BoundingBox&, const BoundingBox&) = default;
};

class BoundaryStrengthMap {
 public:
  BoundaryStrengthMap() = default;
  explicit BoundaryStrengthMap(Dims dims, double fill = 0.0);
  BoundaryStrengthMap(Dims dims, std::vector<double> strength);

  const Dims& dims() const { return dims_; }
  double at(int x, int y) const { return strength_[dims_.index(x, y)]; }
  double& at(int x, int y) { return strength_[dims_.index(x, y)]; }
  double operator[](std::size_t i) const { return strength_[i]; }
  double& operator[](std::size_t i) { return strength_[i]; }
  const std::vector<double>& values() const { return strength_; }

  // Nonnegative and finite everywhere.
  void validate() const;

 private:
  Dims dims_;
  std::vector<double> strength_;
};

struct BoxMaskConfig {
  double alpha_percent = 30.0;
  std::vector<double> thresholds = {0.25, 0.5, 0.75};

  void validate() const;
};

// Dense grid covering one box, in box-local coordinates (x - x0, y - y0).
template <typename T>
struct BoxGrid {
  int width = 0;
  int height = 0;
  std::vector<T> cells;

  BoxGrid() = default;
  BoxGrid(int w, int h, T fill = T{})
      : width(w), height(h), cells(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), fill) {}

  T& at(int x, int y) { return cells[static_cast<std::size_t>(y) * width + x]; }
  const T& at(int x, int y) const { return cells[static_cast<std::size_t>(y) * width + x]; }
};

using StrengthGrid = BoxGrid<double>;

// Binary region inside a box.
struct RegionMask : BoxGrid<std::uint8_t> {
  using BoxGrid<std::uint8_t>::BoxGrid;
  std::size_t area() const;
};

struct ObjectMask {
  BoundingBox box;
  RegionMask confident;
  RegionMask uncertain;
};

// Min-max normalization of the strengths inside `box`. A constant box
// (including a single pixel) normalizes to all zeros.
StrengthGrid normalize_strength(const BoundaryStrengthMap& ucm, const BoundingBox& box);

// Pixels with normalized strength >= cutoff are boundary. Returns the
// 4-connected region of non-boundary pixels reachable from the box center;
// empty when the center itself is boundary.
RegionMask threshold_fill(const StrengthGrid& norm, double cutoff);

// `masks` are ordered fine to coarse (ascending cutoff). The confident mask
// is the first one covering >= alpha% of the box, falling back to the
// coarsest; uncertain = coarsest \ confident.
std::pair<RegionMask, RegionMask> select_confident(std::span<const RegionMask> masks,
                                                   const BoundingBox& box,
                                                   const BoxMaskConfig& cfg);

ObjectMask box_to_mask(const BoundaryStrengthMap& ucm, const BoundingBox& box,
                       const BoxMaskConfig& cfg);

// Order-independent merge. Confident classes win over uncertain, uncertain
// wins over background; unclaimed pixels are background {0}.
SoftSegLabel merge_masks(std::span<const ObjectMask> masks, const Dims& dims,
                         const ClassConfig& classes);

// Every pixel inside a box of class c gets c; overlaps become soft sets.
SoftSegLabel raw_box_label(std::span<const BoundingBox> boxes, const Dims& dims,
                           const ClassConfig& classes);

// Collapses multi-class sets to one class chosen uniformly per 4-connected
// region of identical class sets; UNCERTAIN becomes kIgnoreLabel.
PixelLabelMap harden(const SoftSegLabel& soft, std::uint64_t seed);

enum class BoxStrategy { kUcm, kRawBox, kHardSeg, kGrabCut, kMcg };

// Accepts "ucm", "ucm-soft", "rawbox", "hardseg", "grabcut", "mcg".
BoxStrategy parse_box_strategy(std::string_view name);
std::string_view box_strategy_name(BoxStrategy strategy);

// Box-branch training target for one image under `strategy`. The grabcut and
// mcg baselines are not implemented and throw std::invalid_argument.
SoftSegLabel make_box_target(BoxStrategy strategy, std::span<const BoundingBox> boxes,
                             const BoundaryStrengthMap& ucm, const ClassConfig& classes,
                             const BoxMaskConfig& cfg, std::uint64_t seed);

}  // namespace dsup

#endif  // DSUP_BOXMASK_HPP_
