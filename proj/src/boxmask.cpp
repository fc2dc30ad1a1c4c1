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

#include "dsup/boxmask.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <deque>
#include <random>

namespace dsup {

void BoundingBox::validate(const Dims& dims, const ClassConfig& classes) const {
  if (class_id < 1 || class_id > classes.num_object_classes()) {
    throw std::invalid_argument("BoundingBox: class id " + std::to_string(class_id) +
                                " outside {1.." + std::to_string(classes.num_object_classes()) +
                                "}");
  }
  if (x0 < 0 || y0 < 0 || x0 > x1 || y0 > y1 || x1 >= dims.width || y1 >= dims.height) {
    throw std::invalid_argument("BoundingBox: (" + std::to_string(x0) + "," + std::to_string(y0) +
                                ")-(" + std::to_string(x1) + "," + std::to_string(y1) +
                                ") is not inside " + to_string(dims));
  }
}

BoundaryStrengthMap::BoundaryStrengthMap(Dims dims, double fill)
    : dims_(dims), strength_(dims.pixel_count(), fill) {}

BoundaryStrengthMap::BoundaryStrengthMap(Dims dims, std::vector<double> strength)
    : dims_(dims), strength_(std::move(strength)) {
  if (strength_.size() != dims_.pixel_count()) {
    throw std::invalid_argument("BoundaryStrengthMap: value count does not match dims");
  }
}

void BoundaryStrengthMap::validate() const {
  for (double s : strength_) {
    if (!std::isfinite(s) || s < 0.0) {
      throw std::invalid_argument("BoundaryStrengthMap: strengths must be finite and >= 0");
    }
  }
}

void BoxMaskConfig::validate() const {
  if (!(alpha_percent > 0.0 && alpha_percent <= 100.0)) {
    throw std::invalid_argument("BoxMaskConfig: alpha must be in (0, 100]");
  }
  if (thresholds.empty()) throw std::invalid_argument("BoxMaskConfig: no thresholds");
  for (std::size_t k = 0; k < thresholds.size(); ++k) {
    if (!(thresholds[k] > 0.0 && thresholds[k] < 1.0)) {
      throw std::invalid_argument("BoxMaskConfig: thresholds must lie in (0, 1)");
    }
    if (k > 0 && !(thresholds[k] > thresholds[k - 1])) {
      throw std::invalid_argument("BoxMaskConfig: thresholds must be strictly increasing");
    }
  }
}

std::size_t RegionMask::area() const {
  return static_cast<std::size_t>(std::count(cells.begin(), cells.end(), std::uint8_t{1}));
}

StrengthGrid normalize_strength(const BoundaryStrengthMap& ucm, const BoundingBox& box) {
  if (box.x0 < 0 || box.y0 < 0 || box.x1 >= ucm.dims().width || box.y1 >= ucm.dims().height ||
      box.x0 > box.x1 || box.y0 > box.y1) {
    throw std::invalid_argument("normalize_strength: box outside strength map");
  }
  StrengthGrid grid(box.width(), box.height());
  double lo = ucm.at(box.x0, box.y0);
  double hi = lo;
  for (int y = box.y0; y <= box.y1; ++y) {
    for (int x = box.x0; x <= box.x1; ++x) {
      lo = std::min(lo, ucm.at(x, y));
      hi = std::max(hi, ucm.at(x, y));
    }
  }
  if (hi == lo) return grid;
  const double range = hi - lo;
  for (int y = box.y0; y <= box.y1; ++y) {
    for (int x = box.x0; x <= box.x1; ++x) {
      grid.at(x - box.x0, y - box.y0) = (ucm.at(x, y) - lo) / range;
    }
  }
  return grid;
}

RegionMask threshold_fill(const StrengthGrid& norm, double cutoff) {
  RegionMask region(norm.width, norm.height);
  const int cx = (norm.width - 1) / 2;
  const int cy = (norm.height - 1) / 2;
  if (norm.at(cx, cy) >= cutoff) return region;

  // Scanline fill: each popped seed expands to a full horizontal run, then
  // queues one seed per run segment in the rows above and below.
  std::vector<PixelCoord> stack{{cx, cy}};
  auto open = [&](int x, int y) { return region.at(x, y) == 0 && norm.at(x, y) < cutoff; };
  while (!stack.empty()) {
    auto [sx, sy] = stack.back();
    stack.pop_back();
    if (!open(sx, sy)) continue;
    int left = sx;
    while (left > 0 && open(left - 1, sy)) --left;
    int right = sx;
    while (right + 1 < norm.width && open(right + 1, sy)) ++right;
    for (int x = left; x <= right; ++x) region.at(x, sy) = 1;
    for (int ny : {sy - 1, sy + 1}) {
      if (ny < 0 || ny >= norm.height) continue;
      bool in_run = false;
      for (int x = left; x <= right; ++x) {
        const bool o = open(x, ny);
        if (o && !in_run) stack.push_back({x, ny});
        in_run = o;
      }
    }
  }
  return region;
}

std::pair<RegionMask, RegionMask> select_confident(std::span<const RegionMask> masks,
                                                   const BoundingBox& box,
                                                   const BoxMaskConfig& cfg) {
  if (masks.empty()) throw std::invalid_argument("select_confident: no region masks");
  for (const auto& m : masks) {
    if (m.width != box.width() || m.height != box.height()) {
      throw std::invalid_argument("select_confident: region mask does not match box size");
    }
  }
  const double needed = cfg.alpha_percent / 100.0 * static_cast<double>(box.area());
  const RegionMask& coarsest = masks.back();
  const RegionMask* confident = &coarsest;
  for (const auto& m : masks) {
    if (static_cast<double>(m.area()) >= needed) {
      confident = &m;
      break;
    }
  }
  RegionMask uncertain(box.width(), box.height());
  for (std::size_t k = 0; k < uncertain.cells.size(); ++k) {
    uncertain.cells[k] = (coarsest.cells[k] != 0 && confident->cells[k] == 0) ? 1 : 0;
  }
  return {*confident, std::move(uncertain)};
}

ObjectMask box_to_mask(const BoundaryStrengthMap& ucm, const BoundingBox& box,
                       const BoxMaskConfig& cfg) {
  cfg.validate();
  const StrengthGrid norm = normalize_strength(ucm, box);
  std::vector<RegionMask> scales;
  scales.reserve(cfg.thresholds.size());
  for (double t : cfg.thresholds) scales.push_back(threshold_fill(norm, t));
  auto [confident, uncertain] = select_confident(scales, box, cfg);
  return {box, std::move(confident), std::move(uncertain)};
}

SoftSegLabel merge_masks(std::span<const ObjectMask> masks, const Dims& dims,
                         const ClassConfig& classes) {
  std::vector<std::uint32_t> confident(dims.pixel_count(), 0u);
  std::vector<std::uint8_t> uncertain(dims.pixel_count(), 0);
  for (const auto& m : masks) {
    m.box.validate(dims, classes);
    const std::uint32_t bit = 1u << m.box.class_id;
    for (int y = 0; y < m.box.height(); ++y) {
      for (int x = 0; x < m.box.width(); ++x) {
        const std::size_t i = dims.index(m.box.x0 + x, m.box.y0 + y);
        if (m.confident.at(x, y)) confident[i] |= bit;
        if (m.uncertain.at(x, y)) uncertain[i] = 1;
      }
    }
  }
  SoftSegLabel soft(dims, classes.num_object_classes());
  for (std::size_t i = 0; i < dims.pixel_count(); ++i) {
    if (confident[i] != 0u) {
      soft.set_mask(i, confident[i]);
    } else if (uncertain[i]) {
      soft.set_uncertain(i);
    }
  }
  return soft;
}

SoftSegLabel raw_box_label(std::span<const BoundingBox> boxes, const Dims& dims,
                           const ClassConfig& classes) {
  std::vector<std::uint32_t> claimed(dims.pixel_count(), 0u);
  for (const auto& b : boxes) {
    b.validate(dims, classes);
    for (int y = b.y0; y <= b.y1; ++y) {
      for (int x = b.x0; x <= b.x1; ++x) claimed[dims.index(x, y)] |= 1u << b.class_id;
    }
  }
  SoftSegLabel soft(dims, classes.num_object_classes());
  for (std::size_t i = 0; i < claimed.size(); ++i) {
    if (claimed[i] != 0u) soft.set_mask(i, claimed[i]);
  }
  return soft;
}

PixelLabelMap harden(const SoftSegLabel& soft, std::uint64_t seed) {
  const Dims& dims = soft.dims();
  PixelLabelMap hard(dims);
  std::vector<std::uint8_t> done(dims.pixel_count(), 0);
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> component;

  for (std::size_t i = 0; i < dims.pixel_count(); ++i) {
    if (soft.is_uncertain(i)) {
      hard[i] = kIgnoreLabel;
      continue;
    }
    const std::uint32_t mask = soft.class_mask(i);
    if (std::popcount(mask) == 1) {
      hard[i] = static_cast<std::uint8_t>(std::countr_zero(mask));
      continue;
    }
    if (done[i]) continue;

    // Collect the 4-connected region sharing this exact class set.
    component.clear();
    std::deque<std::size_t> queue{i};
    done[i] = 1;
    while (!queue.empty()) {
      const std::size_t p = queue.front();
      queue.pop_front();
      component.push_back(p);
      const auto [px, py] = dims.coord(p);
      const PixelCoord nbrs[4] = {{px - 1, py}, {px + 1, py}, {px, py - 1}, {px, py + 1}};
      for (const auto& n : nbrs) {
        if (!dims.contains(n.x, n.y)) continue;
        const std::size_t q = dims.index(n.x, n.y);
        if (!done[q] && !soft.is_uncertain(q) && soft.class_mask(q) == mask) {
          done[q] = 1;
          queue.push_back(q);
        }
      }
    }

    std::vector<int> options;
    for (int c = 0; c < 32; ++c) {
      if ((mask >> c) & 1u) options.push_back(c);
    }
    std::uniform_int_distribution<std::size_t> pick(0, options.size() - 1);
    const auto chosen = static_cast<std::uint8_t>(options[pick(rng)]);
    for (std::size_t p : component) hard[p] = chosen;
  }
  return hard;
}

BoxStrategy parse_box_strategy(std::string_view name) {
  if (name == "ucm" || name == "ucm-soft") return BoxStrategy::kUcm;
  if (name == "rawbox") return BoxStrategy::kRawBox;
  if (name == "hardseg") return BoxStrategy::kHardSeg;
  if (name == "grabcut") return BoxStrategy::kGrabCut;
  if (name == "mcg") return BoxStrategy::kMcg;
  throw std::invalid_argument("unknown box strategy '" + std::string(name) +
                              "' (expected ucm, rawbox or hardseg)");
}

std::string_view box_strategy_name(BoxStrategy strategy) {
  switch (strategy) {
    case BoxStrategy::kUcm: return "ucm";
    case BoxStrategy::kRawBox: return "rawbox";
    case BoxStrategy::kHardSeg: return "hardseg";
    case BoxStrategy::kGrabCut: return "grabcut";
    case BoxStrategy::kMcg: return "mcg";
  }
  return "unknown";
}

SoftSegLabel make_box_target(BoxStrategy strategy, std::span<const BoundingBox> boxes,
                             const BoundaryStrengthMap& ucm, const ClassConfig& classes,
                             const BoxMaskConfig& cfg, std::uint64_t seed) {
  const Dims& dims = ucm.dims();
  switch (strategy) {
    case BoxStrategy::kRawBox:
      return raw_box_label(boxes, dims, classes);
    case BoxStrategy::kUcm:
    case BoxStrategy::kHardSeg: {
      std::vector<BoundingBox> sorted(boxes.begin(), boxes.end());
      std::sort(sorted.begin(), sorted.end());
      std::vector<ObjectMask> masks;
      masks.reserve(sorted.size());
      for (const auto& b : sorted) {
        b.validate(dims, classes);
        masks.push_back(box_to_mask(ucm, b, cfg));
      }
      SoftSegLabel soft = merge_masks(masks, dims, classes);
      if (strategy == BoxStrategy::kUcm) return soft;
      return soft_from_hard(harden(soft, seed), classes.num_object_classes());
    }
    case BoxStrategy::kGrabCut:
    case BoxStrategy::kMcg:
      break;
  }
  throw std::invalid_argument("box strategy '" + std::string(box_strategy_name(strategy)) +
                              "' is an unimplemented baseline");
}

}  // namespace dsup
