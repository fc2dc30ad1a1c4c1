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

#include <algorithm>
#include <random>

#include <gtest/gtest.h>

#include "dsup/boxmask.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

namespace dsup {
namespace {

using testing::bfs_fill;

RegionMask filled(int w, int h, std::uint8_t v) { return RegionMask(w, h, v); }

// Square ring of `value` at Chebyshev distance `d` from the grid center.
StrengthGrid ring_grid(int side, int d, double value) {
  StrengthGrid g(side, side);
  const int c = (side - 1) / 2;
  for (int y = 0; y < side; ++y) {
    for (int x = 0; x < side; ++x) {
      if (std::max(std::abs(x - c), std::abs(y - c)) == d) g.at(x, y) = value;
    }
  }
  return g;
}

// A 10x10 box at the image origin whose interior rectangle [ix0..ix1] x
// [iy0..iy1] is enclosed by a 0.6 ring. The corner (9,9) holds the box
// maximum 1.0 so normalization keeps the ring at 0.6.
BoundaryStrengthMap ringed_box(int ix0, int iy0, int ix1, int iy1) {
  BoundaryStrengthMap m(Dims(12, 12));
  for (int y = iy0 - 1; y <= iy1 + 1; ++y) {
    for (int x = ix0 - 1; x <= ix1 + 1; ++x) {
      const bool inside = x >= ix0 && x <= ix1 && y >= iy0 && y <= iy1;
      if (!inside) m.at(x, y) = 0.6;
    }
  }
  m.at(9, 9) = 1.0;
  return m;
}

const BoundingBox kTenBox{1, 0, 0, 9, 9};

TEST(NormalizeStrengthTest, ConstantBoxIsZero) {
  const BoundaryStrengthMap m(Dims(4, 4), 5.0);
  const StrengthGrid g = normalize_strength(m, {1, 0, 0, 3, 3});
  for (double v : g.cells) EXPECT_EQ(v, 0.0);
}

TEST(NormalizeStrengthTest, AffineMap) {
  const BoundaryStrengthMap a(Dims(1, 3), std::vector<double>{0, 2, 4});
  EXPECT_EQ(normalize_strength(a, {1, 0, 0, 2, 0}).cells, (std::vector<double>{0, 0.5, 1}));
  const BoundaryStrengthMap b(Dims(1, 4), std::vector<double>{1, 1, 3, 5});
  const StrengthGrid g = normalize_strength(b, {1, 0, 0, 3, 0});
  const std::vector<double> expected = {(1 - 1) / 4.0, (1 - 1) / 4.0, (3 - 1) / 4.0, (5 - 1) / 4.0};
  for (std::size_t k = 0; k < 4; ++k) EXPECT_DOUBLE_EQ(g.cells[k], expected[k]);
}

TEST(NormalizeStrengthTest, OnlyBoxPixelsCount) {
  BoundaryStrengthMap m(Dims(3, 3), 1.0);
  m.at(0, 0) = 100.0;
  m.at(2, 2) = 3.0;
  const StrengthGrid g = normalize_strength(m, {1, 1, 1, 2, 2});
  EXPECT_EQ(g.at(0, 0), 0.0);
  EXPECT_EQ(g.at(1, 1), 1.0);
}

TEST(ThresholdFillTest, ZeroStrengthFillsBox) {
  const StrengthGrid g(7, 5);
  for (double t : {0.25, 0.5, 0.75}) EXPECT_EQ(threshold_fill(g, t).area(), 35u);
}

TEST(ThresholdFillTest, RingExample) {
  const StrengthGrid g = ring_grid(9, 2, 0.6);
  for (double t : {0.25, 0.5}) {
    const RegionMask r = threshold_fill(g, t);
    EXPECT_EQ(r.area(), 9u) << "t=" << t;
    EXPECT_EQ(r.cells, bfs_fill(g, t).cells);
  }
  EXPECT_EQ(threshold_fill(g, 0.75).area(), 81u);
}

TEST(ThresholdFillTest, BoundaryCenterGivesEmptyRegion) {
  StrengthGrid g(5, 5);
  g.at(2, 2) = 1.0;
  EXPECT_EQ(threshold_fill(g, 0.5).area(), 0u);
}

TEST(ThresholdFillTest, DiagonalGapsDoNotLeak) {
  // A diagonal line blocks 4-connected flow.
  StrengthGrid g(6, 6);
  for (int k = 0; k < 6; ++k) g.at(k, 5 - k) = 1.0;
  const RegionMask r = threshold_fill(g, 0.5);
  EXPECT_EQ(r.cells, bfs_fill(g, 0.5).cells);
  EXPECT_EQ(r.at(5, 5), 0);
}

TEST(ThresholdFillTest, MatchesBreadthFirstOracle) {
  std::mt19937_64 rng(41);
  std::uniform_int_distribution<int> side(1, 24);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 300; ++trial) {
    StrengthGrid g(side(rng), side(rng));
    for (double& v : g.cells) v = u(rng) < 0.35 ? u(rng) : 0.1 * u(rng);
    for (double t : {0.25, 0.5, 0.75}) ASSERT_EQ(threshold_fill(g, t).cells, bfs_fill(g, t).cells);
  }
}

TEST(SelectConfidentTest, AllFullMasks) {
  const BoundingBox box{1, 0, 0, 9, 9};
  const std::vector<RegionMask> masks(3, filled(10, 10, 1));
  const auto [conf, unc] = select_confident(masks, box, BoxMaskConfig{});
  EXPECT_EQ(conf.area(), 100u);
  EXPECT_EQ(unc.area(), 0u);
}

// Nested masks over a 10x10 box that cover the first `a`, `b`, `c` cells.
std::vector<RegionMask> nested(std::size_t a, std::size_t b, std::size_t c) {
  std::vector<RegionMask> masks;
  for (std::size_t n : {a, b, c}) {
    RegionMask m(10, 10);
    std::fill(m.cells.begin(), m.cells.begin() + static_cast<std::ptrdiff_t>(n), std::uint8_t{1});
    masks.push_back(m);
  }
  return masks;
}

TEST(SelectConfidentTest, SkipsSmallFineMasks) {
  const auto masks = nested(10, 20, 90);
  const auto [conf, unc] = select_confident(masks, kTenBox, BoxMaskConfig{});
  EXPECT_EQ(conf.cells, masks[2].cells);
  EXPECT_EQ(unc.area(), 0u);
}

TEST(SelectConfidentTest, FinestQualifyingMaskWins) {
  const auto masks = nested(35, 60, 90);
  const auto [conf, unc] = select_confident(masks, kTenBox, BoxMaskConfig{});
  EXPECT_EQ(conf.cells, masks[0].cells);
  EXPECT_EQ(unc.area(), 55u);
  for (std::size_t k = 0; k < 100; ++k) EXPECT_EQ(unc.cells[k], (k >= 35 && k < 90) ? 1 : 0);
}

TEST(SelectConfidentTest, AlphaIsInclusive) {
  const auto masks = nested(30, 60, 90);
  const auto [conf, unc] = select_confident(masks, kTenBox, BoxMaskConfig{});
  EXPECT_EQ(conf.area(), 30u);
}

TEST(SelectConfidentTest, FallsBackToCoarsest) {
  BoxMaskConfig cfg;
  cfg.alpha_percent = 100.0;
  const auto masks = nested(35, 60, 90);
  const auto [conf, unc] = select_confident(masks, kTenBox, cfg);
  EXPECT_EQ(conf.cells, masks[2].cells);
  EXPECT_EQ(unc.area(), 0u);
}

TEST(BoxToMaskTest, ZeroStrengthIsWholeBox) {
  const BoundaryStrengthMap m(Dims(20, 20));
  const BoundingBox box{3, 2, 4, 11, 9};
  const ObjectMask om = box_to_mask(m, box, BoxMaskConfig{});
  EXPECT_EQ(om.box.class_id, 3);
  EXPECT_EQ(om.confident.area(), box.area());
  EXPECT_EQ(om.uncertain.area(), 0u);
}

TEST(BoxToMaskTest, RingAroundFortyPercent) {
  // Interior 5 x 8 = 40 cells around the box center (4, 4).
  const BoundaryStrengthMap m = ringed_box(2, 1, 6, 8);
  const ObjectMask om = box_to_mask(m, kTenBox, BoxMaskConfig{});
  EXPECT_EQ(om.confident.area(), 40u);
  for (int y = 0; y < 10; ++y) {
    for (int x = 0; x < 10; ++x) {
      const bool inner = x >= 2 && x <= 6 && y >= 1 && y <= 8;
      EXPECT_EQ(om.confident.at(x, y), inner ? 1 : 0);
      // The coarsest fill crosses the ring and stops only at the maximum.
      const bool coarse = !(x == 9 && y == 9);
      EXPECT_EQ(om.uncertain.at(x, y), (coarse && !inner) ? 1 : 0);
    }
  }
}

TEST(BoxToMaskTest, RingAroundTenPercentDissolves) {
  // Interior 2 x 5 = 10 cells; below alpha at the two fine cutoffs.
  const BoundaryStrengthMap m = ringed_box(4, 2, 5, 6);
  const ObjectMask om = box_to_mask(m, kTenBox, BoxMaskConfig{});
  // Everything but the single maximum-strength cell.
  EXPECT_EQ(om.confident.area(), 99u);
  EXPECT_EQ(om.confident.at(9, 9), 0);
  EXPECT_EQ(om.uncertain.area(), 0u);
}

TEST(BoxToMaskTest, AlphaHundredFallsBackToCoarsest) {
  const BoundaryStrengthMap m = ringed_box(2, 1, 6, 8);
  BoxMaskConfig cfg;
  cfg.alpha_percent = 100.0;
  const ObjectMask om = box_to_mask(m, kTenBox, cfg);
  EXPECT_EQ(om.confident.area(), 99u);
  EXPECT_EQ(om.uncertain.area(), 0u);
}

ObjectMask full_mask(BoundingBox box) {
  return {box, RegionMask(box.width(), box.height(), 1), RegionMask(box.width(), box.height(), 0)};
}

TEST(MergeMasksTest, OverlapKeepsBothClasses) {
  const Dims dims(8, 8);
  const std::vector<ObjectMask> masks = {full_mask({1, 0, 0, 4, 4}), full_mask({2, 3, 3, 7, 7})};
  const SoftSegLabel s = merge_masks(masks, dims, ClassConfig(3));
  EXPECT_EQ(s.class_mask(dims.index(4, 4)), (1u << 1) | (1u << 2));
  EXPECT_EQ(s.class_count(dims.index(3, 4)), 2);
  EXPECT_EQ(s.class_mask(dims.index(0, 0)), 1u << 1);
  EXPECT_EQ(s.class_mask(dims.index(7, 0)), 1u << 0);
}

TEST(MergeMasksTest, NoBoxesIsBackground) {
  const Dims dims(4, 5);
  const SoftSegLabel s = merge_masks({}, dims, ClassConfig(2));
  for (std::size_t i = 0; i < dims.pixel_count(); ++i) EXPECT_EQ(s.class_mask(i), 1u);
}

TEST(MergeMasksTest, ConfidentBeatsUncertain) {
  const Dims dims(1, 1);
  ObjectMask a{{1, 0, 0, 0, 0}, RegionMask(1, 1, 0), RegionMask(1, 1, 1)};
  ObjectMask b{{2, 0, 0, 0, 0}, RegionMask(1, 1, 1), RegionMask(1, 1, 0)};
  for (const auto& order : {std::vector<ObjectMask>{a, b}, std::vector<ObjectMask>{b, a}}) {
    const SoftSegLabel s = merge_masks(order, dims, ClassConfig(2));
    EXPECT_EQ(s.class_mask(0), 1u << 2);
  }
}

// Exhaustive check of the precedence rule on three pixels covered by two
// boxes, over every (confident, uncertain, none) state per box and pixel.
TEST(MergeMasksTest, ExhaustivePrecedence) {
  const Dims dims(1, 3);
  const ClassConfig classes(2);
  for (int code = 0; code < 729; ++code) {
    int rest = code;
    ObjectMask m[2] = {{{1, 0, 0, 2, 0}, RegionMask(3, 1), RegionMask(3, 1)},
                       {{2, 0, 0, 2, 0}, RegionMask(3, 1), RegionMask(3, 1)}};
    int state[2][3];
    for (int b = 0; b < 2; ++b) {
      for (int p = 0; p < 3; ++p) {
        state[b][p] = rest % 3;
        rest /= 3;
        m[b].confident.at(p, 0) = state[b][p] == 1;
        m[b].uncertain.at(p, 0) = state[b][p] == 2;
      }
    }
    const SoftSegLabel s = merge_masks(std::vector<ObjectMask>{m[0], m[1]}, dims, classes);
    for (int p = 0; p < 3; ++p) {
      std::uint32_t conf = 0;
      bool unc = false;
      for (int b = 0; b < 2; ++b) {
        if (state[b][p] == 1) conf |= 1u << (b + 1);
        if (state[b][p] == 2) unc = true;
      }
      const std::size_t i = static_cast<std::size_t>(p);
      if (conf != 0) {
        EXPECT_EQ(s.class_mask(i), conf);
      } else if (unc) {
        EXPECT_TRUE(s.is_uncertain(i));
      } else {
        EXPECT_EQ(s.class_mask(i), 1u);
      }
    }
  }
}

TEST(RawBoxLabelTest, SingleAndNested) {
  const Dims dims(6, 6);
  const ClassConfig classes(2);
  const std::vector<BoundingBox> one = {{1, 1, 1, 3, 3}};
  const SoftSegLabel a = raw_box_label(one, dims, classes);
  EXPECT_EQ(a.class_mask(dims.index(2, 2)), 1u << 1);
  EXPECT_EQ(a.class_mask(dims.index(4, 4)), 1u);

  const std::vector<BoundingBox> nested_boxes = {{1, 0, 0, 5, 5}, {2, 2, 2, 3, 3}};
  const SoftSegLabel b = raw_box_label(nested_boxes, dims, classes);
  EXPECT_EQ(b.class_mask(dims.index(2, 3)), (1u << 1) | (1u << 2));
  EXPECT_EQ(b.class_mask(dims.index(0, 5)), 1u << 1);

  const SoftSegLabel c = raw_box_label({}, dims, classes);
  for (std::size_t i = 0; i < dims.pixel_count(); ++i) EXPECT_EQ(c.class_mask(i), 1u);
}

TEST(HardenTest, SingletonsUnchanged) {
  std::mt19937_64 rng(5);
  const PixelLabelMap hard = testing::random_label_map(Dims(6, 7), 4, rng, 0.1);
  EXPECT_EQ(harden(soft_from_hard(hard, 4), 99), hard);
}

SoftSegLabel overlap_scene() {
  // Background with a 3x4 region labeled {1,2} and an uncertain pixel.
  SoftSegLabel s(Dims(6, 6), 2);
  for (int y = 1; y <= 3; ++y) {
    for (int x = 1; x <= 4; ++x) s.set_mask(Dims(6, 6).index(x, y), (1u << 1) | (1u << 2));
  }
  s.set_uncertain(Dims(6, 6).index(5, 5));
  return s;
}

TEST(HardenTest, RegionGetsOneClassDeterministically) {
  const SoftSegLabel s = overlap_scene();
  const PixelLabelMap a = harden(s, 7);
  EXPECT_EQ(a, harden(s, 7));
  const std::uint8_t chosen = a.at(1, 1);
  EXPECT_TRUE(chosen == 1 || chosen == 2);
  for (int y = 1; y <= 3; ++y) {
    for (int x = 1; x <= 4; ++x) EXPECT_EQ(a.at(x, y), chosen);
  }
  EXPECT_EQ(a.at(5, 5), kIgnoreLabel);
  EXPECT_EQ(a.at(0, 0), 0);
}

TEST(HardenTest, ChoiceIsBalancedOverSeeds) {
  const SoftSegLabel s = overlap_scene();
  int ones = 0;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) ones += harden(s, seed).at(2, 2) == 1;
  EXPECT_GE(ones, 450);
  EXPECT_LE(ones, 550);
}

TEST(BoxStrategyTest, Names) {
  EXPECT_EQ(parse_box_strategy("ucm"), BoxStrategy::kUcm);
  EXPECT_EQ(parse_box_strategy("ucm-soft"), BoxStrategy::kUcm);
  EXPECT_EQ(parse_box_strategy("rawbox"), BoxStrategy::kRawBox);
  EXPECT_EQ(parse_box_strategy("hardseg"), BoxStrategy::kHardSeg);
  EXPECT_THROW(parse_box_strategy("boxes"), std::invalid_argument);
}

TEST(BoxStrategyTest, BaselinesAreUnimplemented) {
  const BoundaryStrengthMap m(Dims(8, 8));
  const std::vector<BoundingBox> boxes = {{1, 0, 0, 3, 3}};
  for (auto s : {BoxStrategy::kGrabCut, BoxStrategy::kMcg}) {
    try {
      make_box_target(s, boxes, m, ClassConfig(2), BoxMaskConfig{}, 0);
      FAIL() << "expected an error";
    } catch (const std::invalid_argument& e) {
      EXPECT_NE(std::string(e.what()).find("unimplemented baseline"), std::string::npos);
    }
  }
}

TEST(BoxStrategyTest, TargetsIgnoreBoxOrder) {
  std::mt19937_64 rng(3);
  const BoundaryStrengthMap m = testing::random_strength_map(Dims(20, 20), rng);
  std::vector<BoundingBox> boxes = {{1, 0, 0, 12, 12}, {2, 6, 5, 19, 17}, {3, 2, 8, 9, 19}};
  for (auto s : {BoxStrategy::kUcm, BoxStrategy::kRawBox, BoxStrategy::kHardSeg}) {
    const SoftSegLabel a = make_box_target(s, boxes, m, ClassConfig(3), BoxMaskConfig{}, 5);
    std::reverse(boxes.begin(), boxes.end());
    const SoftSegLabel b = make_box_target(s, boxes, m, ClassConfig(3), BoxMaskConfig{}, 5);
    EXPECT_EQ(a, b) << box_strategy_name(s);
  }
}

TEST(BoxMaskConfigTest, Validation) {
  BoxMaskConfig cfg;
  cfg.alpha_percent = 0.0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.thresholds = {0.5, 0.25};
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg.thresholds = {};
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

}  // namespace
}  // namespace dsup
