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

#include "dsup/metrics.hpp"
#include "dsup/synthdata.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

namespace dsup {
namespace {

TEST(AccumulateTest, PerfectPredictionIsDiagonal) {
  std::mt19937_64 rng(1);
  const PixelLabelMap gt = testing::random_label_map(Dims(7, 9), 3, rng);
  ConfusionMatrix cm(4);
  accumulate(cm, gt, gt);
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      if (i != j) {
        EXPECT_EQ(cm.at(i, j), 0u);
      }
    }
  }
  EXPECT_EQ(cm.total(), 63u);
}

TEST(AccumulateTest, IgnoredGroundTruthIsSkipped) {
  std::mt19937_64 rng(2);
  const PixelLabelMap pred = testing::random_label_map(Dims(4, 4), 3, rng);
  ConfusionMatrix cm(4);
  accumulate(cm, pred, PixelLabelMap(Dims(4, 4), kIgnoreLabel));
  EXPECT_EQ(cm, ConfusionMatrix(4));
}

TEST(AccumulateTest, MatchesNaiveTally) {
  std::mt19937_64 rng(3);
  const PixelLabelMap pred = testing::random_label_map(Dims(10, 10), 3, rng);
  const PixelLabelMap gt = testing::random_label_map(Dims(10, 10), 3, rng, 0.1);
  ConfusionMatrix cm(4);
  accumulate(cm, pred, gt);
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      std::uint64_t n = 0;
      for (int y = 0; y < 10; ++y) {
        for (int x = 0; x < 10; ++x) n += gt.at(x, y) == i && pred.at(x, y) == j;
      }
      EXPECT_EQ(cm.at(i, j), n);
    }
  }
}

TEST(AccumulateTest, Errors) {
  ConfusionMatrix cm(3);
  EXPECT_THROW(accumulate(cm, PixelLabelMap(Dims(2, 2)), PixelLabelMap(Dims(2, 3))), std::invalid_argument);
  EXPECT_THROW(accumulate(cm, PixelLabelMap(Dims(2, 2), 3), PixelLabelMap(Dims(2, 2))), std::invalid_argument);
}

TEST(ComputeMetricsTest, Perfect) {
  ConfusionMatrix cm(3);
  cm.at(0, 0) = 10;
  cm.at(2, 2) = 4;
  const SegmentationMetrics m = compute_metrics(cm);
  EXPECT_EQ(m.pixel_accuracy, 1.0);
  EXPECT_EQ(m.mean_accuracy, 1.0);
  EXPECT_EQ(m.mean_iu, 1.0);
  EXPECT_EQ(m.frequency_weighted_iu, 1.0);
  EXPECT_FALSE(m.per_class_iu[1].has_value());
}

TEST(ComputeMetricsTest, HandExample) {
  const PixelLabelMap gt(Dims(2, 2), std::vector<std::uint8_t>{0, 0, 1, 1});
  const PixelLabelMap pred(Dims(2, 2), std::vector<std::uint8_t>{0, 0, 0, 0});
  ConfusionMatrix cm(2);
  accumulate(cm, pred, gt);
  EXPECT_EQ(cm.at(0, 0), 2u);
  EXPECT_EQ(cm.at(1, 0), 2u);
  const SegmentationMetrics m = compute_metrics(cm);
  EXPECT_EQ(m.pixel_accuracy, 0.5);
  EXPECT_EQ(m.mean_accuracy, 0.5);
  EXPECT_EQ(m.mean_iu, 0.25);
  EXPECT_EQ(m.frequency_weighted_iu, 0.25);
  EXPECT_EQ(*m.per_class_iu[0], 0.5);
  EXPECT_EQ(*m.per_class_iu[1], 0.0);
}

TEST(ComputeMetricsTest, MatchesBruteForceAndStaysInRange) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    const ConfusionMatrix cm = testing::random_confusion(1 + trial % 6, rng);
    const SegmentationMetrics m = compute_metrics(cm);
    const testing::BruteMetrics b = testing::brute_metrics(cm);
    EXPECT_NEAR(m.pixel_accuracy, b.pacc, 1e-12);
    EXPECT_NEAR(m.mean_accuracy, b.macc, 1e-12);
    EXPECT_NEAR(m.mean_iu, b.miu, 1e-12);
    EXPECT_NEAR(m.frequency_weighted_iu, b.fwiu, 1e-12);
    for (double v : {m.pixel_accuracy, m.mean_accuracy, m.mean_iu, m.frequency_weighted_iu}) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
}

TEST(ComputeMetricsTest, EmptyMatrixThrows) {
  EXPECT_THROW(compute_metrics(ConfusionMatrix(3)), std::invalid_argument);
}

// Zero weights with a positive background bias predict background
// everywhere.
NetParams background_predictor(int num_classes) {
  NetParams p = NetParams::zeros_like(Architecture::default_for(num_classes));
  p.layers.back().bias[0] = 1.0f;
  return p;
}

TEST(EvaluateTest, ConstantBackgroundPredictor) {
  const Dataset ds = gen_dataset_in_memory(SceneSpec{}, 1, 30, 5);
  const EvalReport r = evaluate(background_predictor(4), ds.val);
  EXPECT_EQ(r.images, 30u);
  std::array<std::uint64_t, 5> t{};
  std::uint64_t total = 0;
  for (const auto& s : ds.val) {
    for (std::size_t i = 0; i < s.pixel_labels->pixel_count(); ++i) {
      ++t[(*s.pixel_labels)[i]];
      ++total;
    }
  }
  const int present = static_cast<int>(std::count_if(t.begin(), t.end(), [](auto v) { return v > 0; }));
  const double iu_bg = static_cast<double>(t[0]) / static_cast<double>(total);
  EXPECT_NEAR(r.metrics.mean_iu, iu_bg / present, 1e-12);
  const testing::BruteMetrics b = testing::brute_metrics(r.confusion);
  EXPECT_NEAR(r.metrics.mean_iu, b.miu, 1e-12);
}

TEST(EvaluateTest, PerfectSingleImage) {
  Dataset ds = gen_dataset_in_memory(SceneSpec{}, 1, 1, 6);
  Sample s = ds.val[0];
  // Ground truth that the background predictor gets exactly right.
  s.pixel_labels = PixelLabelMap(s.image.dims, 0);
  const std::vector<Sample> one = {s};
  const EvalReport r = evaluate(background_predictor(4), one);
  EXPECT_EQ(r.metrics.pixel_accuracy, 1.0);
  EXPECT_EQ(r.metrics.mean_accuracy, 1.0);
  EXPECT_EQ(r.metrics.mean_iu, 1.0);
  EXPECT_EQ(r.metrics.frequency_weighted_iu, 1.0);
}

TEST(EvaluateTest, OrderInvariant) {
  const Dataset ds = gen_dataset_in_memory(SceneSpec{}, 1, 12, 8);
  const NetParams p = init_params<float>(Architecture::default_for(4), 3);
  std::vector<Sample> reversed(ds.val.rbegin(), ds.val.rend());
  EXPECT_EQ(evaluate(p, ds.val).confusion, evaluate(p, reversed).confusion);
}

TEST(EvaluateTest, RequiresGroundTruth) {
  Dataset ds = gen_dataset_in_memory(SceneSpec{}, 1, 2, 8);
  ds.val[1].pixel_labels.reset();
  EXPECT_THROW(evaluate(background_predictor(4), ds.val), std::invalid_argument);
  EXPECT_THROW(evaluate(background_predictor(4), std::vector<Sample>{}), std::invalid_argument);
}

}  // namespace
}  // namespace dsup
