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

// Ablation harness: training grids over (ratio, variant, box strategy,
// seed), the mask threshold study, and report rendering.

#ifndef DSUP_EXPERIMENTS_HPP_
#define DSUP_EXPERIMENTS_HPP_

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dsup/boxmask.hpp"
#include "dsup/dataset.hpp"
#include "dsup/metrics.hpp"
#include "dsup/trainer.hpp"

namespace dsup {

struct RunResult {
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  SegmentationMetrics metrics;
  std::array<std::size_t, 3> branch_evaluations{};
};

struct GridCell {
  SplitRatio ratio;
  Variant variant;
  BoxStrategy strategy = BoxStrategy::kUcm;
  std::vector<RunResult> runs;  // one per seed, in seed order

  bool failed() const;
};

struct MetricStat {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation; 0 for a single run
};

struct CellSummary {
  MetricStat pixel_accuracy;
  MetricStat mean_accuracy;
  MetricStat mean_iu;
  MetricStat frequency_weighted_iu;
};

// Throws std::logic_error for a failed cell.
CellSummary summarize(const GridCell& cell);

struct GridSpec {
  std::vector<SplitRatio> ratios;
  std::vector<Variant> variants;
  std::vector<BoxStrategy> strategies = {BoxStrategy::kUcm};
  int seeds = 5;
  // Iterations, optimizer, mask settings and the base seed. Run k of every
  // cell uses derive_seed(base.seed, k), so cells are paired by seed.
  TrainConfig base;
  // Worker threads; every run is independent and results are assembled in
  // a fixed order, so the count does not change the output.
  int jobs = 1;
};

// Seed used by run k of a grid.
std::uint64_t grid_run_seed(std::uint64_t base_seed, int k);

// Runs every cell. Sub-run failures are captured in RunResult, not thrown.
// Stored box targets are dropped so each strategy builds its own.
std::vector<GridCell> run_grid(const Dataset& dataset, const GridSpec& spec);

// Per-object IoU between the confident mask and the pixels of the box's class
// inside the box, over the first max_objects boxes of `samples`.
std::vector<double> object_mask_ious(std::span<const Sample> samples, const BoxMaskConfig& config,
                                     std::size_t max_objects);

struct ThresholdStudy {
  std::vector<std::string> columns;  // "1/4 only", "1/2 only", "3/4 only", "all three"
  std::vector<double> mean_iou;
  std::size_t objects = 0;
};

ThresholdStudy run_threshold_study(std::span<const Sample> samples, double alpha_percent,
                                   std::size_t max_objects);

// Eval report: JSON with keys exactly {pAcc, mAcc, mIU, fwIU, per_class_iu}
// (null for classes absent from both prediction and ground truth) and an
// aligned text rendering of the same numbers.
std::string eval_report_json(const SegmentationMetrics& metrics);
std::string eval_report_text(const SegmentationMetrics& metrics);

std::string grid_json(const std::vector<GridCell>& cells, const GridSpec& spec);
std::string grid_text(const std::vector<GridCell>& cells);
std::string threshold_json(const ThresholdStudy& study);
std::string threshold_text(const ThresholdStudy& study);

}  // namespace dsup

#endif  // DSUP_EXPERIMENTS_HPP_
