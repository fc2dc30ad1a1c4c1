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

// Segmentation metrics from a confusion matrix n_ij (ground truth i,
// predicted j), t_i = sum_j n_ij:
//   pAcc = sum_i n_ii / sum_i t_i
//   mAcc = mean_i n_ii / t_i
//   mIU  = mean_i n_ii / (t_i + sum_j n_ji - n_ii)
//   fwIU = (sum_k t_k)^-1 sum_i t_i n_ii / (t_i + sum_j n_ji - n_ii)
// Means run over classes that actually occur: t_i > 0 for mAcc, a nonempty
// union for mIU. Background counts as a class.

#ifndef DSUP_METRICS_HPP_
#define DSUP_METRICS_HPP_

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "dsup/dataset.hpp"
#include "dsup/labels.hpp"
#include "dsup/toynet.hpp"

namespace dsup {

class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(int num_classes_with_background);

  int size() const { return size_; }
  std::uint64_t at(int gt, int pred) const {
    return counts_[static_cast<std::size_t>(gt) * size_ + pred];
  }
  std::uint64_t& at(int gt, int pred) { return counts_[static_cast<std::size_t>(gt) * size_ + pred]; }
  std::uint64_t row_total(int gt) const;
  std::uint64_t column_total(int pred) const;
  std::uint64_t total() const;

  ConfusionMatrix& operator+=(const ConfusionMatrix& other);
  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

 private:
  int size_;
  std::vector<std::uint64_t> counts_;
};

// Adds one count per pixel whose ground truth is not ignored. Throws on a
// dims mismatch or when `pred` holds a value outside the matrix.
void accumulate(ConfusionMatrix& cm, const PixelLabelMap& pred, const PixelLabelMap& gt);

struct SegmentationMetrics {
  double pixel_accuracy = 0.0;
  double mean_accuracy = 0.0;
  double mean_iu = 0.0;
  double frequency_weighted_iu = 0.0;
  // Empty for classes absent from both ground truth and prediction.
  std::vector<std::optional<double>> per_class_iu;
};

// Throws std::invalid_argument for an empty matrix.
SegmentationMetrics compute_metrics(const ConfusionMatrix& cm);

struct EvalReport {
  SegmentationMetrics metrics;
  ConfusionMatrix confusion;
  std::size_t images = 0;
};

// Predicts every sample and accumulates one global matrix. Every sample must
// carry pixel ground truth.
EvalReport evaluate(const NetParams& params, std::span<const Sample> samples);

}  // namespace dsup

#endif  // DSUP_METRICS_HPP_
