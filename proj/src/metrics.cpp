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

#include "dsup/metrics.hpp"

#include <stdexcept>
#include <string>

namespace dsup {

ConfusionMatrix::ConfusionMatrix(int num_classes_with_background)
    : size_(num_classes_with_background),
      counts_(static_cast<std::size_t>(num_classes_with_background) * num_classes_with_background, 0) {
  if (num_classes_with_background < 1) {
    throw std::invalid_argument("ConfusionMatrix: size must be >= 1");
  }
}

std::uint64_t ConfusionMatrix::row_total(int gt) const {
  std::uint64_t t = 0;
  for (int j = 0; j < size_; ++j) t += at(gt, j);
  return t;
}

std::uint64_t ConfusionMatrix::column_total(int pred) const {
  std::uint64_t t = 0;
  for (int i = 0; i < size_; ++i) t += at(i, pred);
  return t;
}

std::uint64_t ConfusionMatrix::total() const {
  std::uint64_t t = 0;
  for (auto v : counts_) t += v;
  return t;
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) {
  if (other.size_ != size_) throw std::invalid_argument("ConfusionMatrix: size mismatch");
  for (std::size_t k = 0; k < counts_.size(); ++k) counts_[k] += other.counts_[k];
  return *this;
}

void accumulate(ConfusionMatrix& cm, const PixelLabelMap& pred, const PixelLabelMap& gt) {
  if (pred.dims() != gt.dims()) {
    throw std::invalid_argument("accumulate: prediction dims " + to_string(pred.dims()) +
                                " != ground-truth dims " + to_string(gt.dims()));
  }
  for (std::size_t i = 0; i < gt.pixel_count(); ++i) {
    const int g = gt[i];
    if (g == kIgnoreLabel) continue;
    const int p = pred[i];
    if (p >= cm.size() || g >= cm.size()) {
      throw std::invalid_argument("accumulate: label out of range at pixel " + std::to_string(i));
    }
    ++cm.at(g, p);
  }
}

SegmentationMetrics compute_metrics(const ConfusionMatrix& cm) {
  const std::uint64_t total = cm.total();
  if (total == 0) throw std::invalid_argument("compute_metrics: confusion matrix is empty");

  SegmentationMetrics m;
  m.per_class_iu.resize(static_cast<std::size_t>(cm.size()));
  double correct = 0.0;
  double acc_sum = 0.0;
  int acc_classes = 0;
  double iu_sum = 0.0;
  int iu_classes = 0;
  double fw_sum = 0.0;
  for (int i = 0; i < cm.size(); ++i) {
    const auto n_ii = static_cast<double>(cm.at(i, i));
    const auto t_i = static_cast<double>(cm.row_total(i));
    const double uni = t_i + static_cast<double>(cm.column_total(i)) - n_ii;
    correct += n_ii;
    if (t_i > 0.0) {
      acc_sum += n_ii / t_i;
      ++acc_classes;
    }
    if (uni > 0.0) {
      const double iu = n_ii / uni;
      m.per_class_iu[static_cast<std::size_t>(i)] = iu;
      iu_sum += iu;
      ++iu_classes;
      fw_sum += t_i * iu;
    }
  }
  const auto n = static_cast<double>(total);
  m.pixel_accuracy = correct / n;
  m.mean_accuracy = acc_sum / acc_classes;
  m.mean_iu = iu_sum / iu_classes;
  m.frequency_weighted_iu = fw_sum / n;
  return m;
}

EvalReport evaluate(const NetParams& params, std::span<const Sample> samples) {
  if (samples.empty()) throw std::invalid_argument("evaluate: validation set is empty");
  ConfusionMatrix cm(params.arch.num_object_classes + 1);
  for (const auto& s : samples) {
    if (!s.pixel_labels) {
      throw std::invalid_argument("evaluate: sample '" + s.id + "' has no pixel ground truth");
    }
    accumulate(cm, predict(params, s.image), *s.pixel_labels);
  }
  return {compute_metrics(cm), cm, samples.size()};
}

}  // namespace dsup
