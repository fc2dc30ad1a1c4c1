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

#include "dsup/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace dsup {
namespace {

constexpr double kProbabilityFloor = 1e-300;

int object_classes_of(const FeatureMap& f) {
  if (f.channels() < 2) {
    throw std::invalid_argument("loss: feature map needs C + 1 >= 2 channels");
  }
  return f.channels() - 1;
}

// Fills q with softmax(row) and returns log-sum-exp of the row.
double softmax_with_lse(std::span<const double> row, std::span<double> q) {
  double max_score = row[0];
  for (double s : row) {
    if (!std::isfinite(s)) throw NumericError("loss: non-finite value in feature map");
    max_score = std::max(max_score, s);
  }
  double total = 0.0;
  for (std::size_t j = 0; j < row.size(); ++j) {
    q[j] = std::exp(row[j] - max_score);
    total += q[j];
  }
  for (double& v : q) v /= total;
  return max_score + std::log(total);
}

// log q_c via log-sum-exp; clamped at log(1e-300) as a last guard.
double log_prob(std::span<const double> row, double lse, int c) {
  return std::max(row[static_cast<std::size_t>(c)] - lse, std::log(kProbabilityFloor));
}

}  // namespace

bool ImageLabel::any_present() const {
  return std::any_of(presence.begin(), presence.end(), [](std::uint8_t v) { return v != 0; });
}

void ImageLabel::validate(const ClassConfig& classes) const {
  if (num_object_classes() != classes.num_object_classes()) {
    throw std::invalid_argument("ImageLabel: expected " +
                                std::to_string(classes.num_object_classes()) + " entries, got " +
                                std::to_string(presence.size()));
  }
  for (std::uint8_t v : presence) {
    if (v > 1) throw std::invalid_argument("ImageLabel: entries must be 0 or 1");
  }
}

ClassScoreVector global_average_pool(const FeatureMap& f) {
  const auto channels = static_cast<std::size_t>(f.channels());
  ClassScoreVector v(channels, 0.0);
  for (std::size_t i = 0; i < f.pixel_count(); ++i) {
    const auto row = f.row(i);
    for (std::size_t c = 0; c < channels; ++c) v[c] += row[c];
  }
  const auto n = static_cast<double>(f.pixel_count());
  for (double& x : v) x /= n;
  return v;
}

LossResult image_loss(const FeatureMap& f, const ImageLabel& label) {
  const int num_classes = object_classes_of(f);
  if (label.num_object_classes() != num_classes) {
    throw std::invalid_argument("image_loss: label has " +
                                std::to_string(label.num_object_classes()) +
                                " entries but feature map has C = " + std::to_string(num_classes));
  }
  if (!f.all_finite()) throw NumericError("image_loss: non-finite value in feature map");

  const ClassScoreVector v = global_average_pool(f);
  const double inv_c = 1.0 / num_classes;
  const double inv_area = 1.0 / static_cast<double>(f.pixel_count());

  double value = 0.0;
  std::vector<double> channel_grad(static_cast<std::size_t>(f.channels()), 0.0);
  for (int c = 1; c <= num_classes; ++c) {
    const double vc = v[static_cast<std::size_t>(c)];
    const double l = label.presence[static_cast<std::size_t>(c - 1)] != 0 ? 1.0 : 0.0;
    // log(1 - sig(v)) = log sig(-v)
    value -= inv_c * (l * log_sigmoid(vc) + (1.0 - l) * log_sigmoid(-vc));
    channel_grad[static_cast<std::size_t>(c)] = (sigmoid(vc) - l) * inv_c * inv_area;
  }

  FeatureMap grad(f.dims(), f.channels());
  for (std::size_t i = 0; i < f.pixel_count(); ++i) {
    std::copy(channel_grad.begin(), channel_grad.end(), grad.row(i).begin());
  }
  return {value, std::move(grad)};
}

LossResult box_loss(const FeatureMap& f, const SoftSegLabel& soft) {
  const int num_classes = object_classes_of(f);
  if (soft.dims() != f.dims()) {
    throw std::invalid_argument("box_loss: soft label dims " + to_string(soft.dims()) +
                                " != feature map dims " + to_string(f.dims()));
  }
  const std::uint32_t allowed = (1u << f.channels()) - 1u;
  const double inv_c = 1.0 / num_classes;

  FeatureMap grad(f.dims(), f.channels());
  std::vector<double> q(static_cast<std::size_t>(f.channels()));
  double value = 0.0;
  for (std::size_t i = 0; i < f.pixel_count(); ++i) {
    if (soft.is_uncertain(i)) continue;
    const std::uint32_t mask = soft.class_mask(i);
    if (mask == 0u || (mask & ~allowed) != 0u) {
      throw std::invalid_argument("box_loss: pixel " + std::to_string(i) +
                                  " has an empty or out-of-range class set");
    }
    const auto row = f.row(i);
    const double lse = softmax_with_lse(row, q);
    const double inv_s = 1.0 / soft.class_count(i);
    auto g = grad.row(i);
    for (int c = 0; c < f.channels(); ++c) {
      const bool member = ((mask >> c) & 1u) != 0;
      if (member) value -= inv_c * inv_s * log_prob(row, lse, c);
      const double target = member ? inv_s : 0.0;
      g[static_cast<std::size_t>(c)] = inv_c * (q[static_cast<std::size_t>(c)] - target);
    }
  }
  return {value, std::move(grad)};
}

LossResult pixel_loss(const FeatureMap& f, const PixelLabelMap& labels) {
  const int num_classes = object_classes_of(f);
  if (labels.dims() != f.dims()) {
    throw std::invalid_argument("pixel_loss: label dims " + to_string(labels.dims()) +
                                " != feature map dims " + to_string(f.dims()));
  }
  const double inv_c = 1.0 / num_classes;

  FeatureMap grad(f.dims(), f.channels());
  std::vector<double> q(static_cast<std::size_t>(f.channels()));
  double value = 0.0;
  for (std::size_t i = 0; i < f.pixel_count(); ++i) {
    const int p = labels[i];
    if (p == kIgnoreLabel) continue;
    if (p > num_classes) {
      throw std::invalid_argument("pixel_loss: pixel " + std::to_string(i) + " has label " +
                                  std::to_string(p) + " > C = " + std::to_string(num_classes));
    }
    const auto row = f.row(i);
    const double lse = softmax_with_lse(row, q);
    value -= inv_c * log_prob(row, lse, p);
    auto g = grad.row(i);
    for (int c = 0; c < f.channels(); ++c) {
      g[static_cast<std::size_t>(c)] = inv_c * (q[static_cast<std::size_t>(c)] - (c == p ? 1.0 : 0.0));
    }
  }
  return {value, std::move(grad)};
}

}  // namespace dsup
