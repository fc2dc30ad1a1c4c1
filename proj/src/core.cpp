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

#include "dsup/core.hpp"

#include <algorithm>
#include <cmath>

namespace dsup {

Dims::Dims(int h, int w) : height(h), width(w) {
  if (h < 1 || w < 1) {
    throw std::invalid_argument("Dims: height and width must be >= 1, got " +
                                std::to_string(h) + "x" + std::to_string(w));
  }
}

std::string to_string(const Dims& dims) {
  return std::to_string(dims.height) + "x" + std::to_string(dims.width);
}

ClassConfig::ClassConfig(int num_object_classes) : num_object_classes_(num_object_classes) {
  if (num_object_classes < 1 || num_object_classes >= kIgnoreLabel) {
    throw std::invalid_argument("ClassConfig: number of object classes must be in [1, 254], got " +
                                std::to_string(num_object_classes));
  }
}

FeatureMap::FeatureMap(Dims dims, int channels, double fill)
    : dims_(dims), channels_(channels),
      values_(dims.pixel_count() * static_cast<std::size_t>(channels), fill) {
  if (channels < 1) throw std::invalid_argument("FeatureMap: channel count must be >= 1");
}

FeatureMap::FeatureMap(Dims dims, int channels, std::vector<double> values)
    : dims_(dims), channels_(channels), values_(std::move(values)) {
  if (channels < 1) throw std::invalid_argument("FeatureMap: channel count must be >= 1");
  if (values_.size() != dims.pixel_count() * static_cast<std::size_t>(channels)) {
    throw std::invalid_argument("FeatureMap: value count does not match dims x channels");
  }
}

bool FeatureMap::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

void stable_softmax_row(std::span<const double> scores, std::span<double> out) {
  if (scores.empty()) throw std::invalid_argument("softmax: empty score row");
  if (out.size() != scores.size()) throw std::invalid_argument("softmax: output size mismatch");
  double max_score = scores[0];
  for (double s : scores) {
    if (!std::isfinite(s)) throw NumericError("softmax: non-finite score in feature map");
    max_score = std::max(max_score, s);
  }
  double total = 0.0;
  for (std::size_t j = 0; j < scores.size(); ++j) {
    out[j] = std::exp(scores[j] - max_score);
    total += out[j];
  }
  for (double& v : out) v /= total;
}

std::vector<double> stable_softmax_row(std::span<const double> scores) {
  std::vector<double> out(scores.size());
  stable_softmax_row(scores, out);
  return out;
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double log_sigmoid(double x) {
  // log(1 / (1 + e^-x)) = -log1p(e^-x); for x < 0 rewrite as x - log1p(e^x).
  if (x >= 0.0) return -std::log1p(std::exp(-x));
  return x - std::log1p(std::exp(x));
}

}  // namespace dsup
