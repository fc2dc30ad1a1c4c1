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

#ifndef DSUP_CORE_HPP_
#define DSUP_CORE_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dsup {

// Raster code for uncertain / ignored pixels in 8-bit label maps.
inline constexpr std::uint8_t kIgnoreLabel = 255;
inline constexpr int kBackgroundClass = 0;

// Raised when a feature map or gradient carries NaN/Inf values.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct PixelCoord {
  int x = 0;
  int y = 0;
  friend bool operator==(const PixelCoord&, const PixelCoord&) = default;
};

// Spatial extent of every dense grid. Pixels are stored row-major with
// index i = y * width + x; all modules share this layout.
struct Dims {
  int height = 0;
  int width = 0;

  Dims() = default;
  Dims(int h, int w);

  std::size_t pixel_count() const {
    return static_cast<std::size_t>(height) * static_cast<std::size_t>(width);
  }
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width) +
           static_cast<std::size_t>(x);
  }
  PixelCoord coord(std::size_t i) const {
    return {static_cast<int>(i % static_cast<std::size_t>(width)),
            static_cast<int>(i / static_cast<std::size_t>(width))};
  }
  bool contains(int x, int y) const {
    return x >= 0 && y >= 0 && x < width && y < height;
  }

  friend bool operator==(const Dims&, const Dims&) = default;
};

std::string to_string(const Dims& dims);

// Number of object classes C; channel 0 is always background, so every
// per-class grid has C + 1 channels.
class ClassConfig {
 public:
  explicit ClassConfig(int num_object_classes);

  int num_object_classes() const { return num_object_classes_; }
  int channels() const { return num_object_classes_ + 1; }
  std::uint8_t ignore_value() const { return kIgnoreLabel; }
  bool is_class(int label) const { return label >= 0 && label <= num_object_classes_; }

  friend bool operator==(const ClassConfig&, const ClassConfig&) = default;

 private:
  int num_object_classes_;
};

// Per-pixel class scores f in R^{h x w x (C+1)}. Layout is pixel-major:
// value(i, c) lives at i * channels + c, so each pixel's score row is
// contiguous.
class FeatureMap {
 public:
  FeatureMap() = default;
  FeatureMap(Dims dims, int channels, double fill = 0.0);
  FeatureMap(Dims dims, int channels, std::vector<double> values);

  const Dims& dims() const { return dims_; }
  int channels() const { return channels_; }
  std::size_t pixel_count() const { return dims_.pixel_count(); }
  std::size_t size() const { return values_.size(); }

  double& at(std::size_t pixel, int channel) {
    return values_[pixel * static_cast<std::size_t>(channels_) + static_cast<std::size_t>(channel)];
  }
  double at(std::size_t pixel, int channel) const {
    return values_[pixel * static_cast<std::size_t>(channels_) + static_cast<std::size_t>(channel)];
  }

  std::span<double> row(std::size_t pixel) {
    return {values_.data() + pixel * static_cast<std::size_t>(channels_),
            static_cast<std::size_t>(channels_)};
  }
  std::span<const double> row(std::size_t pixel) const {
    return {values_.data() + pixel * static_cast<std::size_t>(channels_),
            static_cast<std::size_t>(channels_)};
  }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }

  bool same_shape(const FeatureMap& other) const {
    return dims_ == other.dims_ && channels_ == other.channels_;
  }
  bool all_finite() const;

 private:
  Dims dims_;
  int channels_ = 0;
  std::vector<double> values_;
};

// h x w x 3 image with channel values in [0, 1], pixel-major (RGB triplets).
struct RgbImage {
  Dims dims;
  std::vector<float> rgb;

  RgbImage() = default;
  explicit RgbImage(Dims d) : dims(d), rgb(d.pixel_count() * 3, 0.0f) {}

  float& at(int x, int y, int ch) { return rgb[dims.index(x, y) * 3 + static_cast<std::size_t>(ch)]; }
  float at(int x, int y, int ch) const {
    return rgb[dims.index(x, y) * 3 + static_cast<std::size_t>(ch)];
  }
};

using ClassScoreVector = std::vector<double>;

struct LossResult {
  double value = 0.0;
  FeatureMap grad;
};

// Softmax over one score row, with max subtraction. Throws NumericError on
// non-finite input.
std::vector<double> stable_softmax_row(std::span<const double> scores);
void stable_softmax_row(std::span<const double> scores, std::span<double> out);

double sigmoid(double x);
// log(sigmoid(x)), finite for all finite x.
double log_sigmoid(double x);

}  // namespace dsup

#endif  // DSUP_CORE_HPP_
