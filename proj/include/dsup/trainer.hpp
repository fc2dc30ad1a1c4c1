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

// Splitting training data by supervision type and the single-branch
// training loop.
//
// Every step draws one sample uniformly from the union of the active
// subsets and evaluates only the loss of the subset that owns it (batch
// size 1). Summed over steps this realizes
//   L = sum_{S_image} L_image + sum_{S_box} L_box + sum_{S_pixel} L_pixel
// stochastically.

#ifndef DSUP_TRAINER_HPP_
#define DSUP_TRAINER_HPP_

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dsup/boxmask.hpp"
#include "dsup/dataset.hpp"
#include "dsup/toynet.hpp"

namespace dsup {

enum class Branch { kPixel = 0, kBox = 1, kImage = 2 };
std::string_view branch_name(Branch b);

// "p:b:i" image ratio between S_pixel, S_box and S_image.
struct SplitRatio {
  int pixel = 1;
  int box = 1;
  int image = 1;

  int total() const { return pixel + box + image; }
  // Parts must be nonnegative integers with a positive sum.
  static SplitRatio parse(std::string_view text);
  std::string to_string() const;

  friend bool operator==(const SplitRatio&, const SplitRatio&) = default;
};

struct DatasetSplit {
  SplitRatio ratio;
  std::vector<std::size_t> pixel_set;
  std::vector<std::size_t> box_set;
  std::vector<std::size_t> image_set;

  std::size_t total() const { return pixel_set.size() + box_set.size() + image_set.size(); }
};

// Seeded shuffle followed by contiguous assignment: with u = floor(n / (p+b+i))
// S_pixel gets p*u ids, S_box b*u, S_image the rest (the remainder goes to
// the last nonzero part). Throws if n < p + b + i.
DatasetSplit split_dataset(std::span<const std::size_t> ids, const SplitRatio& ratio,
                           std::uint64_t seed);

// Uniform draw over the union of the three subsets; the branch is the owning
// subset. Throws on an empty split.
std::pair<std::size_t, Branch> next_sample(const DatasetSplit& split, std::mt19937_64& rng);

// Which subsets take part in training, e.g. "p", "p+i", "p+b", "p+b+i".
struct Variant {
  bool pixel = true;
  bool box = true;
  bool image = true;

  static Variant parse(std::string_view text);
  std::string to_string() const;
  // Empties the subsets this variant ignores.
  DatasetSplit apply(DatasetSplit split) const;
};

struct TrainConfig {
  SplitRatio ratio;
  Variant variant;
  int iterations = 1000;
  std::uint64_t seed = 0;
  double lr = 1e-4;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  BoxStrategy box_strategy = BoxStrategy::kUcm;
  BoxMaskConfig mask_config;
  int log_every = 100;

  void validate() const;
};

struct TrainResult {
  NetParams params;
  DatasetSplit split;
  // Header line followed by one line per branch per logging window.
  std::vector<std::string> log;
  // Per-step branch and loss value.
  std::vector<std::pair<Branch, double>> steps;
  // Loss evaluations per branch; exactly one per step.
  std::array<std::size_t, 3> branch_evaluations{};
  std::array<double, 3> branch_loss_sum{};
  double total_loss = 0.0;
};

// Box-branch target for `sample`: the stored target when present, otherwise
// generated from its boxes and strength map with `strategy`.
SoftSegLabel box_target_for(const Sample& sample, const ClassConfig& classes,
                            BoxStrategy strategy, const BoxMaskConfig& mask_config,
                            std::uint64_t seed);

// Runs config.iterations single-sample SGD steps on dataset.train. Throws
// std::invalid_argument naming the sample and branch when a drawn subset
// lacks its label, and NumericError with the step index on a non-finite
// loss.
TrainResult train(const Dataset& dataset, const TrainConfig& config);

// Stateless 64-bit mix for deriving independent seeds.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace dsup

#endif  // DSUP_TRAINER_HPP_
