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

#include "dsup/trainer.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "dsup/losses.hpp"

namespace dsup {
namespace {

constexpr std::uint64_t kSplitStream = 1;
constexpr std::uint64_t kInitStream = 2;
constexpr std::uint64_t kDrawStream = 3;
constexpr std::uint64_t kHardenStream = 4;

int parse_part(std::string_view part, std::string_view whole) {
  int value = 0;
  const auto* end = part.data() + part.size();
  const auto [ptr, ec] = std::from_chars(part.data(), end, value);
  if (part.empty() || ec != std::errc() || ptr != end || value < 0) {
    throw std::invalid_argument("ratio '" + std::string(whole) +
                                "' must look like P:B:I with nonnegative integers");
  }
  return value;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace

std::string_view branch_name(Branch b) {
  switch (b) {
    case Branch::kPixel: return "pixel";
    case Branch::kBox: return "box";
    case Branch::kImage: return "image";
  }
  return "unknown";
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 over (seed, stream).
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

SplitRatio SplitRatio::parse(std::string_view text) {
  const auto a = text.find(':');
  const auto b = a == std::string_view::npos ? a : text.find(':', a + 1);
  if (a == std::string_view::npos || b == std::string_view::npos ||
      text.find(':', b + 1) != std::string_view::npos) {
    throw std::invalid_argument("ratio '" + std::string(text) + "' must look like P:B:I");
  }
  SplitRatio r;
  r.pixel = parse_part(text.substr(0, a), text);
  r.box = parse_part(text.substr(a + 1, b - a - 1), text);
  r.image = parse_part(text.substr(b + 1), text);
  if (r.total() <= 0) throw std::invalid_argument("ratio '" + std::string(text) + "' sums to zero");
  return r;
}

std::string SplitRatio::to_string() const {
  return std::to_string(pixel) + ":" + std::to_string(box) + ":" + std::to_string(image);
}

DatasetSplit split_dataset(std::span<const std::size_t> ids, const SplitRatio& ratio,
                           std::uint64_t seed) {
  if (ratio.pixel < 0 || ratio.box < 0 || ratio.image < 0 || ratio.total() <= 0) {
    throw std::invalid_argument("split_dataset: invalid ratio " + ratio.to_string());
  }
  const auto parts = static_cast<std::size_t>(ratio.total());
  if (ids.size() < parts) {
    throw std::invalid_argument("split_dataset: " + std::to_string(ids.size()) +
                                " samples cannot realize ratio " + ratio.to_string());
  }
  std::vector<std::size_t> order(ids.begin(), ids.end());
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  const std::size_t unit = ids.size() / parts;
  std::size_t n_pixel = unit * static_cast<std::size_t>(ratio.pixel);
  std::size_t n_box = unit * static_cast<std::size_t>(ratio.box);
  std::size_t n_image = unit * static_cast<std::size_t>(ratio.image);
  const std::size_t remainder = ids.size() - n_pixel - n_box - n_image;
  if (ratio.image > 0) {
    n_image += remainder;
  } else if (ratio.box > 0) {
    n_box += remainder;
  } else {
    n_pixel += remainder;
  }

  DatasetSplit split;
  split.ratio = ratio;
  auto it = order.begin();
  split.pixel_set.assign(it, it + static_cast<std::ptrdiff_t>(n_pixel));
  it += static_cast<std::ptrdiff_t>(n_pixel);
  split.box_set.assign(it, it + static_cast<std::ptrdiff_t>(n_box));
  it += static_cast<std::ptrdiff_t>(n_box);
  split.image_set.assign(it, it + static_cast<std::ptrdiff_t>(n_image));
  return split;
}

std::pair<std::size_t, Branch> next_sample(const DatasetSplit& split, std::mt19937_64& rng) {
  const std::size_t n = split.total();
  if (n == 0) throw std::invalid_argument("next_sample: all training subsets are empty");
  std::uniform_int_distribution<std::size_t> draw(0, n - 1);
  std::size_t k = draw(rng);
  if (k < split.pixel_set.size()) return {split.pixel_set[k], Branch::kPixel};
  k -= split.pixel_set.size();
  if (k < split.box_set.size()) return {split.box_set[k], Branch::kBox};
  k -= split.box_set.size();
  return {split.image_set[k], Branch::kImage};
}

Variant Variant::parse(std::string_view text) {
  Variant v{false, false, false};
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto plus = text.find('+', start);
    const auto token = text.substr(start, plus == std::string_view::npos ? std::string_view::npos
                                                                          : plus - start);
    if (token == "p") {
      v.pixel = true;
    } else if (token == "b") {
      v.box = true;
    } else if (token == "i") {
      v.image = true;
    } else {
      throw std::invalid_argument("variant '" + std::string(text) +
                                  "' must combine p, b and i with '+', e.g. p+b+i");
    }
    if (plus == std::string_view::npos) break;
    start = plus + 1;
  }
  return v;
}

std::string Variant::to_string() const {
  std::string out;
  auto add = [&](bool on, const char* tag) {
    if (!on) return;
    if (!out.empty()) out += "+";
    out += tag;
  };
  add(pixel, "p");
  add(box, "b");
  add(image, "i");
  return out.empty() ? "none" : out;
}

DatasetSplit Variant::apply(DatasetSplit split) const {
  if (!pixel) split.pixel_set.clear();
  if (!box) split.box_set.clear();
  if (!image) split.image_set.clear();
  return split;
}

void TrainConfig::validate() const {
  if (iterations < 1) throw std::invalid_argument("train: iterations must be >= 1");
  if (ratio.pixel < 0 || ratio.box < 0 || ratio.image < 0 || ratio.total() <= 0) {
    throw std::invalid_argument("train: invalid ratio " + ratio.to_string());
  }
  if (!(lr > 0.0) || !(momentum >= 0.0) || !(weight_decay >= 0.0)) {
    throw std::invalid_argument("train: optimizer hyperparameters must be positive");
  }
  if (log_every < 1) throw std::invalid_argument("train: log interval must be >= 1");
  mask_config.validate();
}

SoftSegLabel box_target_for(const Sample& sample, const ClassConfig& classes,
                            BoxStrategy strategy, const BoxMaskConfig& mask_config,
                            std::uint64_t seed) {
  if (sample.box_target) return *sample.box_target;
  if (sample.boxes.empty() && strategy != BoxStrategy::kRawBox) {
    // An image without boxes is all background under every strategy.
    return SoftSegLabel(sample.image.dims, classes.num_object_classes());
  }
  if (strategy == BoxStrategy::kRawBox) {
    return raw_box_label(sample.boxes, sample.image.dims, classes);
  }
  if (!sample.strength) {
    throw std::invalid_argument("sample '" + sample.id +
                                "' (box branch) has boxes but no boundary-strength map");
  }
  return make_box_target(strategy, sample.boxes, *sample.strength, classes, mask_config, seed);
}

TrainResult train(const Dataset& dataset, const TrainConfig& config) {
  config.validate();
  const ClassConfig classes = dataset.classes();

  std::vector<std::size_t> ids(dataset.train.size());
  for (std::size_t k = 0; k < ids.size(); ++k) ids[k] = k;

  TrainResult result;
  result.split = config.variant.apply(
      split_dataset(ids, config.ratio, derive_seed(config.seed, kSplitStream)));
  const DatasetSplit& split = result.split;
  if (split.total() == 0) {
    throw std::invalid_argument("train: variant " + config.variant.to_string() +
                                " leaves no training samples for ratio " + config.ratio.to_string());
  }

  // Validate every label artifact up front and build box targets once.
  for (std::size_t idx : split.pixel_set) {
    const Sample& s = dataset.train[idx];
    if (!s.pixel_labels) {
      throw std::invalid_argument("sample '" + s.id + "' (pixel branch) has no pixel labels");
    }
    s.pixel_labels->validate(classes);
  }
  for (std::size_t idx : split.image_set) {
    const Sample& s = dataset.train[idx];
    if (!s.image_label) {
      throw std::invalid_argument("sample '" + s.id + "' (image branch) has no image label");
    }
    s.image_label->validate(classes);
    if (!s.image_label->any_present()) {
      throw std::invalid_argument("sample '" + s.id +
                                  "' (image branch) has an all-zero image label");
    }
  }
  std::vector<SoftSegLabel> box_targets(dataset.train.size());
  for (std::size_t idx : split.box_set) {
    const Sample& s = dataset.train[idx];
    if (!s.box_target && s.boxes.empty() && !s.strength) {
      throw std::invalid_argument("sample '" + s.id + "' (box branch) has no box annotation");
    }
    box_targets[idx] = box_target_for(s, classes, config.box_strategy, config.mask_config,
                                      derive_seed(config.seed, kHardenStream + idx));
    box_targets[idx].validate();
  }

  NetParams params = init_params<float>(Architecture::default_for(classes.num_object_classes()),
                                        derive_seed(config.seed, kInitStream));
  OptimizerState<float> opt = OptimizerState<float>::for_params(params);
  opt.lr = config.lr;
  opt.momentum = config.momentum;
  opt.weight_decay = config.weight_decay;

  result.log.push_back("# train ratio=" + config.ratio.to_string() +
                       " variant=" + config.variant.to_string() +
                       " iterations=" + std::to_string(config.iterations) +
                       " seed=" + std::to_string(config.seed) + " lr=" + format_double(config.lr) +
                       " momentum=" + format_double(config.momentum) +
                       " weight_decay=" + format_double(config.weight_decay) +
                       " batch_size=1 box_strategy=" +
                       std::string(box_strategy_name(config.box_strategy)) +
                       " alpha=" + format_double(config.mask_config.alpha_percent) +
                       " pixel=" + std::to_string(split.pixel_set.size()) +
                       " box=" + std::to_string(split.box_set.size()) +
                       " image=" + std::to_string(split.image_set.size()));

  std::mt19937_64 rng(derive_seed(config.seed, kDrawStream));
  std::array<double, 3> window_sum{};
  std::array<std::size_t, 3> window_count{};
  result.steps.reserve(static_cast<std::size_t>(config.iterations));

  for (int step = 1; step <= config.iterations; ++step) {
    const auto [idx, branch] = next_sample(split, rng);
    const Sample& sample = dataset.train[idx];
    auto fwd = forward(params, sample.image);

    LossResult loss;
    switch (branch) {
      case Branch::kPixel: loss = pixel_loss(fwd.scores, *sample.pixel_labels); break;
      case Branch::kBox: loss = box_loss(fwd.scores, box_targets[idx]); break;
      case Branch::kImage: loss = image_loss(fwd.scores, *sample.image_label); break;
    }
    if (!std::isfinite(loss.value)) {
      throw NumericError("train: non-finite " + std::string(branch_name(branch)) +
                         " loss at step " + std::to_string(step) + " (sample '" + sample.id + "')");
    }
    const auto b = static_cast<std::size_t>(branch);
    ++result.branch_evaluations[b];
    result.branch_loss_sum[b] += loss.value;
    result.total_loss += loss.value;
    result.steps.emplace_back(branch, loss.value);
    window_sum[b] += loss.value;
    ++window_count[b];

    const NetParams grads = backward(params, fwd.cache, loss.grad);
    sgd_step(params, grads, opt);

    if (step % config.log_every == 0 || step == config.iterations) {
      for (std::size_t k = 0; k < 3; ++k) {
        if (window_count[k] == 0) continue;
        result.log.push_back("step=" + std::to_string(step) +
                             " branch=" + std::string(branch_name(static_cast<Branch>(k))) +
                             " count=" + std::to_string(window_count[k]) + " mean_loss=" +
                             format_double(window_sum[k] / static_cast<double>(window_count[k])));
      }
      window_sum = {};
      window_count = {};
    }
  }

  const double by_branch =
      result.branch_loss_sum[0] + result.branch_loss_sum[1] + result.branch_loss_sum[2];
  if (std::abs(by_branch - result.total_loss) > 1e-9 * std::max(1.0, std::abs(result.total_loss))) {
    throw std::logic_error("train: per-branch loss bookkeeping disagrees with the total");
  }
  result.params = std::move(params);
  return result;
}

}  // namespace dsup
