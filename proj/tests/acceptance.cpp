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

// Acceptance runner. Prints one PASS/FAIL line per criterion and exits
// nonzero if any gated criterion fails. Criterion 7 is reported only.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "dsup/boxmask.hpp"
#include "dsup/experiments.hpp"
#include "dsup/losses.hpp"
#include "dsup/metrics.hpp"
#include "dsup/synthdata.hpp"
#include "dsup/toynet.hpp"
#include "dsup/trainer.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

namespace dsup {
namespace {

namespace fs = std::filesystem;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// ---------------------------------------------------------------- 1

Outcome gradient_correctness() {
  const auto start = std::chrono::steady_clock::now();
  std::mt19937_64 rng(101);
  std::uniform_int_distribution<int> side(1, 8);
  std::uniform_int_distribution<int> classes(1, 5);
  std::array<double, 3> worst{};
  for (int k = 0; k < 100; ++k) {
    const Dims dims(side(rng), side(rng));
    const int c = classes(rng);
    // Small values keep every gradient entry well above the rounding noise
    // of the difference quotient.
    const FeatureMap f = testing::random_feature_map(dims, c + 1, rng, 1.0);
    ImageLabel l;
    for (int j = 0; j < c; ++j) l.presence.push_back(static_cast<std::uint8_t>(rng() & 1));
    const SoftSegLabel s = testing::random_soft_label(dims, c, rng);
    const PixelLabelMap p = testing::random_label_map(dims, c, rng, 0.1);
    worst[0] = std::max(worst[0], testing::max_feature_grad_error(f, [&](const FeatureMap& g) { return image_loss(g, l); }));
    worst[1] = std::max(worst[1], testing::max_feature_grad_error(f, [&](const FeatureMap& g) { return box_loss(g, s); }));
    worst[2] = std::max(worst[2], testing::max_feature_grad_error(f, [&](const FeatureMap& g) { return pixel_loss(g, p); }));
  }

  // End to end through the network, in double precision.
  const Dims dims(16, 16);
  RgbImage img(dims);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  for (float& v : img.rgb) v = u(rng);
  const PixelLabelMap labels = testing::random_label_map(dims, 3, rng);
  auto params = init_params<double>(Architecture::default_for(3), 5);
  std::normal_distribution<double> n(0.0, 0.05);
  for (auto& layer : params.layers) {
    for (double& b : layer.bias) b = n(rng);
  }
  const auto fwd = forward(params, img);
  const auto grads = backward(params, fwd.cache, pixel_loss(fwd.scores, labels).grad);
  double net_worst = 0.0;
  int sampled = 0;
  for (std::size_t k = 0; k < params.layers.size(); ++k) {
    for (std::size_t j = 0; j < params.layers[k].weight.size(); j += 37) {
      auto q = params;
      const double h = 1e-5;
      q.layers[k].weight[j] += h;
      const double up = pixel_loss(forward(q, img).scores, labels).value;
      q.layers[k].weight[j] -= 2 * h;
      const double down = pixel_loss(forward(q, img).scores, labels).value;
      net_worst = std::max(net_worst, testing::relative_error(grads.layers[k].weight[j], (up - down) / (2 * h), 1e-4));
      ++sampled;
    }
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  Outcome o;
  o.pass = worst[0] < 1e-4 && worst[1] < 1e-4 && worst[2] < 1e-4 && net_worst < 1e-3 && secs < 120.0;
  o.detail = "image " + fmt("%.2e", worst[0]) + ", box " + fmt("%.2e", worst[1]) + ", pixel " +
             fmt("%.2e", worst[2]) + ", network " + fmt("%.2e", net_worst) + " over " +
             std::to_string(sampled) + " weights, " + fmt("%.1f", secs) + " s";
  return o;
}

// ---------------------------------------------------------------- 2

Outcome loss_identities() {
  std::mt19937_64 rng(202);
  std::uniform_int_distribution<int> side(1, 8);
  std::uniform_int_distribution<int> classes(1, 20);
  double worst = 0.0;
  bool zeros_ok = true;
  for (int k = 0; k < 200; ++k) {
    const Dims dims(side(rng), side(rng));
    const int c = classes(rng);
    const FeatureMap zero(dims, c + 1);
    ImageLabel l;
    for (int j = 0; j < c; ++j) l.presence.push_back(static_cast<std::uint8_t>(rng() & 1));
    worst = std::max(worst, std::abs(image_loss(zero, l).value - std::log(2.0)));

    const SoftSegLabel s = testing::random_soft_label(dims, c, rng);
    std::size_t counted = 0;
    for (std::size_t i = 0; i < s.pixel_count(); ++i) counted += !s.is_uncertain(i);
    const double per_pixel = std::log(static_cast<double>(c + 1)) / c;
    worst = std::max(worst, std::abs(box_loss(zero, s).value - per_pixel * counted) / std::max<double>(1, counted));

    const PixelLabelMap p = testing::random_label_map(dims, c, rng, 0.3);
    counted = 0;
    for (std::size_t i = 0; i < p.pixel_count(); ++i) counted += p[i] != kIgnoreLabel;
    worst = std::max(worst, std::abs(pixel_loss(zero, p).value - per_pixel * counted) / std::max<double>(1, counted));

    // Nothing counted: exactly zero.
    const FeatureMap f = testing::random_feature_map(dims, c + 1, rng);
    SoftSegLabel unsure(dims, c);
    for (std::size_t i = 0; i < unsure.pixel_count(); ++i) unsure.set_uncertain(i);
    const PixelLabelMap ignored(dims, kIgnoreLabel);
    for (const LossResult& r : {box_loss(f, unsure), pixel_loss(f, ignored)}) {
      zeros_ok = zeros_ok && r.value == 0.0;
      for (double g : r.grad.values()) zeros_ok = zeros_ok && g == 0.0;
    }

    // Singleton soft labels agree with the pixel loss.
    const PixelLabelMap hard = testing::random_label_map(dims, c, rng);
    const LossResult a = pixel_loss(f, hard);
    const LossResult b = box_loss(f, soft_from_hard(hard, c));
    worst = std::max(worst, std::abs(a.value - b.value));
    for (std::size_t i = 0; i < f.size(); ++i) worst = std::max(worst, std::abs(a.grad.values()[i] - b.grad.values()[i]));
  }
  return {worst < 1e-12 && zeros_ok,
          "max deviation " + fmt("%.2e", worst) + (zeros_ok ? ", ignored inputs exactly zero" : ", nonzero on ignored inputs")};
}

// ---------------------------------------------------------------- 3

bool subset(const RegionMask& a, const RegionMask& b) {
  for (std::size_t i = 0; i < a.cells.size(); ++i) {
    if (a.cells[i] && !b.cells[i]) return false;
  }
  return true;
}

Outcome boxmask_properties() {
  std::mt19937_64 rng(303);
  std::uniform_int_distribution<int> side(12, 40);
  std::uniform_int_distribution<int> nboxes(1, 4);
  std::uniform_real_distribution<double> alpha(5.0, 95.0);
  int boxes = 0;
  std::set<std::string> broken;
  while (boxes < 1000) {
    const Dims dims(side(rng), side(rng));
    const BoundaryStrengthMap ucm = testing::random_strength_map(dims, rng);
    BoxMaskConfig cfg;
    cfg.alpha_percent = alpha(rng);
    const ClassConfig classes(4);
    std::vector<ObjectMask> masks;
    const int count = std::min(nboxes(rng), 1000 - boxes);
    for (int b = 0; b < count; ++b, ++boxes) {
      std::uniform_int_distribution<int> xs(0, dims.width - 1);
      std::uniform_int_distribution<int> ys(0, dims.height - 1);
      int x0 = xs(rng), x1 = xs(rng), y0 = ys(rng), y1 = ys(rng);
      if (x0 > x1) std::swap(x0, x1);
      if (y0 > y1) std::swap(y0, y1);
      const BoundingBox box{1 + static_cast<int>(rng() % 4), x0, y0, x1, y1};

      const StrengthGrid norm = normalize_strength(ucm, box);
      std::vector<RegionMask> fills;
      for (double t : cfg.thresholds) {
        fills.push_back(threshold_fill(norm, t));
        if (fills.back().cells != testing::bfs_fill(norm, t).cells) broken.insert("flood fill oracle");
      }
      for (std::size_t k = 1; k < fills.size(); ++k) {
        if (!subset(fills[k - 1], fills[k])) broken.insert("monotone regions");
      }

      const ObjectMask m = box_to_mask(ucm, box, cfg);
      for (std::size_t i = 0; i < m.confident.cells.size(); ++i) {
        if (m.confident.cells[i] && m.uncertain.cells[i]) broken.insert("partition");
      }
      const double need = cfg.alpha_percent / 100.0 * static_cast<double>(box.area());
      const bool reachable = std::any_of(fills.begin(), fills.end(),
                                         [&](const RegionMask& r) { return static_cast<double>(r.area()) >= need; });
      if (reachable && static_cast<double>(m.confident.area()) < need) broken.insert("alpha guarantee");

      const ObjectMask flat = box_to_mask(BoundaryStrengthMap(dims), box, cfg);
      if (flat.confident.area() != box.area() || flat.uncertain.area() != 0) broken.insert("zero strength");
      masks.push_back(m);
    }

    const SoftSegLabel merged = merge_masks(masks, dims, classes);
    try {
      merged.validate();
    } catch (const std::exception&) {
      broken.insert("merged partition");
    }
    std::vector<ObjectMask> shuffled = masks;
    for (int k = 0; k < 3; ++k) {
      std::shuffle(shuffled.begin(), shuffled.end(), rng);
      if (!(merge_masks(shuffled, dims, classes) == merged)) broken.insert("merge order");
    }
  }
  std::string detail = std::to_string(boxes) + " boxes";
  for (const auto& b : broken) detail += ", violated: " + b;
  return {broken.empty(), detail};
}

// ---------------------------------------------------------------- 4

Outcome metrics_oracle() {
  std::mt19937_64 rng(404);
  std::uniform_int_distribution<int> size(1, 8);
  double worst = 0.0;
  for (int k = 0; k < 1000; ++k) {
    const ConfusionMatrix cm = testing::random_confusion(size(rng), rng);
    const SegmentationMetrics m = compute_metrics(cm);
    const testing::BruteMetrics b = testing::brute_metrics(cm);
    for (double d : {m.pixel_accuracy - b.pacc, m.mean_accuracy - b.macc, m.mean_iu - b.miu,
                     m.frequency_weighted_iu - b.fwiu}) {
      worst = std::max(worst, std::abs(d));
    }
  }
  ConfusionMatrix hand(2);
  accumulate(hand, PixelLabelMap(Dims(2, 2), 0), PixelLabelMap(Dims(2, 2), std::vector<std::uint8_t>{0, 0, 1, 1}));
  const SegmentationMetrics h = compute_metrics(hand);
  const bool exact = h.pixel_accuracy == 0.5 && h.mean_accuracy == 0.5 && h.mean_iu == 0.25 &&
                     h.frequency_weighted_iu == 0.25;
  return {worst < 1e-12 && exact,
          "max deviation " + fmt("%.2e", worst) + " over 1000 matrices; 2x2 example " + (exact ? "exact" : "wrong")};
}

// ---------------------------------------------------------------- 5

Outcome split_fidelity() {
  std::vector<std::size_t> ids(10582);
  std::iota(ids.begin(), ids.end(), 0);
  const DatasetSplit a = split_dataset(ids, {1, 2, 3}, 0);
  const DatasetSplit b = split_dataset(ids, {1, 5, 10}, 0);
  auto sizes = [](const DatasetSplit& s) {
    return std::to_string(s.pixel_set.size()) + "/" + std::to_string(s.box_set.size()) + "/" +
           std::to_string(s.image_set.size());
  };
  const std::string got_a = sizes(a);
  const std::string got_b = sizes(b);
  return {got_a == "1763/3526/5293" && got_b == "662/3310/6610",
          "1:2:3 -> " + got_a + " (want 1763/3526/5293), 1:5:10 -> " + got_b + " (want 662/3310/6610)"};
}

// ---------------------------------------------------------------- 6, 7

std::vector<double> mean_ius(const GridCell& cell) {
  std::vector<double> v;
  for (const auto& r : cell.runs) v.push_back(r.ok ? r.metrics.mean_iu : std::nan(""));
  return v;
}

double mean(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); }

std::string list(const std::vector<double>& v) {
  std::string s;
  for (double x : v) s += (s.empty() ? "" : " ") + fmt("%.4f", x);
  return s;
}

int jobs() { return std::max(1, static_cast<int>(std::thread::hardware_concurrency())); }

Outcome supervision_ordering(int iterations) {
  const auto start = std::chrono::steady_clock::now();
  const Dataset ds = gen_dataset_in_memory(SceneSpec{}, 600, 100, 7);
  GridSpec spec;
  spec.ratios = {SplitRatio{1, 5, 10}};
  spec.variants = {Variant::parse("p"), Variant::parse("p+i"), Variant::parse("p+b"), Variant::parse("p+b+i")};
  spec.seeds = 5;
  spec.base.iterations = iterations;
  spec.jobs = jobs();
  const auto cells = run_grid(ds, spec);
  const auto p = mean_ius(cells[0]);
  const auto pi = mean_ius(cells[1]);
  const auto pb = mean_ius(cells[2]);
  const auto pbi = mean_ius(cells[3]);
  int wins = 0;
  for (std::size_t k = 0; k < p.size(); ++k) wins += pbi[k] > p[k];
  const double margin = mean(pbi) - mean(p);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  for (const auto& c : cells) std::printf("    %-6s mIU %s  mean %.4f\n", c.variant.to_string().c_str(), list(mean_ius(c)).c_str(), mean(mean_ius(c)));
  Outcome o;
  o.pass = wins >= 4 && margin >= 0.02 && mean(pb) >= mean(p) && mean(pbi) >= mean(pi);
  o.detail = "p+b+i beats p in " + std::to_string(wins) + "/5 seeds, mean margin " + fmt("%+.2f", 100 * margin) +
             " points, p+b - p " + fmt("%+.2f", 100 * (mean(pb) - mean(p))) + ", p+b+i - p+i " +
             fmt("%+.2f", 100 * (mean(pbi) - mean(pi))) + ", " + fmt("%.0f", secs) + " s on " +
             std::to_string(spec.jobs) + " threads";
  return o;
}

Outcome soft_vs_hard(int iterations) {
  SceneSpec scene;
  scene.overlap_probability = 0.8;
  const Dataset ds = gen_dataset_in_memory(scene, 600, 100, 7);
  GridSpec spec;
  spec.ratios = {SplitRatio{1, 5, 10}};
  spec.variants = {Variant::parse("p+b+i")};
  spec.strategies = {BoxStrategy::kUcm, BoxStrategy::kHardSeg};
  spec.seeds = 5;
  spec.base.iterations = iterations;
  spec.jobs = jobs();
  const auto cells = run_grid(ds, spec);
  const auto soft = mean_ius(cells[0]);
  const auto hard = mean_ius(cells[1]);
  std::printf("    soft   mIU %s  mean %.4f\n    hard   mIU %s  mean %.4f\n", list(soft).c_str(), mean(soft),
              list(hard).c_str(), mean(hard));
  return {mean(soft) >= mean(hard), "soft " + fmt("%.4f", mean(soft)) + " vs hardseg " + fmt("%.4f", mean(hard))};
}

// ---------------------------------------------------------------- 8

Outcome threshold_study() {
  const Dataset ds = gen_dataset_in_memory(SceneSpec{}, 600, 1, 7);
  const ThresholdStudy study = run_threshold_study(ds.train, 30.0, 500);
  const double all = study.mean_iou.back();
  bool pass = study.objects == 500;
  std::string detail;
  for (std::size_t k = 0; k < study.columns.size(); ++k) {
    detail += (k ? ", " : "") + study.columns[k] + " " + fmt("%.4f", study.mean_iou[k]);
    pass = pass && all >= study.mean_iou[k];
  }
  return {pass, detail + " over " + std::to_string(study.objects) + " objects"};
}

// ---------------------------------------------------------------- 9

int run_cli(const std::string& args) {
  const std::string cmd = std::string(DSUP_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome cli_determinism() {
  const fs::path root = testing::scratch_dir("acceptance_cli");
  std::vector<std::string> differing;
  bool all_ran = true;
  for (const char* run : {"a", "b"}) {
    const fs::path d = root / run;
    const std::string data = "'" + (d / "data").string() + "'";
    const std::string hard = "'" + (d / "hard").string() + "'";
    const std::string steps[] = {
        "gen-data --out " + data + " --count 60 --val 20 --seed 3",
        "gen-data --out " + hard + " --count 60 --val 20 --seed 3",
        "make-masks --data " + data + " --seed 2",
        "make-masks --data " + hard + " --strategy hardseg --seed 2",
        "train --data " + data + " --ratio 1:2:3 --iters 200 --seed 4 --out '" + (d / "model.ckpt").string() + "'",
        "eval --ckpt '" + (d / "model.ckpt").string() + "' --data " + data + " --report '" + (d / "report.json").string() + "'",
        "ablate --data " + data + " --ratios 1:1:1 --variants p,p+b+i --seeds 2 --iters 50 --threshold-objects 50 --out '" +
            (d / "ablate").string() + "'",
    };
    for (const auto& s : steps) all_ran = all_ran && run_cli(s) == 0;
  }
  const auto a = testing::read_tree(root / "a");
  const auto b = testing::read_tree(root / "b");
  std::set<std::string> names;
  for (const auto& [k, v] : a) names.insert(k);
  for (const auto& [k, v] : b) names.insert(k);
  for (const auto& n : names) {
    if (!a.contains(n) || !b.contains(n) || a.at(n) != b.at(n)) differing.push_back(n);
  }
  std::string detail = std::to_string(names.size()) + " files compared";
  if (!all_ran) detail += ", a command failed";
  for (std::size_t k = 0; k < std::min<std::size_t>(differing.size(), 5); ++k) detail += ", differs: " + differing[k];
  return {all_ran && differing.empty() && !names.empty(), detail};
}

}  // namespace
}  // namespace dsup

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks"};
  std::vector<int> only;
  int iterations = 8000;
  app.add_option("--only", only, "Run just these criteria")->delimiter(',');
  app.add_option("--iters", iterations, "Training steps per run for criteria 6 and 7")->capture_default_str();
  CLI11_PARSE(app, argc, argv);

  struct Criterion {
    int id;
    const char* name;
    bool gated;
    std::function<dsup::Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "gradient correctness", true, dsup::gradient_correctness},
      {2, "loss identities", true, dsup::loss_identities},
      {3, "boxmask properties", true, dsup::boxmask_properties},
      {4, "metrics oracle", true, dsup::metrics_oracle},
      {5, "split sizes", true, dsup::split_fidelity},
      {6, "supervision ordering", true, [&] { return dsup::supervision_ordering(iterations); }},
      {7, "soft vs hard box labels (report only)", false, [&] { return dsup::soft_vs_hard(iterations); }},
      {8, "threshold study", true, dsup::threshold_study},
      {9, "CLI determinism", true, dsup::cli_determinism},
  };
  bool ok = true;
  for (const auto& c : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    dsup::Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    std::printf("criterion %d %s: %s (%s)\n", c.id, c.name, o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
    if (c.gated && !o.pass) ok = false;
  }
  return ok ? 0 : 1;
}
