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

// dsup command-line tool. Exit codes: 0 success, 1 runtime failure,
// 2 usage error.

#include <exception>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "dsup/commands.hpp"

namespace {

constexpr int kRuntimeFailure = 1;
constexpr int kUsageError = 2;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semantic segmentation from mixed pixel, box and image supervision"};
  app.require_subcommand(1);

  dsup::GenDataOptions gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate a synthetic scene dataset");
  gen_cmd->add_option("--out", gen.out, "Output directory")->required();
  gen_cmd->add_option("--count", gen.count, "Training scenes")->capture_default_str()->check(CLI::NonNegativeNumber);
  gen_cmd->add_option("--val", gen.val, "Validation scenes")->capture_default_str()->check(CLI::NonNegativeNumber);
  gen_cmd->add_option("--size", gen.size, "Square image side in pixels")->capture_default_str();
  gen_cmd->add_option("--classes", gen.classes, "Object classes")->capture_default_str();
  gen_cmd->add_option("--seed", gen.seed, "Generator seed")->capture_default_str();
  gen_cmd->add_option("--overlap", gen.overlap, "Chance an object overlaps an earlier one")
      ->capture_default_str();

  dsup::MakeMasksOptions masks;
  auto* masks_cmd = app.add_subcommand("make-masks", "Build box-branch labels from boxes");
  masks_cmd->add_option("--data", masks.data, "Dataset directory")->required();
  masks_cmd->add_option("--strategy", masks.strategy, "ucm, rawbox or hardseg")->capture_default_str();
  masks_cmd->add_option("--alpha", masks.alpha, "Minimum mask area, percent of the box")->capture_default_str();
  masks_cmd->add_option("--seed", masks.seed, "Seed for hardseg tie breaking")->capture_default_str();

  dsup::TrainOptions tr;
  auto* train_cmd = app.add_subcommand("train", "Train the segmentation network");
  train_cmd->add_option("--data", tr.data, "Dataset directory")->required();
  train_cmd->add_option("--ratio", tr.ratio, "Subset ratio P:B:I")->required();
  train_cmd->add_option("--variant", tr.variant, "Branches: p, p+i, p+b or p+b+i")->capture_default_str();
  train_cmd->add_option("--iters", tr.iters, "SGD steps")->capture_default_str();
  train_cmd->add_option("--seed", tr.seed, "Run seed")->capture_default_str();
  train_cmd->add_option("--out", tr.out, "Checkpoint path")->required();
  train_cmd->add_option("--lr", tr.lr, "Learning rate")->capture_default_str();
  train_cmd->add_option("--momentum", tr.momentum, "Momentum")->capture_default_str();
  train_cmd->add_option("--weight-decay", tr.weight_decay, "Weight decay")->capture_default_str();
  train_cmd->add_option("--strategy", tr.strategy, "Box labels when none are stored")->capture_default_str();
  train_cmd->add_option("--alpha", tr.alpha, "Minimum mask area for built box labels")->capture_default_str();

  dsup::EvalOptions ev;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint");
  eval_cmd->add_option("--ckpt", ev.ckpt, "Checkpoint path")->required();
  eval_cmd->add_option("--data", ev.data, "Dataset directory")->required();
  eval_cmd->add_option("--report", ev.report, "JSON report path; text goes to <report>.txt")->required();
  eval_cmd->add_option("--split", ev.split, "val or train")->capture_default_str();

  dsup::AblateOptions ab;
  auto* ablate_cmd = app.add_subcommand("ablate", "Run the ratio x variant grid and mask studies");
  ablate_cmd->add_option("--data", ab.data, "Dataset directory")->required();
  ablate_cmd->add_option("--ratios", ab.ratios, "Comma-separated ratios")->capture_default_str();
  ablate_cmd->add_option("--variants", ab.variants, "Comma-separated variants")->capture_default_str();
  ablate_cmd->add_option("--seeds", ab.seeds, "Runs per cell")->capture_default_str();
  ablate_cmd->add_option("--out", ab.out, "Report directory")->required();
  ablate_cmd->add_option("--iters", ab.iters, "SGD steps per run")->capture_default_str();
  ablate_cmd->add_option("--seed", ab.seed, "Base seed")->capture_default_str();
  ablate_cmd->add_option("--jobs", ab.jobs, "Worker threads")->capture_default_str();
  ablate_cmd->add_option("--strategies", ab.strategies, "Box label strategies to compare")
      ->capture_default_str();
  ablate_cmd->add_option("--strategy-ratio", ab.strategy_ratio, "Ratio for the strategy grid")
      ->capture_default_str();
  ablate_cmd->add_option("--strategy-variant", ab.strategy_variant, "Variant for the strategy grid")
      ->capture_default_str();
  ablate_cmd->add_option("--alpha", ab.alpha, "Minimum mask area, percent of the box")->capture_default_str();
  ablate_cmd->add_option("--threshold-objects", ab.threshold_objects, "Boxes in the threshold study")
      ->capture_default_str();
  ablate_cmd->add_flag("--skip-strategies", ab.skip_strategies, "Skip the strategy grid");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsageError;
  }

  try {
    if (*gen_cmd) dsup::cmd_gen_data(gen, std::cout);
    if (*masks_cmd) dsup::cmd_make_masks(masks, std::cout);
    if (*train_cmd) dsup::cmd_train(tr, std::cout);
    if (*eval_cmd) dsup::cmd_eval(ev, std::cout);
    if (*ablate_cmd && !dsup::cmd_ablate(ab, std::cout)) {
      std::cerr << "dsup: one or more ablation runs failed\n";
      return kRuntimeFailure;
    }
  } catch (const std::exception& e) {
    std::cerr << "dsup: " << e.what() << "\n";
    return kRuntimeFailure;
  }
  return 0;
}
