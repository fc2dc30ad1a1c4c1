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

#include "dsup/commands.hpp"

#include <map>
#include <ostream>
#include <stdexcept>
#include <vector>

#include "dsup/experiments.hpp"
#include "dsup/io.hpp"
#include "dsup/metrics.hpp"
#include "dsup/synthdata.hpp"
#include "dsup/trainer.hpp"

namespace dsup {
namespace {

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> items;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t end = std::min(text.find(',', pos), text.size());
    std::string item = text.substr(pos, end - pos);
    if (item.empty()) throw std::invalid_argument("empty entry in list '" + text + "'");
    items.push_back(std::move(item));
    pos = end + 1;
  }
  return items;
}

void ensure_directory(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create " + dir.string() + ": " + ec.message());
}

std::filesystem::path with_suffix(const std::filesystem::path& p, const std::string& suffix) {
  return std::filesystem::path(p.string() + suffix);
}

}  // namespace

void cmd_gen_data(const GenDataOptions& opt, std::ostream& log) {
  SceneSpec spec;
  spec.dims = Dims(opt.size, opt.size);
  spec.num_classes = opt.classes;
  spec.overlap_probability = opt.overlap;
  // Keep shapes proportional for sizes other than the 48 pixel default.
  if (opt.size != 48) {
    spec.min_radius = std::max(2, opt.size / 8);
    spec.max_radius = std::max(spec.min_radius, (opt.size * 11) / 48);
  }
  gen_dataset(spec, opt.count, opt.val, opt.seed, opt.out);
  log << "wrote " << opt.count << " train + " << opt.val << " val scenes (" << opt.size << "x"
      << opt.size << ", " << opt.classes << " classes) to " << opt.out.string() << "\n";
}

void cmd_make_masks(const MakeMasksOptions& opt, std::ostream& log) {
  const BoxStrategy strategy = parse_box_strategy(opt.strategy);
  BoxMaskConfig cfg;
  cfg.alpha_percent = opt.alpha;
  cfg.validate();

  Manifest manifest = read_manifest(opt.data);
  const ClassConfig classes(manifest.header.num_classes);
  std::map<std::string, std::vector<BoundingBox>> boxes;
  for (const auto& [id, b] : manifest.boxes) boxes[id].push_back(b);
  ensure_directory(opt.data / "masks");

  std::size_t written = 0;
  for (std::size_t k = 0; k < manifest.records.size(); ++k) {
    ManifestRecord& r = manifest.records[k];
    auto it = boxes.find(r.id);
    if (r.split != "train" || it == boxes.end()) continue;
    BoundaryStrengthMap strength(manifest.header.dims);
    if (strategy == BoxStrategy::kUcm || strategy == BoxStrategy::kHardSeg) {
      if (!r.strength) {
        throw std::invalid_argument("sample '" + r.id + "' has boxes but no strength map (needed by " +
                                    opt.strategy + ")");
      }
      strength = read_strength_map(opt.data / *r.strength);
    }
    const std::uint64_t seed = derive_seed(opt.seed, k);
    const SoftSegLabel target = make_box_target(strategy, it->second, strength, classes, cfg, seed);
    if (strategy == BoxStrategy::kHardSeg) {
      // The soft target already carries the hardened labels; uncertain
      // pixels become the ignore value.
      PixelLabelMap hard(target.dims(), kIgnoreLabel);
      for (std::size_t i = 0; i < target.pixel_count(); ++i) {
        if (target.is_uncertain(i)) continue;
        for (int c = 0; c <= classes.num_object_classes(); ++c) {
          if (target.has_class(i, c)) hard[i] = static_cast<std::uint8_t>(c);
        }
      }
      r.soft = "masks/" + r.id + ".pgm";
      write_label_map(opt.data / *r.soft, hard);
    } else {
      r.soft = "masks/" + r.id + ".ssl";
      write_soft_label(opt.data / *r.soft, target);
    }
    ++written;
  }
  manifest.header.mask_strategy = std::string(box_strategy_name(strategy));
  manifest.header.mask_alpha = opt.alpha;
  manifest.header.mask_seed = opt.seed;
  write_manifest(opt.data, manifest);
  log << "wrote " << written << " " << box_strategy_name(strategy) << " masks (alpha "
      << opt.alpha << ") under " << (opt.data / "masks").string() << "\n";
}

void cmd_train(const TrainOptions& opt, std::ostream& log) {
  TrainConfig cfg;
  cfg.ratio = SplitRatio::parse(opt.ratio);
  cfg.variant = Variant::parse(opt.variant);
  cfg.iterations = opt.iters;
  cfg.seed = opt.seed;
  cfg.lr = opt.lr;
  cfg.momentum = opt.momentum;
  cfg.weight_decay = opt.weight_decay;
  cfg.box_strategy = parse_box_strategy(opt.strategy);
  cfg.mask_config.alpha_percent = opt.alpha;
  cfg.validate();

  const Dataset ds = load_dataset(opt.data);
  const TrainResult result = train(ds, cfg);
  write_checkpoint(opt.out, result.params);
  std::string text;
  for (const auto& line : result.log) text += line + "\n";
  write_text_file(with_suffix(opt.out, ".log"), text);
  log << "trained " << cfg.iterations << " steps (pixel " << result.branch_evaluations[0]
      << ", box " << result.branch_evaluations[1] << ", image " << result.branch_evaluations[2]
      << "); checkpoint " << opt.out.string() << "\n";
}

void cmd_eval(const EvalOptions& opt, std::ostream& log) {
  const NetParams params = read_checkpoint(opt.ckpt);
  const Dataset ds = load_dataset(opt.data);
  if (params.arch.num_object_classes != ds.num_object_classes) {
    throw std::invalid_argument("checkpoint architecture has " +
                                std::to_string(params.arch.num_object_classes) +
                                " classes, dataset has " + std::to_string(ds.num_object_classes));
  }
  if (opt.split != "val" && opt.split != "train") {
    throw std::invalid_argument("eval: split must be 'val' or 'train'");
  }
  const auto& samples = opt.split == "val" ? ds.val : ds.train;
  const EvalReport report = evaluate(params, samples);
  write_text_file(opt.report, eval_report_json(report.metrics));
  const std::string text = eval_report_text(report.metrics);
  write_text_file(with_suffix(opt.report, ".txt"), text);
  log << text;
}

bool cmd_ablate(const AblateOptions& opt, std::ostream& log) {
  GridSpec grid;
  for (const auto& r : split_list(opt.ratios)) grid.ratios.push_back(SplitRatio::parse(r));
  for (const auto& v : split_list(opt.variants)) grid.variants.push_back(Variant::parse(v));
  grid.seeds = opt.seeds;
  grid.jobs = opt.jobs;
  grid.base.iterations = opt.iters;
  grid.base.seed = opt.seed;
  grid.base.mask_config.alpha_percent = opt.alpha;
  grid.base.validate();
  if (opt.seeds < 1) throw std::invalid_argument("ablate: --seeds must be >= 1");
  if (opt.threshold_objects < 1) throw std::invalid_argument("ablate: --threshold-objects must be >= 1");

  GridSpec strategies = grid;
  strategies.ratios = {SplitRatio::parse(opt.strategy_ratio)};
  strategies.variants = {Variant::parse(opt.strategy_variant)};
  strategies.strategies.clear();
  for (const auto& s : split_list(opt.strategies)) strategies.strategies.push_back(parse_box_strategy(s));

  const Dataset ds = load_dataset(opt.data);
  ensure_directory(opt.out);
  bool ok = true;

  const auto cells = run_grid(ds, grid);
  write_text_file(opt.out / "grid.json", grid_json(cells, grid));
  const std::string grid_table = grid_text(cells);
  write_text_file(opt.out / "grid.txt", grid_table);
  log << "== variant grid\n" << grid_table;
  for (const auto& c : cells) ok = ok && !c.failed();

  if (!opt.skip_strategies) {
    const auto strategy_cells = run_grid(ds, strategies);
    write_text_file(opt.out / "strategies.json", grid_json(strategy_cells, strategies));
    const std::string table = grid_text(strategy_cells);
    write_text_file(opt.out / "strategies.txt", table);
    log << "== box label strategies\n" << table;
    for (const auto& c : strategy_cells) ok = ok && !c.failed();
  }

  const ThresholdStudy study = run_threshold_study(ds.train, opt.alpha,
                                                   static_cast<std::size_t>(opt.threshold_objects));
  write_text_file(opt.out / "thresholds.json", threshold_json(study));
  const std::string table = threshold_text(study);
  write_text_file(opt.out / "thresholds.txt", table);
  log << "== mask thresholds (mean per-object IoU)\n" << table;

  for (const auto& c : cells) {
    for (const auto& r : c.runs) {
      if (!r.ok) {
        log << "failed: " << c.ratio.to_string() << " " << c.variant.to_string() << " seed " << r.seed
            << ": " << r.error << "\n";
      }
    }
  }
  return ok;
}

}  // namespace dsup
