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

#include "dsup/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <mutex>
#include <thread>

#include "json.hpp"

namespace dsup {
namespace {

using json = nlohmann::json;

MetricStat stat_of(const std::vector<double>& v) {
  MetricStat s;
  for (double x : v) s.mean += x;
  s.mean /= static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return s;
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

// Left-aligned first column, right-aligned others.
std::string render_table(const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width;
  for (const auto& r : rows) {
    width.resize(std::max(width.size(), r.size()), 0);
    for (std::size_t c = 0; c < r.size(); ++c) width[c] = std::max(width[c], r[c].size());
  }
  std::string out;
  for (const auto& r : rows) {
    std::string line;
    for (std::size_t c = 0; c < r.size(); ++c) {
      const std::string pad(width[c] - r[c].size(), ' ');
      if (c > 0) line += "  ";
      line += c == 0 ? r[c] + pad : pad + r[c];
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out += line + "\n";
  }
  return out;
}

json metrics_json(const SegmentationMetrics& m) {
  json per_class = json::array();
  for (const auto& iu : m.per_class_iu) per_class.push_back(iu ? json(*iu) : json(nullptr));
  return {{"pAcc", m.pixel_accuracy},
          {"mAcc", m.mean_accuracy},
          {"mIU", m.mean_iu},
          {"fwIU", m.frequency_weighted_iu},
          {"per_class_iu", per_class}};
}

json stat_json(const MetricStat& s) { return {{"mean", s.mean}, {"std", s.std}}; }

std::string pm(const MetricStat& s) { return fixed(100.0 * s.mean, 2) + " +- " + fixed(100.0 * s.std, 2); }

}  // namespace

bool GridCell::failed() const {
  return runs.empty() || std::any_of(runs.begin(), runs.end(), [](const RunResult& r) { return !r.ok; });
}

CellSummary summarize(const GridCell& cell) {
  if (cell.failed()) throw std::logic_error("summarize: cell has failed runs");
  std::vector<double> pacc, macc, miu, fwiu;
  for (const auto& r : cell.runs) {
    pacc.push_back(r.metrics.pixel_accuracy);
    macc.push_back(r.metrics.mean_accuracy);
    miu.push_back(r.metrics.mean_iu);
    fwiu.push_back(r.metrics.frequency_weighted_iu);
  }
  return {stat_of(pacc), stat_of(macc), stat_of(miu), stat_of(fwiu)};
}

std::uint64_t grid_run_seed(std::uint64_t base_seed, int k) {
  return derive_seed(base_seed, 1000 + static_cast<std::uint64_t>(k));
}

std::vector<GridCell> run_grid(const Dataset& dataset, const GridSpec& spec) {
  if (spec.seeds < 1) throw std::invalid_argument("run_grid: seeds must be >= 1");
  if (spec.ratios.empty() || spec.variants.empty() || spec.strategies.empty()) {
    throw std::invalid_argument("run_grid: empty ratio, variant or strategy list");
  }
  spec.base.validate();

  Dataset data = dataset;
  for (auto& s : data.train) s.box_target.reset();

  std::vector<GridCell> cells;
  for (const auto& strategy : spec.strategies) {
    for (const auto& ratio : spec.ratios) {
      for (const auto& variant : spec.variants) {
        GridCell cell;
        cell.ratio = ratio;
        cell.variant = variant;
        cell.strategy = strategy;
        cell.runs.resize(static_cast<std::size_t>(spec.seeds));
        cells.push_back(std::move(cell));
      }
    }
  }

  struct Job {
    std::size_t cell;
    int seed_index;
  };
  std::vector<Job> jobs;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    for (int k = 0; k < spec.seeds; ++k) jobs.push_back({c, k});
  }

  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t j = next++; j < jobs.size(); j = next++) {
      GridCell& cell = cells[jobs[j].cell];
      RunResult& run = cell.runs[static_cast<std::size_t>(jobs[j].seed_index)];
      run.seed = grid_run_seed(spec.base.seed, jobs[j].seed_index);
      try {
        TrainConfig cfg = spec.base;
        cfg.ratio = cell.ratio;
        cfg.variant = cell.variant;
        cfg.box_strategy = cell.strategy;
        cfg.seed = run.seed;
        const TrainResult trained = train(data, cfg);
        run.metrics = evaluate(trained.params, data.val).metrics;
        run.branch_evaluations = trained.branch_evaluations;
        run.ok = true;
      } catch (const std::exception& e) {
        run.ok = false;
        run.error = e.what();
      }
    }
  };
  const int threads = std::clamp(spec.jobs, 1, static_cast<int>(jobs.size()));
  std::vector<std::thread> pool;
  for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  return cells;
}

std::vector<double> object_mask_ious(std::span<const Sample> samples, const BoxMaskConfig& config,
                                     std::size_t max_objects) {
  config.validate();
  std::vector<double> ious;
  for (const auto& s : samples) {
    if (ious.size() >= max_objects) break;
    if (s.boxes.empty()) continue;
    if (!s.strength || !s.pixel_labels) {
      throw std::invalid_argument("object_mask_ious: sample '" + s.id +
                                  "' needs a strength map and pixel labels");
    }
    for (const auto& box : s.boxes) {
      if (ious.size() >= max_objects) break;
      const ObjectMask mask = box_to_mask(*s.strength, box, config);
      std::size_t inter = 0;
      std::size_t uni = 0;
      for (int y = box.y0; y <= box.y1; ++y) {
        for (int x = box.x0; x <= box.x1; ++x) {
          const bool truth = s.pixel_labels->at(x, y) == box.class_id;
          const bool pred = mask.confident.at(x - box.x0, y - box.y0) != 0;
          inter += truth && pred;
          uni += truth || pred;
        }
      }
      ious.push_back(uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni));
    }
  }
  return ious;
}

ThresholdStudy run_threshold_study(std::span<const Sample> samples, double alpha_percent,
                                   std::size_t max_objects) {
  ThresholdStudy study;
  study.columns = {"1/4 only", "1/2 only", "3/4 only", "all three"};
  const std::vector<std::vector<double>> settings = {{0.25}, {0.5}, {0.75}, {0.25, 0.5, 0.75}};
  for (const auto& thresholds : settings) {
    BoxMaskConfig cfg;
    cfg.alpha_percent = alpha_percent;
    cfg.thresholds = thresholds;
    const auto ious = object_mask_ious(samples, cfg, max_objects);
    if (ious.empty()) throw std::invalid_argument("threshold study: no boxes in the samples");
    study.objects = ious.size();
    double sum = 0.0;
    for (double v : ious) sum += v;
    study.mean_iou.push_back(sum / static_cast<double>(ious.size()));
  }
  return study;
}

std::string eval_report_json(const SegmentationMetrics& metrics) {
  return metrics_json(metrics).dump(2) + "\n";
}

std::string eval_report_text(const SegmentationMetrics& metrics) {
  std::vector<std::vector<std::string>> rows = {{"metric", "value"},
                                                {"pAcc", fixed(metrics.pixel_accuracy, 4)},
                                                {"mAcc", fixed(metrics.mean_accuracy, 4)},
                                                {"mIU", fixed(metrics.mean_iu, 4)},
                                                {"fwIU", fixed(metrics.frequency_weighted_iu, 4)}};
  for (std::size_t c = 0; c < metrics.per_class_iu.size(); ++c) {
    const auto& iu = metrics.per_class_iu[c];
    rows.push_back({"IU class " + std::to_string(c), iu ? fixed(*iu, 4) : "n/a"});
  }
  return render_table(rows);
}

std::string grid_json(const std::vector<GridCell>& cells, const GridSpec& spec) {
  json out;
  out["seeds"] = spec.seeds;
  out["iterations"] = spec.base.iterations;
  out["base_seed"] = spec.base.seed;
  json rows = json::array();
  for (const auto& cell : cells) {
    json row = {{"ratio", cell.ratio.to_string()},
                {"variant", cell.variant.to_string()},
                {"strategy", std::string(box_strategy_name(cell.strategy))},
                {"failed", cell.failed()}};
    json runs = json::array();
    for (const auto& r : cell.runs) {
      json run = {{"seed", r.seed}, {"ok", r.ok}};
      if (r.ok) {
        run["metrics"] = metrics_json(r.metrics);
        run["branch_evaluations"] = {{"pixel", r.branch_evaluations[0]},
                                     {"box", r.branch_evaluations[1]},
                                     {"image", r.branch_evaluations[2]}};
      } else {
        run["error"] = r.error;
      }
      runs.push_back(run);
    }
    row["runs"] = runs;
    if (!cell.failed()) {
      const CellSummary s = summarize(cell);
      row["summary"] = {{"pAcc", stat_json(s.pixel_accuracy)},
                        {"mAcc", stat_json(s.mean_accuracy)},
                        {"mIU", stat_json(s.mean_iu)},
                        {"fwIU", stat_json(s.frequency_weighted_iu)}};
    }
    rows.push_back(row);
  }
  out["cells"] = rows;
  return out.dump(2) + "\n";
}

std::string grid_text(const std::vector<GridCell>& cells) {
  std::vector<std::vector<std::string>> rows = {
      {"ratio", "method", "box labels", "pAcc", "mAcc", "mIU", "fwIU"}};
  for (const auto& cell : cells) {
    std::vector<std::string> row = {cell.ratio.to_string(), "FCN-" + cell.variant.to_string(),
                                    std::string(box_strategy_name(cell.strategy))};
    if (cell.failed()) {
      for (int k = 0; k < 4; ++k) row.push_back("failed");
    } else {
      const CellSummary s = summarize(cell);
      row.push_back(pm(s.pixel_accuracy));
      row.push_back(pm(s.mean_accuracy));
      row.push_back(pm(s.mean_iu));
      row.push_back(pm(s.frequency_weighted_iu));
    }
    rows.push_back(row);
  }
  return render_table(rows);
}

std::string threshold_json(const ThresholdStudy& study) {
  json cols = json::array();
  for (std::size_t k = 0; k < study.columns.size(); ++k) {
    cols.push_back({{"thresholds", study.columns[k]}, {"mean_iou", study.mean_iou[k]}});
  }
  return json{{"objects", study.objects}, {"columns", cols}}.dump(2) + "\n";
}

std::string threshold_text(const ThresholdStudy& study) {
  std::vector<std::string> header = {"objects"};
  std::vector<std::string> values = {std::to_string(study.objects)};
  for (std::size_t k = 0; k < study.columns.size(); ++k) {
    header.push_back(study.columns[k]);
    values.push_back(fixed(study.mean_iou[k], 4));
  }
  return render_table({header, values});
}

}  // namespace dsup
