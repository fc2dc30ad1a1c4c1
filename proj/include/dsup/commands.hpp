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

// The dsup subcommands. Each throws on failure; the CLI maps exceptions to
// exit code 1.

#ifndef DSUP_COMMANDS_HPP_
#define DSUP_COMMANDS_HPP_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>

namespace dsup {

struct GenDataOptions {
  std::filesystem::path out;
  int count = 600;
  int val = 100;
  int size = 48;
  int classes = 4;
  std::uint64_t seed = 0;
  double overlap = 0.3;
};
void cmd_gen_data(const GenDataOptions& opt, std::ostream& log);

struct MakeMasksOptions {
  std::filesystem::path data;
  std::string strategy = "ucm";
  double alpha = 30.0;
  std::uint64_t seed = 0;
};
// Writes masks/<id>.ssl (soft strategies) or masks/<id>.pgm (hardseg) for
// every training sample with boxes and records them in the manifest.
void cmd_make_masks(const MakeMasksOptions& opt, std::ostream& log);

struct TrainOptions {
  std::filesystem::path data;
  std::string ratio;
  std::string variant = "p+b+i";
  int iters = 1000;
  std::uint64_t seed = 0;
  std::filesystem::path out;
  double lr = 1e-4;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  // Box labels for samples without stored masks.
  std::string strategy = "ucm";
  double alpha = 30.0;
};
// Writes the checkpoint to `out` and the training log to `out` + ".log".
void cmd_train(const TrainOptions& opt, std::ostream& log);

struct EvalOptions {
  std::filesystem::path ckpt;
  std::filesystem::path data;
  std::filesystem::path report;
  std::string split = "val";
};
// Writes the JSON report to `report` and the text table to `report` + ".txt".
void cmd_eval(const EvalOptions& opt, std::ostream& log);

struct AblateOptions {
  std::filesystem::path data;
  std::string ratios = "1:1:1,1:2:3,1:5:10";
  std::string variants = "p,p+i,p+b,p+b+i";
  int seeds = 5;
  std::filesystem::path out;
  int iters = 8000;
  std::uint64_t seed = 0;
  int jobs = 1;
  std::string strategies = "ucm,rawbox,hardseg";
  std::string strategy_ratio = "1:5:10";
  std::string strategy_variant = "p+b+i";
  double alpha = 30.0;
  int threshold_objects = 500;
  bool skip_strategies = false;
};
// Returns false when any sub-run failed; reports are written regardless.
bool cmd_ablate(const AblateOptions& opt, std::ostream& log);

}  // namespace dsup

#endif  // DSUP_COMMANDS_HPP_
