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

// Seeded synthetic shape scenes with complete ground truth.
//
// Shapes (disc, square, triangle, ring; further classes cycle through the
// same outlines with their own colors) are painted back to front on a
// textured background. The boundary-strength map mimics a UCM with three
// disjoint bands:
//   true visible contours     [0.75, 1.0]
//   class-internal texture    [0.30, 0.55]  (ring hubs, surface spots,
//                                           and short faded contour gaps)
//   background distractors    [0.05, 0.30]
// A contour pixel is always placed on the rear side of an edge, so the
// front region stays closed under 4-connected flood fill. Images and
// strengths are quantized to 8 bits at generation time so in-memory scenes
// match what the dataset files hold.

#ifndef DSUP_SYNTHDATA_HPP_
#define DSUP_SYNTHDATA_HPP_

#include <array>
#include <cstdint>
#include <filesystem>
#include <random>
#include <vector>

#include "dsup/boxmask.hpp"
#include "dsup/core.hpp"
#include "dsup/dataset.hpp"
#include "dsup/labels.hpp"
#include "dsup/losses.hpp"

namespace dsup {

enum class ShapeKind { kDisc = 0, kSquare = 1, kTriangle = 2, kRing = 3 };

struct ClassAppearance {
  std::array<float, 3> mean_rgb{};
  float jitter = 0.1f;
};

struct SceneSpec {
  Dims dims{48, 48};
  int num_classes = 4;
  int min_objects = 1;
  int max_objects = 3;
  // Half-extent of a shape in pixels.
  int min_radius = 6;
  int max_radius = 11;
  // Chance that an object is placed to overlap an earlier one.
  double overlap_probability = 0.3;
  // Minimum visible fraction of every object after occlusion.
  double min_visible_fraction = 0.45;
  // Per-class colors; generated from a fixed palette when empty.
  std::vector<ClassAppearance> appearance;
  double pixel_noise = 0.03;
  double background_texture = 0.10;
  std::array<double, 2> contour_strength{0.75, 1.0};
  std::array<double, 2> texture_strength{0.30, 0.55};
  std::array<double, 2> distractor_strength{0.05, 0.30};
  // Background distractor patches per image.
  int distractor_patches = 4;
  // Chance that a non-ring object carries an internal surface spot.
  double spot_probability = 0.3;
  // Chance that an object's outer contour has one faded segment.
  double gap_probability = 0.3;
  int gap_length = 3;

  void validate() const;
  ClassAppearance appearance_of(int class_id) const;
  static ShapeKind shape_of(int class_id);
};

struct SceneObject {
  int class_id = 1;
  int center_x = 0;
  int center_y = 0;
  int radius = 1;
  // Ring hub or surface spot around the center, bounded by texture edges.
  bool has_core = false;
  BoundingBox box;
};

struct Scene {
  RgbImage image;
  PixelLabelMap pixel_labels;
  std::vector<BoundingBox> boxes;
  ImageLabel image_label;
  BoundaryStrengthMap strength;
  std::vector<SceneObject> objects;
  // Visible object index + 1 per pixel, 0 for background.
  std::vector<std::uint16_t> instance_map;
  // Pixels carrying a true visible contour strength (faded gaps included).
  std::vector<std::uint8_t> contour_pixels;
};

Scene gen_scene(const SceneSpec& spec, std::mt19937_64& rng);

// Scene seeds are derived per index so generation can run in any order.
Dataset gen_dataset_in_memory(const SceneSpec& spec, int n_train, int n_val, std::uint64_t seed);

Sample scene_to_sample(Scene scene, std::string id);

// Writes the dataset layout (manifest, boxes, rasters) under out_dir.
void gen_dataset(const SceneSpec& spec, int n_train, int n_val, std::uint64_t seed,
                 const std::filesystem::path& out_dir);

}  // namespace dsup

#endif  // DSUP_SYNTHDATA_HPP_
