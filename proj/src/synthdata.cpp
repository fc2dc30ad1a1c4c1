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

#include "dsup/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "dsup/io.hpp"
#include "dsup/trainer.hpp"

namespace dsup {
namespace {

constexpr int kMaxPlacementAttempts = 100;

const std::array<ClassAppearance, 4> kPalette = {{
    {{0.85f, 0.25f, 0.20f}, 0.12f},  // disc
    {{0.25f, 0.70f, 0.30f}, 0.12f},  // square
    {{0.25f, 0.35f, 0.85f}, 0.12f},  // triangle
    {{0.85f, 0.75f, 0.20f}, 0.12f},  // ring
}};

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

double uniform(std::mt19937_64& rng, const std::array<double, 2>& band) {
  return uniform(rng, band[0], band[1]);
}

int uniform_int(std::mt19937_64& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

bool coin(std::mt19937_64& rng, double p) { return uniform(rng, 0.0, 1.0) < p; }

bool shape_contains(const SceneObject& obj, int x, int y) {
  const int dx = x - obj.center_x;
  const int dy = y - obj.center_y;
  const int r = obj.radius;
  switch (SceneSpec::shape_of(obj.class_id)) {
    case ShapeKind::kDisc:
    case ShapeKind::kRing:
      return dx * dx + dy * dy <= r * r;
    case ShapeKind::kSquare: {
      const int half = static_cast<int>(std::lround(0.85 * r));
      return std::abs(dx) <= half && std::abs(dy) <= half;
    }
    case ShapeKind::kTriangle:
      // Apex at (0, -r), base from (-r, r) to (r, r).
      return dy >= -r && dy <= r && 2 * std::abs(dx) <= dy + r;
  }
  return false;
}

// Hub (rings) or surface spot (others) around the center.
bool core_contains(const SceneObject& obj, int x, int y) {
  if (!obj.has_core) return false;
  const double dx = x - obj.center_x;
  const double dy = y - obj.center_y;
  const double frac = SceneSpec::shape_of(obj.class_id) == ShapeKind::kRing ? 0.45 : 0.3;
  const double rc = std::max(1.0, frac * obj.radius);
  return dx * dx + dy * dy <= rc * rc;
}

BoundingBox tight_box(const SceneObject& obj, const Dims& dims) {
  BoundingBox b{obj.class_id, dims.width, dims.height, -1, -1};
  for (int y = 0; y < dims.height; ++y) {
    for (int x = 0; x < dims.width; ++x) {
      if (!shape_contains(obj, x, y)) continue;
      b.x0 = std::min(b.x0, x);
      b.y0 = std::min(b.y0, y);
      b.x1 = std::max(b.x1, x);
      b.y1 = std::max(b.y1, y);
    }
  }
  return b;
}

bool boxes_overlap(const BoundingBox& a, const BoundingBox& b) {
  return a.x0 <= b.x1 && b.x0 <= a.x1 && a.y0 <= b.y1 && b.y0 <= a.y1;
}

std::vector<std::uint16_t> paint_instances(const std::vector<SceneObject>& objects,
                                           const Dims& dims) {
  std::vector<std::uint16_t> inst(dims.pixel_count(), 0);
  for (std::size_t k = 0; k < objects.size(); ++k) {
    for (int y = objects[k].box.y0; y <= objects[k].box.y1; ++y) {
      for (int x = objects[k].box.x0; x <= objects[k].box.x1; ++x) {
        if (shape_contains(objects[k], x, y)) inst[dims.index(x, y)] = static_cast<std::uint16_t>(k + 1);
      }
    }
  }
  return inst;
}

bool all_visible_enough(const std::vector<SceneObject>& objects,
                        const std::vector<std::uint16_t>& inst, const Dims& dims,
                        double min_fraction) {
  for (std::size_t k = 0; k < objects.size(); ++k) {
    std::size_t full = 0;
    std::size_t visible = 0;
    for (int y = objects[k].box.y0; y <= objects[k].box.y1; ++y) {
      for (int x = objects[k].box.x0; x <= objects[k].box.x1; ++x) {
        if (!shape_contains(objects[k], x, y)) continue;
        ++full;
        if (inst[dims.index(x, y)] == k + 1) ++visible;
      }
    }
    if (static_cast<double>(visible) < min_fraction * static_cast<double>(full)) return false;
  }
  return true;
}

std::vector<SceneObject> place_objects(const SceneSpec& spec, std::mt19937_64& rng) {
  const Dims& dims = spec.dims;
  const int count = uniform_int(rng, spec.min_objects, spec.max_objects);
  std::vector<SceneObject> objects;
  for (int n = 0; n < count; ++n) {
    for (int attempt = 0; attempt < kMaxPlacementAttempts; ++attempt) {
      SceneObject obj;
      obj.class_id = uniform_int(rng, 1, spec.num_classes);
      obj.radius = uniform_int(rng, spec.min_radius, spec.max_radius);
      const bool ring = SceneSpec::shape_of(obj.class_id) == ShapeKind::kRing;
      obj.has_core = ring || coin(rng, spec.spot_probability);
      const int lo = obj.radius + 1;
      const int hi_x = dims.width - obj.radius - 2;
      const int hi_y = dims.height - obj.radius - 2;
      const bool overlapping = !objects.empty() && coin(rng, spec.overlap_probability);
      if (overlapping) {
        const auto& anchor =
            objects[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(objects.size()) - 1))];
        const double angle = uniform(rng, 0.0, 2.0 * std::numbers::pi);
        const double dist = uniform(rng, 0.6, 1.0) * (obj.radius + anchor.radius);
        obj.center_x = anchor.center_x + static_cast<int>(std::lround(dist * std::cos(angle)));
        obj.center_y = anchor.center_y + static_cast<int>(std::lround(dist * std::sin(angle)));
        if (obj.center_x < lo || obj.center_x > hi_x || obj.center_y < lo || obj.center_y > hi_y) {
          continue;
        }
      } else {
        obj.center_x = uniform_int(rng, lo, hi_x);
        obj.center_y = uniform_int(rng, lo, hi_y);
      }
      obj.box = tight_box(obj, dims);
      if (!overlapping) {
        const bool clash = std::any_of(objects.begin(), objects.end(), [&](const SceneObject& o) {
          return boxes_overlap(o.box, obj.box);
        });
        if (clash) continue;
      }
      objects.push_back(obj);
      if (all_visible_enough(objects, paint_instances(objects, dims), dims,
                             spec.min_visible_fraction)) {
        break;
      }
      objects.pop_back();
    }
  }
  return objects;
}

}  // namespace

void SceneSpec::validate() const {
  if (dims.height < 16 || dims.width < 16) {
    throw std::invalid_argument("SceneSpec: image size must be at least 16x16");
  }
  if (num_classes < 2 || num_classes + 1 > SoftSegLabel::kMaxChannels) {
    throw std::invalid_argument("SceneSpec: number of classes must be in [2, 30]");
  }
  if (min_objects < 1 || max_objects < min_objects) {
    throw std::invalid_argument("SceneSpec: invalid objects-per-image range");
  }
  if (min_radius < 2 || max_radius < min_radius ||
      2 * max_radius + 4 > std::min(dims.height, dims.width)) {
    throw std::invalid_argument("SceneSpec: shape radius range does not fit the image");
  }
  for (double p : {overlap_probability, min_visible_fraction, spot_probability, gap_probability}) {
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("SceneSpec: probabilities must be in [0,1]");
  }
  if (!appearance.empty() && static_cast<int>(appearance.size()) != num_classes) {
    throw std::invalid_argument("SceneSpec: appearance list must have one entry per class");
  }
  if (distractor_patches < 0 || gap_length < 1) {
    throw std::invalid_argument("SceneSpec: negative distractor count or empty gap");
  }
}

ShapeKind SceneSpec::shape_of(int class_id) { return static_cast<ShapeKind>((class_id - 1) % 4); }

ClassAppearance SceneSpec::appearance_of(int class_id) const {
  if (!appearance.empty()) return appearance[static_cast<std::size_t>(class_id - 1)];
  if (class_id <= 4) return kPalette[static_cast<std::size_t>(class_id - 1)];
  // Further classes: hues spread by the golden angle.
  const double hue = std::fmod(0.61803398875 * class_id, 1.0) * 6.0;
  const int sector = static_cast<int>(hue);
  const double f = hue - sector;
  const float hi = 0.85f;
  const float lo = 0.2f;
  const auto mid_up = static_cast<float>(lo + (hi - lo) * f);
  const auto mid_down = static_cast<float>(hi - (hi - lo) * f);
  std::array<float, 3> rgb{};
  switch (sector % 6) {
    case 0: rgb = {hi, mid_up, lo}; break;
    case 1: rgb = {mid_down, hi, lo}; break;
    case 2: rgb = {lo, hi, mid_up}; break;
    case 3: rgb = {lo, mid_down, hi}; break;
    case 4: rgb = {mid_up, lo, hi}; break;
    default: rgb = {hi, lo, mid_down}; break;
  }
  return {rgb, 0.12f};
}

Scene gen_scene(const SceneSpec& spec, std::mt19937_64& rng) {
  spec.validate();
  const Dims& dims = spec.dims;
  Scene scene;
  scene.objects = place_objects(spec, rng);
  scene.instance_map = paint_instances(scene.objects, dims);
  const auto& inst = scene.instance_map;

  // Background: base color, smooth undulation, and flat distractor patches.
  std::vector<std::uint16_t> patch(dims.pixel_count(), 0);
  std::vector<std::array<float, 3>> patch_shift(1, {0.0f, 0.0f, 0.0f});
  for (int k = 0; k < spec.distractor_patches; ++k) {
    const int w = uniform_int(rng, 4, dims.width / 3);
    const int h = uniform_int(rng, 4, dims.height / 3);
    const int x0 = uniform_int(rng, 0, dims.width - w);
    const int y0 = uniform_int(rng, 0, dims.height - h);
    const auto id = static_cast<std::uint16_t>(patch_shift.size());
    patch_shift.push_back({static_cast<float>(uniform(rng, -0.07, 0.07)),
                           static_cast<float>(uniform(rng, -0.07, 0.07)),
                           static_cast<float>(uniform(rng, -0.07, 0.07))});
    for (int y = y0; y < y0 + h; ++y) {
      for (int x = x0; x < x0 + w; ++x) patch[dims.index(x, y)] = id;
    }
  }
  std::array<float, 3> base{};
  for (auto& c : base) c = static_cast<float>(uniform(rng, 0.35, 0.6));
  const double fx = uniform(rng, 0.05, 0.25);
  const double fy = uniform(rng, 0.05, 0.25);
  const double phase = uniform(rng, 0.0, 2.0 * std::numbers::pi);

  std::vector<std::array<float, 3>> body(scene.objects.size());
  std::vector<std::array<float, 3>> core(scene.objects.size());
  for (std::size_t k = 0; k < scene.objects.size(); ++k) {
    const ClassAppearance look = spec.appearance_of(scene.objects[k].class_id);
    const bool ring = SceneSpec::shape_of(scene.objects[k].class_id) == ShapeKind::kRing;
    for (int c = 0; c < 3; ++c) {
      const double v = look.mean_rgb[static_cast<std::size_t>(c)] + uniform(rng, -look.jitter, look.jitter);
      body[k][static_cast<std::size_t>(c)] = static_cast<float>(std::clamp(v, 0.0, 1.0));
      core[k][static_cast<std::size_t>(c)] =
          static_cast<float>(std::clamp(ring ? 0.45 * v : v + 0.15, 0.0, 1.0));
    }
  }

  std::normal_distribution<double> noise(0.0, spec.pixel_noise);
  scene.image = RgbImage(dims);
  for (int y = 0; y < dims.height; ++y) {
    for (int x = 0; x < dims.width; ++x) {
      const std::size_t i = dims.index(x, y);
      std::array<float, 3> color{};
      if (inst[i] == 0) {
        const double wave = spec.background_texture * std::sin(fx * x + fy * y + phase);
        for (std::size_t c = 0; c < 3; ++c) {
          color[c] = static_cast<float>(base[c] + wave + patch_shift[patch[i]][c]);
        }
      } else {
        const std::size_t k = inst[i] - 1u;
        color = core_contains(scene.objects[k], x, y) ? core[k] : body[k];
      }
      for (int c = 0; c < 3; ++c) {
        const double v = color[static_cast<std::size_t>(c)] + noise(rng);
        scene.image.at(x, y, c) = quantize_channel(static_cast<float>(v)) / 255.0f;
      }
    }
  }

  // Strength map. Each edge between 4-neighbors is drawn on its rear pixel.
  BoundaryStrengthMap strength(dims);
  scene.contour_pixels.assign(dims.pixel_count(), 0);
  std::vector<std::uint16_t> contour_owner(dims.pixel_count(), 0);
  auto raise = [&](std::size_t i, double s) { strength[i] = std::max(strength[i], s); };
  auto in_core = [&](std::size_t i) {
    if (inst[i] == 0) return false;
    const auto [x, y] = dims.coord(i);
    return core_contains(scene.objects[inst[i] - 1u], x, y);
  };
  for (int y = 0; y < dims.height; ++y) {
    for (int x = 0; x < dims.width; ++x) {
      const std::size_t p = dims.index(x, y);
      const PixelCoord next[2] = {{x + 1, y}, {x, y + 1}};
      for (const auto& n : next) {
        if (!dims.contains(n.x, n.y)) continue;
        const std::size_t q = dims.index(n.x, n.y);
        if (inst[p] != inst[q]) {
          // Later objects are in front; background is behind everything.
          const std::size_t rear = inst[p] < inst[q] ? p : q;
          const std::size_t front = rear == p ? q : p;
          scene.contour_pixels[rear] = 1;
          contour_owner[rear] = std::max(contour_owner[rear], inst[front]);
          raise(rear, uniform(rng, spec.contour_strength));
        } else if (inst[p] != 0 && in_core(p) != in_core(q)) {
          raise(in_core(p) ? q : p, uniform(rng, spec.texture_strength));
        } else if (inst[p] == 0 && patch[p] != patch[q]) {
          raise(patch[p] > patch[q] ? p : q, uniform(rng, spec.distractor_strength));
        }
      }
    }
  }

  // Faded contour segments: the gap_length contour pixels of one object
  // closest to a random seed pixel drop to the texture band.
  for (std::size_t k = 0; k < scene.objects.size(); ++k) {
    if (!coin(rng, spec.gap_probability)) continue;
    std::vector<std::size_t> own;
    for (std::size_t i = 0; i < dims.pixel_count(); ++i) {
      if (scene.contour_pixels[i] && contour_owner[i] == k + 1) own.push_back(i);
    }
    if (own.empty()) continue;
    const auto seed_px = dims.coord(own[static_cast<std::size_t>(
        uniform_int(rng, 0, static_cast<int>(own.size()) - 1))]);
    std::stable_sort(own.begin(), own.end(), [&](std::size_t a, std::size_t b) {
      const auto pa = dims.coord(a);
      const auto pb = dims.coord(b);
      const int da = (pa.x - seed_px.x) * (pa.x - seed_px.x) + (pa.y - seed_px.y) * (pa.y - seed_px.y);
      const int db = (pb.x - seed_px.x) * (pb.x - seed_px.x) + (pb.y - seed_px.y) * (pb.y - seed_px.y);
      return da < db;
    });
    const std::size_t n = std::min(own.size(), static_cast<std::size_t>(spec.gap_length));
    for (std::size_t j = 0; j < n; ++j) strength[own[j]] = uniform(rng, spec.texture_strength);
  }
  scene.strength = quantized(strength);

  scene.pixel_labels = PixelLabelMap(dims);
  scene.image_label.presence.assign(static_cast<std::size_t>(spec.num_classes), 0);
  for (std::size_t i = 0; i < dims.pixel_count(); ++i) {
    if (inst[i] == 0) continue;
    const int c = scene.objects[inst[i] - 1u].class_id;
    scene.pixel_labels[i] = static_cast<std::uint8_t>(c);
    scene.image_label.presence[static_cast<std::size_t>(c - 1)] = 1;
  }
  for (const auto& obj : scene.objects) scene.boxes.push_back(obj.box);
  return scene;
}

Sample scene_to_sample(Scene scene, std::string id) {
  Sample s;
  s.id = std::move(id);
  s.image = std::move(scene.image);
  s.pixel_labels = std::move(scene.pixel_labels);
  s.boxes = std::move(scene.boxes);
  s.image_label = std::move(scene.image_label);
  s.strength = std::move(scene.strength);
  return s;
}

namespace {

std::string sample_id(const char* split, int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s_%05d", split, index);
  return buf;
}

}  // namespace

Dataset gen_dataset_in_memory(const SceneSpec& spec, int n_train, int n_val, std::uint64_t seed) {
  spec.validate();
  if (n_train < 1 || n_val < 1) {
    throw std::invalid_argument("gen_dataset: train and validation counts must be >= 1");
  }
  Dataset ds;
  ds.num_object_classes = spec.num_classes;
  ds.dims = spec.dims;
  for (int k = 0; k < n_train + n_val; ++k) {
    std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(k)));
    Scene scene = gen_scene(spec, rng);
    if (k < n_train) {
      ds.train.push_back(scene_to_sample(std::move(scene), sample_id("train", k)));
    } else {
      ds.val.push_back(scene_to_sample(std::move(scene), sample_id("val", k - n_train)));
    }
  }
  return ds;
}

void gen_dataset(const SceneSpec& spec, int n_train, int n_val, std::uint64_t seed,
                 const std::filesystem::path& out_dir) {
  const Dataset ds = gen_dataset_in_memory(spec, n_train, n_val, seed);
  std::error_code ec;
  for (const char* sub : {"images", "labels", "strength"}) {
    std::filesystem::create_directories(out_dir / sub, ec);
    if (ec) {
      throw std::runtime_error("gen_dataset: cannot create " + (out_dir / sub).string() + ": " +
                               ec.message());
    }
  }

  Manifest manifest;
  manifest.header.num_classes = spec.num_classes;
  manifest.header.dims = spec.dims;
  manifest.header.seed = seed;
  manifest.header.train_count = n_train;
  manifest.header.val_count = n_val;
  auto emit = [&](const Sample& s, const char* split) {
    ManifestRecord r;
    r.id = s.id;
    r.split = split;
    r.image = "images/" + s.id + ".ppm";
    r.labels = "labels/" + s.id + ".pgm";
    r.strength = "strength/" + s.id + ".pgm";
    r.image_label = s.image_label->presence;
    write_ppm(out_dir / r.image, s.image);
    write_label_map(out_dir / *r.labels, *s.pixel_labels);
    write_strength_map(out_dir / *r.strength, *s.strength);
    for (const auto& b : s.boxes) manifest.boxes.emplace_back(s.id, b);
    manifest.records.push_back(std::move(r));
  };
  for (const auto& s : ds.train) emit(s, "train");
  for (const auto& s : ds.val) emit(s, "val");
  write_manifest(out_dir, manifest);
}

}  // namespace dsup
