// Copyright 2026 The DDAP Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <torch/torch.h>

namespace ddap {

enum class Placement { kAnywhere, kLeftHalf };

// Procedural stand-in for a face dataset: each subject is a textured sprite
// with its own shape, colour and stripe pattern, composited onto a random
// smooth background.
struct DatasetSpec {
  int n_subjects = 8;
  int images_per_subject = 8;
  int reference_per_subject = 4;  // the remainder forms the protect split
  int image_size = 64;
  double background_variation = 1.0;  // 0 = flat grey, 1 = full range
  uint64_t texture_seed = 7;
  Placement placement = Placement::kAnywhere;
};

enum class SubjectShape { kDisc, kSquare, kTriangle, kDiamond, kRing, kCross };

struct SubjectStyle {
  SubjectShape shape = SubjectShape::kDisc;
  std::array<double, 3> rgb{};
  double radius = 12.0;
  double stripe_angle = 0.0;   // radians
  double stripe_period = 8.0;  // pixels
};

SubjectStyle subject_style(const DatasetSpec& spec, int subject);

struct Pose {
  double cx = 32.0;
  double cy = 32.0;
  double scale = 1.0;
};

// Half-open pixel box [x0,x1) x [y0,y1).
struct BBox {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  int area() const { return (x1 - x0) * (y1 - y0); }
  bool empty() const { return x1 <= x0 || y1 <= y0; }
};

struct RenderedImage {
  torch::Tensor image;  // [3,S,S] float64 on the 8-bit grid
  torch::Tensor mask;   // [S,S] bool, true on subject pixels
  BBox bbox;
};

// Random centre and scale that keep the sprite inside the image (and inside
// the left half for Placement::kLeftHalf).
Pose random_pose(const DatasetSpec& spec, const SubjectStyle& style,
                 std::mt19937_64& rng);

RenderedImage render_subject(const DatasetSpec& spec, int subject,
                             const Pose& pose, uint64_t background_seed);
torch::Tensor render_background(const DatasetSpec& spec,
                                uint64_t background_seed);

enum class Split { kReference, kProtect };
const char* to_string(Split split);

struct Sample {
  int subject = 0;
  int index = 0;
  Split split = Split::kReference;
  std::string file;
  std::string mask_file;
  BBox bbox;
  torch::Tensor image;
  torch::Tensor mask;
};

struct Dataset {
  DatasetSpec spec;
  uint64_t seed = 0;
  std::vector<Sample> samples;

  // [N,3,S,S] float64 for one subject (all splits when split is empty).
  torch::Tensor images(int subject, std::optional<Split> split = {}) const;
  torch::Tensor masks(int subject, std::optional<Split> split = {}) const;
  torch::Tensor all_images() const;
  std::vector<int> all_subjects() const;
};

Dataset generate_dataset(const DatasetSpec& spec, uint64_t seed);

// Writes PNGs and manifest.json under dir (created if missing).
void write_dataset(const Dataset& dataset, const std::string& dir);
Dataset load_dataset(const std::string& dir);

// Loads every PNG in a folder, sorted by file name, as [N,3,S,S] float64.
torch::Tensor load_image_folder(const std::string& dir);
void write_image_folder(const torch::Tensor& images, const std::string& dir,
                        const std::string& prefix = "img");

}  // namespace ddap
