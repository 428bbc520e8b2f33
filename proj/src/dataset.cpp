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

#include "ddap/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "json.hpp"

#include "ddap/errors.hpp"
#include "ddap/image_io.hpp"
#include "ddap/rng.hpp"

namespace ddap {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr double kPi = 3.14159265358979323846;

std::array<double, 3> hsv_to_rgb(double h, double s, double v) {
  h = std::fmod(h, 1.0) * 6.0;
  const int i = static_cast<int>(std::floor(h)) % 6;
  const double f = h - std::floor(h);
  const double p = v * (1 - s), q = v * (1 - s * f), t = v * (1 - s * (1 - f));
  switch (i) {
    case 0: return {v, t, p};
    case 1: return {q, v, p};
    case 2: return {p, v, t};
    case 3: return {p, q, v};
    case 4: return {t, p, v};
    default: return {v, p, q};
  }
}

bool inside(SubjectShape shape, double dx, double dy, double r) {
  switch (shape) {
    case SubjectShape::kDisc:
      return dx * dx + dy * dy <= r * r;
    case SubjectShape::kSquare:
      return std::max(std::abs(dx), std::abs(dy)) <= 0.85 * r;
    case SubjectShape::kTriangle:
      return dy <= 0.8 * r && dy >= -r &&
             std::abs(dx) <= (dy + r) * 0.95 / 1.8;
    case SubjectShape::kDiamond:
      return std::abs(dx) + std::abs(dy) <= r;
    case SubjectShape::kRing: {
      const double d2 = dx * dx + dy * dy;
      return d2 <= r * r && d2 >= 0.25 * r * r;
    }
    case SubjectShape::kCross:
      return (std::abs(dx) <= 0.38 * r && std::abs(dy) <= r) ||
             (std::abs(dy) <= 0.38 * r && std::abs(dx) <= r);
  }
  return false;
}

SubjectShape shape_from_string(const std::string& s) {
  static const char* kNames[] = {"disc", "square", "triangle",
                                 "diamond", "ring", "cross"};
  for (int i = 0; i < 6; ++i) {
    if (s == kNames[i]) return static_cast<SubjectShape>(i);
  }
  throw IoError("unknown shape '" + s + "' in manifest");
}

json bbox_json(const BBox& b) { return json::array({b.x0, b.y0, b.x1, b.y1}); }

}  // namespace

Pose random_pose(const DatasetSpec& spec, const SubjectStyle& style,
                 std::mt19937_64& rng) {
  std::uniform_real_distribution<double> scale_d(0.9, 1.1);
  Pose p;
  p.scale = scale_d(rng);
  if (spec.placement == Placement::kLeftHalf) {
    // Keep the whole subject inside the left half.
    p.scale = std::min(p.scale, (spec.image_size / 4.0 - 1.0) / style.radius);
  }
  const double r = style.radius * p.scale;
  const double s = spec.image_size;
  const double lo = r + 1.0;
  const double hi_x = spec.placement == Placement::kLeftHalf
                          ? std::max(lo, s / 2.0 - r - 0.5)
                          : s - r - 1.0;
  std::uniform_real_distribution<double> x_d(lo, std::max(lo, hi_x));
  std::uniform_real_distribution<double> y_d(lo, std::max(lo, s - r - 1.0));
  p.cx = x_d(rng);
  p.cy = y_d(rng);
  return p;
}

const char* to_string(Split split) {
  return split == Split::kReference ? "reference" : "protect";
}

SubjectStyle subject_style(const DatasetSpec& spec, int subject) {
  std::mt19937_64 rng(mix_seed(spec.texture_seed, uint64_t(subject)));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  SubjectStyle st;
  st.shape = static_cast<SubjectShape>(subject % 6);
  const double hue = (subject + 0.35 * (subject / 6)) /
                     std::max(1, spec.n_subjects);
  st.rgb = hsv_to_rgb(hue, 0.8, 0.95);
  st.radius = 11.0 + 2.0 * (subject % 3);
  st.stripe_angle = (subject * 47 % 180) * kPi / 180.0 + 0.2 * u(rng);
  st.stripe_period = 6.0 + 4.0 * u(rng);
  return st;
}

torch::Tensor render_background(const DatasetSpec& spec,
                                uint64_t background_seed) {
  std::mt19937_64 rng(background_seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double var = std::clamp(spec.background_variation, 0.0, 1.0);
  auto color = [&]() {
    const double v = 0.45 + var * (u(rng) * 0.4 - 0.2);
    return hsv_to_rgb(u(rng), var * 0.3 * u(rng), v);
  };
  const auto c0 = color();
  const auto c1 = color();
  const double angle = u(rng) * 2.0 * kPi;
  const double ca = std::cos(angle), sa = std::sin(angle);
  const int s = spec.image_size;
  auto img = torch::empty({3, s, s}, torch::kDouble);
  auto a = img.accessor<double, 3>();
  for (int y = 0; y < s; ++y) {
    for (int x = 0; x < s; ++x) {
      const double proj = ((x - s / 2.0) * ca + (y - s / 2.0) * sa) / s + 0.5;
      const double w = std::clamp(proj, 0.0, 1.0);
      for (int c = 0; c < 3; ++c) a[c][y][x] = c0[c] * (1 - w) + c1[c] * w;
    }
  }
  return img;
}

RenderedImage render_subject(const DatasetSpec& spec, int subject,
                             const Pose& pose, uint64_t background_seed) {
  const auto style = subject_style(spec, subject);
  auto img = render_background(spec, background_seed);
  const int s = spec.image_size;
  auto mask = torch::zeros({s, s}, torch::kBool);
  auto a = img.accessor<double, 3>();
  auto m = mask.accessor<bool, 2>();
  std::mt19937_64 rng(mix_seed(background_seed, 0xB1));
  std::uniform_real_distribution<double> jitter(0.92, 1.08);
  const double brightness = jitter(rng);
  const double r = style.radius * pose.scale;
  const double ca = std::cos(style.stripe_angle);
  const double sa = std::sin(style.stripe_angle);
  BBox box{s, s, 0, 0};
  for (int y = 0; y < s; ++y) {
    for (int x = 0; x < s; ++x) {
      int hits = 0;
      for (int sy = 0; sy < 2; ++sy) {
        for (int sx = 0; sx < 2; ++sx) {
          const double dx = x + 0.25 + 0.5 * sx - pose.cx;
          const double dy = y + 0.25 + 0.5 * sy - pose.cy;
          hits += inside(style.shape, dx, dy, r) ? 1 : 0;
        }
      }
      if (hits == 0) continue;
      const double cover = hits / 4.0;
      const double phase = ((x - pose.cx) * ca + (y - pose.cy) * sa) /
                           style.stripe_period;
      const double tex = 1.0 + 0.12 * std::sin(2.0 * kPi * phase);
      for (int c = 0; c < 3; ++c) {
        const double fg = std::clamp(style.rgb[c] * tex * brightness, 0.0, 1.0);
        a[c][y][x] = cover * fg + (1.0 - cover) * a[c][y][x];
      }
      if (hits >= 2) {
        m[y][x] = true;
        box.x0 = std::min(box.x0, x);
        box.y0 = std::min(box.y0, y);
        box.x1 = std::max(box.x1, x + 1);
        box.y1 = std::max(box.y1, y + 1);
      }
    }
  }
  if (box.empty()) box = BBox{};
  return {quantize_8bit(img), mask, box};
}

Dataset generate_dataset(const DatasetSpec& spec, uint64_t seed) {
  if (spec.n_subjects < 1 || spec.images_per_subject < 1 ||
      spec.reference_per_subject < 0 ||
      spec.reference_per_subject > spec.images_per_subject) {
    throw ArgumentError("invalid dataset spec counts");
  }
  if (spec.image_size < 16 || spec.image_size % 8 != 0) {
    throw ArgumentError("image_size must be a multiple of 8 and >= 16");
  }
  Dataset ds;
  ds.spec = spec;
  ds.seed = seed;
  for (int k = 0; k < spec.n_subjects; ++k) {
    const auto style = subject_style(spec, k);
    for (int i = 0; i < spec.images_per_subject; ++i) {
      std::mt19937_64 rng(mix_seed(seed, uint64_t(k), uint64_t(i)));
      const Pose pose = random_pose(spec, style, rng);
      auto rendered = render_subject(spec, k, pose, rng());
      if (rendered.bbox.empty()) {
        throw StateError("generator produced an empty subject region");
      }
      Sample smp;
      smp.subject = k;
      smp.index = i;
      smp.split = i < spec.reference_per_subject ? Split::kReference
                                                  : Split::kProtect;
      char name[64];
      std::snprintf(name, sizeof(name), "subject_%02d/img_%02d.png", k, i);
      smp.file = name;
      std::snprintf(name, sizeof(name), "subject_%02d/mask_%02d.png", k, i);
      smp.mask_file = name;
      smp.bbox = rendered.bbox;
      smp.image = rendered.image;
      smp.mask = rendered.mask;
      ds.samples.push_back(std::move(smp));
    }
  }
  return ds;
}

torch::Tensor Dataset::images(int subject, std::optional<Split> split) const {
  std::vector<torch::Tensor> out;
  for (const auto& s : samples) {
    if (s.subject == subject && (!split || s.split == *split)) {
      out.push_back(s.image);
    }
  }
  if (out.empty()) throw ArgumentError("no images for requested subject/split");
  return torch::stack(out);
}

torch::Tensor Dataset::masks(int subject, std::optional<Split> split) const {
  std::vector<torch::Tensor> out;
  for (const auto& s : samples) {
    if (s.subject == subject && (!split || s.split == *split)) {
      out.push_back(s.mask);
    }
  }
  if (out.empty()) throw ArgumentError("no masks for requested subject/split");
  return torch::stack(out);
}

torch::Tensor Dataset::all_images() const {
  std::vector<torch::Tensor> out;
  for (const auto& s : samples) out.push_back(s.image);
  return torch::stack(out);
}

std::vector<int> Dataset::all_subjects() const {
  std::vector<int> out;
  for (const auto& s : samples) out.push_back(s.subject);
  return out;
}

void write_dataset(const Dataset& dataset, const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create '" + dir + "': " + ec.message());
  json manifest;
  manifest["seed"] = dataset.seed;
  const auto& sp = dataset.spec;
  manifest["spec"] = {{"n_subjects", sp.n_subjects},
                      {"images_per_subject", sp.images_per_subject},
                      {"reference_per_subject", sp.reference_per_subject},
                      {"image_size", sp.image_size},
                      {"background_variation", sp.background_variation},
                      {"texture_seed", sp.texture_seed},
                      {"placement", sp.placement == Placement::kLeftHalf
                                        ? "left_half"
                                        : "anywhere"}};
  static const char* kShapes[] = {"disc", "square", "triangle",
                                  "diamond", "ring", "cross"};
  json subjects = json::array();
  for (int k = 0; k < sp.n_subjects; ++k) {
    const auto st = subject_style(sp, k);
    subjects.push_back({{"subject", k},
                        {"shape", kShapes[int(st.shape)]},
                        {"rgb", st.rgb},
                        {"radius", st.radius}});
  }
  manifest["subjects"] = subjects;
  json images = json::array();
  for (const auto& s : dataset.samples) {
    fs::create_directories(fs::path(dir) / fs::path(s.file).parent_path(), ec);
    if (ec) throw IoError("cannot create subject folder under '" + dir + "'");
    write_png((fs::path(dir) / s.file).string(), s.image);
    write_png((fs::path(dir) / s.mask_file).string(), s.mask.to(torch::kDouble));
    images.push_back({{"subject", s.subject},
                      {"index", s.index},
                      {"split", to_string(s.split)},
                      {"file", s.file},
                      {"mask_file", s.mask_file},
                      {"bbox", bbox_json(s.bbox)}});
  }
  manifest["images"] = images;
  std::ofstream out(fs::path(dir) / "manifest.json");
  if (!out) throw IoError("cannot write manifest in '" + dir + "'");
  out << manifest.dump(2) << "\n";
}

Dataset load_dataset(const std::string& dir) {
  std::ifstream in(fs::path(dir) / "manifest.json");
  if (!in) throw IoError("no manifest.json in '" + dir + "'");
  json manifest;
  try {
    in >> manifest;
  } catch (const json::exception& e) {
    throw IoError("malformed manifest in '" + dir + "': " + e.what());
  }
  Dataset ds;
  ds.seed = manifest.at("seed").get<uint64_t>();
  const auto& sp = manifest.at("spec");
  ds.spec.n_subjects = sp.at("n_subjects");
  ds.spec.images_per_subject = sp.at("images_per_subject");
  ds.spec.reference_per_subject = sp.at("reference_per_subject");
  ds.spec.image_size = sp.at("image_size");
  ds.spec.background_variation = sp.at("background_variation");
  ds.spec.texture_seed = sp.at("texture_seed");
  ds.spec.placement = sp.at("placement") == "left_half" ? Placement::kLeftHalf
                                                        : Placement::kAnywhere;
  for (const auto& s : manifest.at("subjects")) {
    shape_from_string(s.at("shape"));
  }
  for (const auto& e : manifest.at("images")) {
    Sample s;
    s.subject = e.at("subject");
    s.index = e.at("index");
    s.split = e.at("split") == "reference" ? Split::kReference : Split::kProtect;
    s.file = e.at("file");
    s.mask_file = e.at("mask_file");
    const auto b = e.at("bbox");
    s.bbox = BBox{b[0], b[1], b[2], b[3]};
    s.image = read_png((fs::path(dir) / s.file).string());
    s.mask = read_png((fs::path(dir) / s.mask_file).string())[0] > 0.5;
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

torch::Tensor load_image_folder(const std::string& dir) {
  if (!fs::is_directory(dir)) throw IoError("'" + dir + "' is not a folder");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.path().extension() == ".png") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw IoError("no PNG images in '" + dir + "'");
  std::vector<torch::Tensor> images;
  for (const auto& f : files) images.push_back(read_png(f.string()));
  return torch::stack(images);
}

void write_image_folder(const torch::Tensor& images, const std::string& dir,
                        const std::string& prefix) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create '" + dir + "': " + ec.message());
  for (int64_t i = 0; i < images.size(0); ++i) {
    char name[64];
    std::snprintf(name, sizeof(name), "%s_%02lld.png", prefix.c_str(),
                  static_cast<long long>(i));
    write_png((fs::path(dir) / name).string(), images[i]);
  }
}

}  // namespace ddap
