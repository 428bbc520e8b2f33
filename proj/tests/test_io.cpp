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

#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "ddap/checkpoint.hpp"
#include "ddap/config.hpp"
#include "ddap/dataset.hpp"
#include "ddap/errors.hpp"
#include "ddap/hash.hpp"
#include "ddap/image_io.hpp"
#include "test_util.hpp"

namespace ddap {
namespace {

namespace fs = std::filesystem;

class TempDir {
 public:
  TempDir() {
    path_ = fs::temp_directory_path() /
            ("ddap_test_" + std::to_string(::getpid()) + "_" +
             std::to_string(counter_++));
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  std::string operator/(const std::string& name) const {
    return (path_ / name).string();
  }
  std::string str() const { return path_.string(); }

 private:
  static inline int counter_ = 0;
  fs::path path_;
};

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

TEST(Hash, KnownVector) {
  EXPECT_EQ(sha256_hex("abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Dataset, CountsRegionsAndDeterminism) {
  DatasetSpec spec;
  auto a = generate_dataset(spec, 5);
  auto b = generate_dataset(spec, 5);
  ASSERT_EQ(a.samples.size(), size_t(spec.n_subjects * spec.images_per_subject));
  for (size_t i = 0; i < a.samples.size(); ++i) {
    EXPECT_TRUE(torch::equal(a.samples[i].image, b.samples[i].image));
    EXPECT_FALSE(a.samples[i].bbox.empty());
    EXPECT_GT(a.samples[i].mask.sum().item<int64_t>(), 0);
  }
  EXPECT_EQ(a.images(2).size(0), spec.images_per_subject);
  EXPECT_EQ(a.images(2, Split::kReference).size(0), spec.reference_per_subject);
  EXPECT_EQ(a.images(2, Split::kProtect).size(0),
            spec.images_per_subject - spec.reference_per_subject);
  // Images sit on the 8-bit grid.
  auto x = a.all_images();
  EXPECT_TRUE(torch::equal(quantize_8bit(x), x));
  EXPECT_FALSE(torch::equal(x, generate_dataset(spec, 6).all_images()));
}

TEST(Dataset, LeftHalfPlacement) {
  DatasetSpec spec;
  spec.placement = Placement::kLeftHalf;
  auto ds = generate_dataset(spec, 3);
  for (const auto& s : ds.samples) {
    EXPECT_LE(s.bbox.x1, spec.image_size / 2 + 1);
    EXPECT_FALSE(s.mask.slice(1, spec.image_size / 2 + 1).any().item<bool>());
  }
}

TEST(Dataset, WriteLoadRoundTrip) {
  TempDir dir;
  DatasetSpec spec;
  spec.n_subjects = 2;
  spec.images_per_subject = 3;
  spec.reference_per_subject = 1;
  auto ds = generate_dataset(spec, 8);
  write_dataset(ds, dir.str());
  TempDir dir2;
  write_dataset(generate_dataset(spec, 8), dir2.str());
  EXPECT_EQ(read_file(dir / "manifest.json"), read_file(dir2 / "manifest.json"));
  EXPECT_EQ(read_file(dir / "subject_01/img_02.png"),
            read_file(dir2 / "subject_01/img_02.png"));
  auto back = load_dataset(dir.str());
  ASSERT_EQ(back.samples.size(), ds.samples.size());
  for (size_t i = 0; i < ds.samples.size(); ++i) {
    EXPECT_TRUE(torch::equal(back.samples[i].image, ds.samples[i].image));
    EXPECT_TRUE(torch::equal(back.samples[i].mask, ds.samples[i].mask));
    EXPECT_EQ(back.samples[i].bbox.x0, ds.samples[i].bbox.x0);
    EXPECT_EQ(back.samples[i].split, ds.samples[i].split);
  }
}

TEST(Dataset, UnwritableDirectory) {
  DatasetSpec spec;
  spec.n_subjects = 1;
  spec.images_per_subject = 1;
  spec.reference_per_subject = 1;
  EXPECT_THROW(write_dataset(generate_dataset(spec, 1), "/proc/ddap/nope"),
               IoError);
  EXPECT_THROW(load_dataset("/nonexistent/ddap"), IoError);
}

TEST(Png, RoundTripIsExactOnGrid) {
  TempDir dir;
  auto x = quantize_8bit(testing::interior_images(3, 4));
  write_image_folder(x, dir.str());
  auto back = load_image_folder(dir.str());
  EXPECT_TRUE(torch::equal(back, x));
}

TEST(Checkpoint, ModelRoundTripIsBitExact) {
  TempDir dir;
  auto m = testing::small_model(9);
  m.set_latent_scale(0.731);
  save_model(m, dir / "m.ckpt");
  auto back = load_model(dir / "m.ckpt");
  EXPECT_EQ(back.param_hash(), m.param_hash());
  EXPECT_EQ(back.latent_scale(), m.latent_scale());
  EXPECT_EQ(back.config().version, "vA");
  EXPECT_EQ(back.config().width, 16);
  EXPECT_EQ(back.schedule().betas(), m.schedule().betas());
  EXPECT_EQ(back.vocab().tokens(), m.vocab().tokens());
  EXPECT_THROW(load_model(dir / "missing.ckpt"), IoError);
  {
    std::ofstream f(dir / "junk.ckpt");
    f << "not a checkpoint";
  }
  EXPECT_THROW(load_model(dir / "junk.ckpt"), IoError);
}

TEST(Config, CanonicalTextAndHash) {
  RunConfig a;
  RunConfig b = RunConfig::parse(a.canonical_text());
  EXPECT_EQ(a.canonical_text(), b.canonical_text());
  EXPECT_EQ(a.hash(), b.hash());
  // Key order and comments do not matter.
  auto c = RunConfig::parse("# run\nddpl.tau = 0.5\n\nseed = 3\n");
  auto d = RunConfig::parse("seed=3   \nddpl.tau = 0.5 # threshold\n");
  EXPECT_EQ(c.hash(), d.hash());
  EXPECT_NE(c.hash(), a.hash());
  EXPECT_EQ(c.ddpl.tau, 0.5);
  EXPECT_EQ(c.seed, 3u);
}

TEST(Config, KeysAndErrors) {
  RunConfig c;
  c.set("ddpl.attack", "fpl");
  EXPECT_EQ(c.ddpl.mode, AttackMode::kFpl);
  c.set("ddpl.mask", "off");
  EXPECT_FALSE(c.ddpl.use_mask);
  c.set("eval.subjects", "1, 5,6");
  EXPECT_EQ(c.subjects, (std::vector<int>{1, 5, 6}));
  c.set("finetune.prompt", "a photo of t@t subject");
  EXPECT_EQ(c.ddpl.finetune.prompt, "a photo of t@t subject");
  EXPECT_EQ(c.get("data.placement"), "anywhere");
  EXPECT_THROW(c.set("ddpl.epochz", "3"), ConfigError);
  EXPECT_THROW(c.set("ddpl.epochs", "three"), ConfigError);
  EXPECT_THROW(c.set("ddpl.attack", "both"), ConfigError);
  EXPECT_THROW(RunConfig::parse("seed 3"), ConfigError);
  for (const auto& key : RunConfig::keys()) {
    RunConfig r;
    EXPECT_NO_THROW(r.set(key, r.get(key))) << key;
  }
}

TEST(Config, SaveLoad) {
  TempDir dir;
  RunConfig c;
  c.set("ddpl.epochs", "7");
  c.save(dir / "run.cfg");
  EXPECT_EQ(RunConfig::load(dir / "run.cfg").hash(), c.hash());
  EXPECT_THROW(RunConfig::load(dir / "none.cfg"), IoError);
}

}  // namespace
}  // namespace ddap
