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

#include <gtest/gtest.h>

#include "ddap/errors.hpp"
#include "ddap/localization.hpp"
#include "test_util.hpp"

namespace ddap {
namespace {

using testing::interior_images;
using testing::small_model;

AttributionHeatmap random_heatmap(uint64_t seed) {
  auto gen = make_generator(seed);
  AttributionHeatmap hm;
  hm.values = normalize_heatmap(
      torch::rand({3, 64, 64}, gen, torch::dtype(torch::kDouble)));
  return hm;
}

TEST(Heatmap, NormalizationContract) {
  auto hm = random_heatmap(1);
  for (int i = 0; i < 3; ++i) {
    EXPECT_EQ(hm.values[i].min().item<double>(), 0.0);
    EXPECT_EQ(hm.values[i].max().item<double>(), 1.0);
  }
  auto flat = normalize_heatmap(torch::full({2, 8, 8}, 0.37, torch::kDouble));
  EXPECT_EQ(flat.abs().max().item<double>(), 0.0);
}

TEST(Binarize, ThresholdEdges) {
  auto hm = random_heatmap(2);
  EXPECT_TRUE(binarize(hm, 0.0).mask.all().item<bool>());
  EXPECT_FALSE(binarize(hm, 1.0 + 1e-9).mask.any().item<bool>());
}

TEST(Binarize, MatchesScalarLoop) {
  auto hm = random_heatmap(3);
  const double tau = 0.35;
  auto m = binarize(hm, tau).mask;
  auto v = hm.values.accessor<double, 3>();
  auto a = m.accessor<bool, 3>();
  int64_t mismatches = 0;
  for (int i = 0; i < 3; ++i) {
    for (int y = 0; y < 64; ++y) {
      for (int x = 0; x < 64; ++x) {
        mismatches += a[i][y][x] != (v[i][y][x] >= tau);
      }
    }
  }
  EXPECT_EQ(mismatches, 0);
}

TEST(Binarize, SupportShrinksAsTauGrows) {
  auto hm = random_heatmap(4);
  torch::Tensor prev = binarize(hm, 0.0).mask;
  for (double tau = 0.05; tau <= 1.0; tau += 0.05) {
    auto cur = binarize(hm, tau).mask;
    EXPECT_FALSE((cur & ~prev).any().item<bool>()) << "tau " << tau;
    prev = cur;
  }
}

class ApplyMaskTest : public ::testing::Test {
 protected:
  torch::Tensor x = interior_images(2, 7);
  torch::Tensor delta = 0.5 * torch::randn({2, 3, 64, 64}, torch::kDouble);
};

TEST_F(ApplyMaskTest, AllOnesAndAllZeros) {
  auto ones = BinaryMask::ones(2, 64, 64);
  EXPECT_TRUE(torch::equal(apply_mask(x, delta, ones), (x + delta).clamp(0, 1)));
  BinaryMask zeros{torch::zeros({2, 64, 64}, torch::kBool), 1.0};
  EXPECT_TRUE(torch::equal(apply_mask(x, delta, zeros), x));
}

TEST_F(ApplyMaskTest, ChangesOnlyInsideSupportAndIsIdempotent) {
  auto hm = random_heatmap(8);
  hm.values = hm.values.slice(0, 0, 2);
  auto mask = binarize(hm, 0.6);
  auto once = apply_mask(x, delta, mask);
  auto changed = (once != x).any(1);
  EXPECT_FALSE((changed & ~mask.mask).any().item<bool>());
  auto twice = restrict_to_mask(x, once, mask);
  EXPECT_TRUE(torch::equal(twice, once));
  EXPECT_TRUE(torch::equal(apply_mask(x, once - x, mask), once));
}

TEST_F(ApplyMaskTest, RejectsMismatchedMask) {
  auto mask = BinaryMask::ones(3, 64, 64);
  EXPECT_THROW(apply_mask(x, delta, mask), ArgumentError);
}

TEST(Attribution, NormalizedAndChecksTokenIndex) {
  auto model = small_model(5);
  auto prompt = model.prompt("a photo of sks subject");
  auto x = interior_images(2, 9);
  auto hm = attribution_map(model, x, prompt, prompt.identifier_position, 4);
  EXPECT_EQ(hm.values.sizes(), (std::vector<int64_t>{2, 64, 64}));
  EXPECT_EQ(hm.token, "sks");
  EXPECT_EQ(hm.inversion_steps, 4);
  EXPECT_EQ(hm.model_version, "vA");
  for (int i = 0; i < 2; ++i) {
    EXPECT_EQ(hm.values[i].min().item<double>(), 0.0);
    EXPECT_EQ(hm.values[i].max().item<double>(), 1.0);
  }
  EXPECT_THROW(attribution_map(model, x, prompt, 9, 4), ArgumentError);
  EXPECT_THROW(attribution_map(model, x, prompt, -1, 4), ArgumentError);
}

}  // namespace
}  // namespace ddap
