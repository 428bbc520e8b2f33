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
#include "ddap/fpl.hpp"
#include "ddap/spl.hpp"
#include "test_util.hpp"

namespace ddap {
namespace {

using testing::interior_images;
using testing::small_model;

FrequencyBlockSet blocks_of(const torch::Tensor& x) {
  return FrequencyBlockSet::from_image(x, 8);
}

TEST(WeightMatrix, RangeAndDcZero) {
  auto w = energy_weight_matrix(blocks_of(interior_images(2, 1)), 1.0, 1.0);
  EXPECT_EQ(w.sizes(), (std::vector<int64_t>{2, 3, 8, 8}));
  EXPECT_GE(w.min().item<double>(), 0.0);
  EXPECT_LE(w.max().item<double>(), 1.0 + 1e-12);
  auto per_map_max = w.amax({2, 3});
  EXPECT_TRUE(torch::allclose(per_map_max, torch::ones_like(per_map_max)));
  EXPECT_EQ(w.select(2, 0).select(2, 0).abs().max().item<double>(), 0.0);
}

TEST(WeightMatrix, BetaZeroIsRadialOnly) {
  auto w1 = energy_weight_matrix(blocks_of(interior_images(1, 2)), 1.0, 0.0);
  auto w2 = energy_weight_matrix(blocks_of(interior_images(1, 3)), 1.0, 0.0);
  EXPECT_TRUE(torch::equal(w1, w2));
  auto a = w1.accessor<double, 4>();
  for (int u = 0; u < 8; ++u) {
    for (int v = 0; v < 8; ++v) {
      EXPECT_NEAR(a[0][0][u][v], (u + v) / 14.0, 1e-12);
      // Radial factor never decreases with u + v.
      if (u + 1 < 8) EXPECT_GE(a[0][0][u + 1][v], a[0][0][u][v]);
    }
  }
}

TEST(WeightMatrix, LowPassImageWeightsHighFrequencies) {
  // Smooth ramp: energy concentrated at and near DC.
  auto ramp = torch::linspace(0.3, 0.7, 64, torch::kDouble);
  auto img = (ramp.view({1, 64}) + 0.0 * ramp.view({64, 1})).expand({3, 64, 64});
  auto w = energy_weight_matrix(blocks_of(img.unsqueeze(0).contiguous()), 1.0,
                                1.0)[0][0];
  double hi = 0, lo = 0;
  int nh = 0, nl = 0;
  for (int u = 0; u < 8; ++u) {
    for (int v = 0; v < 8; ++v) {
      if (u + v >= 8) {
        hi += w[u][v].item<double>();
        ++nh;
      } else {
        lo += w[u][v].item<double>();
        ++nl;
      }
    }
  }
  EXPECT_GT(hi / nh, lo / nl);
}

TEST(WeightMatrix, ZeroCoefficientsFallBackToRadial) {
  FrequencyBlockSet zero{torch::zeros({1, 3, 2, 2, 8, 8}, torch::kDouble), 8};
  auto w = energy_weight_matrix(zero, 1.0, 1.0);
  auto radial = energy_weight_matrix(zero, 1.0, 0.0);
  EXPECT_TRUE(torch::allclose(w, radial));
  EXPECT_NEAR(w[0][0][7][7].item<double>(), 1.0, 1e-12);
}

TEST(Adjust, IdentitiesAndProjection) {
  auto c = blocks_of(interior_images(1, 4)).coeffs;
  auto W = energy_weight_matrix({c, 8}, 1.0, 1.0);
  auto gen = make_generator(8);
  auto P = 5.0 * torch::randn(c.sizes(), gen, torch::dtype(torch::kDouble));
  EXPECT_TRUE(torch::equal(adjust(c, W, torch::zeros_like(P), 2.0), c));
  EXPECT_TRUE(torch::equal(adjust(c, torch::zeros_like(W), P, 2.0), c));
  auto d = adjust(c, W, P, 2.0) - c;
  auto norms = d.pow(2).sum({-2, -1}).sqrt();
  EXPECT_LE(norms.max().item<double>(), 2.0 + 1e-12);
  // Blocks already inside the ball are left alone.
  auto small = 1e-3 * P;
  EXPECT_TRUE(torch::allclose(adjust(c, W, small, 2.0) - c,
                              W.unsqueeze(2).unsqueeze(3) * small));
}

TEST(FplStep, SignArithmetic) {
  auto P = torch::randn({1, 3, 8, 8, 8, 8}, torch::kDouble);
  EXPECT_TRUE(torch::equal(fpl_step(P, torch::zeros_like(P), 0.1), P));
  auto g = torch::randn_like(P);
  g.view({-1}).slice(0, 0, 10).zero_();
  auto moved = (fpl_step(P, g, 0.1) - P).abs();
  auto ok = (moved - 0.1).abs() < 1e-12 | (moved == 0);
  EXPECT_TRUE(ok.all().item<bool>());
  EXPECT_EQ((moved == 0).sum().item<int64_t>(), 10);
}

TEST(FplLoss, PGradientMatchesFiniteDifferences) {
  auto model = small_model(2, torch::kDouble);
  auto x = interior_images(2, 5);
  auto cond = Conditioning::repeat(model.prompt("a photo of sks subject"), 2);
  auto gen = make_generator(6);
  auto draw = draw_noise(model.schedule(), {2, 4, 16, 16}, gen, torch::kDouble);
  FrequencyAttackConfig cfg;
  auto W = energy_weight_matrix(blocks_of(x), cfg.alpha, cfg.beta);
  auto P_ref = torch::randn({2, 3, 8, 8, 8, 8}, gen, torch::dtype(torch::kDouble));
  auto P = P_ref + 0.01 * torch::randn(P_ref.sizes(), gen,
                                       torch::dtype(torch::kDouble));
  auto f = [&](const torch::Tensor& p) {
    torch::NoGradGuard ng;
    return fpl_loss(model, x, x, W, p, P_ref, cond, draw, cfg, nullptr)
        .item<double>();
  };
  auto q = P.clone().requires_grad_(true);
  auto l = fpl_loss(model, x, x, W, q, P_ref, cond, draw, cfg, nullptr);
  auto g = torch::autograd::grad({l}, {q})[0];
  EXPECT_LE(testing::worst_fd_error(f, P, g, 12, 7), 1e-3);
}

class FplAttackTest : public ::testing::Test {
 protected:
  SurrogateState surrogate{small_model(3), 0};
  torch::Tensor x = interior_images(2, 9);
  Conditioning cond =
      Conditioning::repeat(surrogate.params.prompt("a photo of sks subject"), 2);
};

TEST_F(FplAttackTest, ZeroStepsReturnsClean) {
  FrequencyAttackConfig cfg;
  cfg.steps = 0;
  EXPECT_TRUE(torch::equal(fpl_attack(x, surrogate, cond, cfg, nullptr, 1), x));
}

TEST_F(FplAttackTest, BothConstraintsHold) {
  FrequencyAttackConfig cfg;
  cfg.steps = 4;
  auto adv = fpl_attack(x, surrogate, cond, cfg, nullptr, 1);
  EXPECT_LE((adv - x).abs().max().item<double>(), cfg.eta + 1e-8);
  EXPECT_GE(adv.min().item<double>(), 0.0);
  EXPECT_LE(adv.max().item<double>(), 1.0);
  auto dc = blocks_of(adv).coeffs - blocks_of(x).coeffs;
  EXPECT_LE(dc.pow(2).sum({-2, -1}).sqrt().max().item<double>(), cfg.eps_f);
  EXPECT_GT((adv - x).abs().max().item<double>(), 0.0);
}

TEST_F(FplAttackTest, EmptyMaskLeavesImageAlone) {
  FrequencyAttackConfig cfg;
  cfg.steps = 2;
  BinaryMask none{torch::zeros({2, 64, 64}, torch::kBool), 0.5};
  EXPECT_TRUE(torch::equal(fpl_attack(x, surrogate, cond, cfg, &none, 1), x));
}

TEST_F(FplAttackTest, PerturbationStaysInsideMask) {
  FrequencyAttackConfig cfg;
  cfg.steps = 2;
  auto m = torch::zeros({2, 64, 64}, torch::kBool);
  m.slice(1, 10, 40).slice(2, 5, 30).fill_(true);
  BinaryMask mask{m, 0.5};
  auto adv = fpl_attack(x, surrogate, cond, cfg, &mask, 1);
  auto changed = (adv != x).any(1);
  EXPECT_FALSE((changed & ~m).any().item<bool>());
  EXPECT_TRUE(changed.any().item<bool>());
}

TEST(FplConfig, Validation) {
  FrequencyAttackConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.lambda = 0;
  EXPECT_THROW(cfg.validate(), ArgumentError);
  cfg.lambda = 0.1;
  cfg.eps_f = -1;
  EXPECT_THROW(cfg.validate(), ArgumentError);
}

}  // namespace
}  // namespace ddap
