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
#include <set>

#include <gtest/gtest.h>

#include "ddap/checkpoint.hpp"
#include "ddap/ddpl.hpp"
#include "ddap/errors.hpp"
#include "test_util.hpp"

namespace ddap {
namespace {

using testing::interior_images;
using testing::small_model;

DDPLConfig quick_config() {
  DDPLConfig cfg;
  cfg.epochs = 2;
  cfg.surrogate_steps = 1;
  cfg.perturb_steps = 3;
  cfg.mask_finetune_steps = 2;
  cfg.mask_inversion_steps = 4;
  cfg.seed = 17;
  return cfg;
}

class DdplTest : public ::testing::Test {
 protected:
  TinyLdm model = small_model(21);
  torch::Tensor x = torch::round(interior_images(2, 22) * 255) / 255;
  Conditioning cond =
      Conditioning::repeat(model.prompt("a photo of sks subject"), 2);
};

TEST_F(DdplTest, ZeroEpochsReturnsCleanSet) {
  auto cfg = quick_config();
  cfg.epochs = 0;
  auto r = run_aspl(x, model, cfg);
  EXPECT_TRUE(torch::equal(r.protected_images, x));
  EXPECT_TRUE(r.progress.empty());
}

TEST_F(DdplTest, InvariantsHoldAfterEverySubUpdate) {
  auto cfg = quick_config();
  cfg.tau = 0.5;
  int events = 0;
  std::set<int> rounds;
  auto observer = [&](const StepEvent& ev) {
    ++events;
    rounds.insert(ev.round);
    const auto& s = *ev.state;
    auto d = s.x_adv - s.x_clean;
    ASSERT_LE(d.abs().max().item<double>(), cfg.eta + 1e-8);
    ASSERT_GE(s.x_adv.min().item<double>(), 0.0);
    ASSERT_LE(s.x_adv.max().item<double>(), 1.0);
    auto dc = FrequencyBlockSet::from_image(s.x_adv, 8).coeffs -
              FrequencyBlockSet::from_image(s.x_clean, 8).coeffs;
    ASSERT_LE(dc.pow(2).sum({-2, -1}).sqrt().max().item<double>(), cfg.eps_f);
    ASSERT_TRUE(s.mask.has_value());
    ASSERT_FALSE(((d != 0).any(1) & ~s.mask->mask).any().item<bool>());
    // The surrogate is never the real model and shares no storage with it.
    ASSERT_NE(ev.surrogate, ev.real);
    ASSERT_NE(ev.real, nullptr);
    auto a = ev.surrogate->named_tensors();
    auto b = ev.real->named_tensors();
    for (size_t i = 0; i < a.size(); ++i) {
      ASSERT_NE(a[i].second.data_ptr(), b[i].second.data_ptr());
    }
  };
  std::vector<EpochRecord> records;
  auto r = run_aspl(x, model, cfg, observer,
                    [&](const EpochRecord& rec) { records.push_back(rec); });
  EXPECT_EQ(events, cfg.epochs * cfg.perturb_steps * 2);
  EXPECT_EQ(rounds.size(), size_t(cfg.epochs * cfg.perturb_steps));
  ASSERT_EQ(records.size(), 2u);
  EXPECT_EQ(records[1].epoch, 1);
  EXPECT_LE(records[1].budget_max, cfg.eta + 1e-8);
  auto j = to_json(records[0]);
  for (const char* key : {"epoch", "surrogate_loss", "attacked_loss", "budget_max"}) {
    EXPECT_TRUE(j.contains(key)) << key;
  }
  ASSERT_TRUE(r.mask.has_value());
  EXPECT_EQ(r.mask->tau, 0.5);
}

TEST_F(DdplTest, DeterministicUnderSeed) {
  auto cfg = quick_config();
  auto a = run_aspl(x, model, cfg);
  auto b = run_aspl(x, model, cfg);
  EXPECT_TRUE(torch::equal(a.protected_images, b.protected_images));
  cfg.seed += 1;
  auto c = run_aspl(x, model, cfg);
  EXPECT_FALSE(torch::equal(a.protected_images, c.protected_images));
}

TEST_F(DdplTest, BaseModelIsNotModified) {
  auto h = model.param_hash();
  run_aspl(x, model, quick_config());
  EXPECT_EQ(model.param_hash(), h);
}

TEST_F(DdplTest, GammaFZeroIsASpatialStep) {
  auto cfg = quick_config();
  cfg.gamma_f = 0.0;
  for (int round : {0, 1}) {
    auto state = PerturbState::start(x, model, cfg, 3);
    state.x_adv = x + 0.01 * torch::sign(torch::randn_like(x));
    auto before = state.x_adv.clone();
    ddpl_perturb_round(state, model, cond, cfg, round, 99);
    auto draw = round_draw(model, state.z0_clean.sizes(), 99, round,
                           Stage::kSpatial);
    auto g = spl_gradient(model, before, state.z0_clean, cond, draw, cfg.xi);
    auto want = spl_step(before, x, g.grad, cfg.spatial());
    EXPECT_TRUE(torch::equal(state.x_adv, want)) << "round " << round;
  }
}

TEST_F(DdplTest, ParityFlipsOrder) {
  auto cfg = quick_config();
  std::vector<Stage> seen;
  auto obs = [&](const StepEvent& ev) { seen.push_back(ev.stage); };
  auto s0 = PerturbState::start(x, model, cfg, 3);
  auto s1 = PerturbState::start(x, model, cfg, 3);
  ddpl_perturb_round(s0, model, cond, cfg, 0, 5, obs);
  ddpl_perturb_round(s1, model, cond, cfg, 1, 5, obs);
  EXPECT_EQ(seen, (std::vector<Stage>{Stage::kFrequency, Stage::kSpatial,
                                      Stage::kSpatial, Stage::kFrequency}));
  cfg.order_swap = false;
  seen.clear();
  auto s2 = PerturbState::start(x, model, cfg, 3);
  ddpl_perturb_round(s2, model, cond, cfg, 1, 5, obs);
  EXPECT_EQ(seen, (std::vector<Stage>{Stage::kFrequency, Stage::kSpatial}));
}

TEST_F(DdplTest, AblationModesRunOneDomain) {
  for (auto mode : {AttackMode::kSpl, AttackMode::kFpl}) {
    auto cfg = quick_config();
    cfg.mode = mode;
    cfg.use_mask = false;
    std::set<Stage> stages;
    run_aspl(x, model, cfg, [&](const StepEvent& ev) { stages.insert(ev.stage); });
    ASSERT_EQ(stages.size(), 1u);
    EXPECT_EQ(*stages.begin(),
              mode == AttackMode::kSpl ? Stage::kSpatial : Stage::kFrequency);
  }
  EXPECT_EQ(parse_attack_mode("ddap"), AttackMode::kDdap);
  EXPECT_THROW(parse_attack_mode("dual"), ArgumentError);
}

TEST_F(DdplTest, AbortSavesPartialState) {
  auto cfg = quick_config();
  cfg.use_mask = false;
  const auto path = (std::filesystem::temp_directory_path() /
                     ("ddap_partial_" + std::to_string(::getpid()) + ".ckpt"))
                        .string();
  cfg.failure_path = path;
  auto bad = x.clone();
  bad[0][0][3][3] = std::nan("");
  EXPECT_THROW(run_aspl(bad, model, cfg), NumericError);
  auto archive = load_archive(path);
  EXPECT_EQ(archive.metadata["kind"], "aspl_partial");
  EXPECT_EQ(archive.at("x_adv").sizes(), x.sizes());
  std::filesystem::remove(path);
}

TEST(DdplConfig, Validation) {
  DDPLConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.epochs = -1;
  EXPECT_THROW(cfg.validate(), ArgumentError);
  cfg = DDPLConfig{};
  cfg.gamma_l = 0;
  EXPECT_THROW(cfg.validate(), ArgumentError);
  cfg = DDPLConfig{};
  cfg.gamma_f = 0;
  EXPECT_NO_THROW(cfg.validate());
}

}  // namespace
}  // namespace ddap
