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

#include "ddap/ddpl.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ddap/checkpoint.hpp"
#include "ddap/errors.hpp"
#include "ddap/rng.hpp"

namespace ddap {

namespace {

// Stream labels for mix_seed.
constexpr uint64_t kMaskStream = 101;
constexpr uint64_t kStartStream = 102;
constexpr uint64_t kSurrogateStream = 103;
constexpr uint64_t kRealStream = 104;
constexpr uint64_t kRoundStream = 105;

double mean(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / double(v.size());
}

torch::Tensor encode_nograd(const TinyLdm& model, const torch::Tensor& x) {
  torch::NoGradGuard no_grad;
  return model.encode(x);
}

void save_failure(const DDPLConfig& cfg, const PerturbState& state, int epoch,
                  const std::string& what) {
  if (cfg.failure_path.empty() || !state.x_adv.defined()) return;
  TensorArchive archive;
  archive.metadata["kind"] = "aspl_partial";
  archive.metadata["epoch"] = epoch;
  archive.metadata["error"] = what;
  archive.tensors.emplace_back("x_clean", state.x_clean);
  archive.tensors.emplace_back("x_adv", state.x_adv);
  try {
    save_archive(archive, cfg.failure_path);
  } catch (const std::exception&) {
    // The original error is the one worth reporting.
  }
}

}  // namespace

const char* to_string(AttackMode mode) {
  switch (mode) {
    case AttackMode::kSpl: return "spl";
    case AttackMode::kFpl: return "fpl";
    case AttackMode::kDdap: return "ddap";
  }
  return "?";
}

AttackMode parse_attack_mode(const std::string& text) {
  if (text == "spl") return AttackMode::kSpl;
  if (text == "fpl") return AttackMode::kFpl;
  if (text == "ddap") return AttackMode::kDdap;
  throw ArgumentError("unknown attack mode '" + text +
                      "' (expected spl, fpl or ddap)");
}

const char* to_string(Stage stage) {
  return stage == Stage::kFrequency ? "fpl" : "spl";
}

SpatialAttackConfig DDPLConfig::spatial() const {
  SpatialAttackConfig c;
  c.xi = xi;
  c.gamma = gamma_l;
  c.eta = eta;
  c.steps = perturb_steps;
  return c;
}

FrequencyAttackConfig DDPLConfig::frequency() const {
  FrequencyAttackConfig c;
  c.lambda = gamma_f;
  c.eps_f = eps_f;
  c.eta = eta;
  c.block_size = block_size;
  c.steps = perturb_steps;
  c.alpha = weight_alpha;
  c.beta = weight_beta;
  return c;
}

void DDPLConfig::validate() const {
  if (epochs < 0 || surrogate_steps < 0 || perturb_steps < 0 ||
      mask_refresh_epochs < 0 || mask_finetune_steps < 0) {
    throw ArgumentError("step and epoch counts must be >= 0");
  }
  if (gamma_f < 0) throw ArgumentError("gamma_f must be >= 0");
  spatial().validate();
  if (gamma_f > 0) frequency().validate();
  if (tau < 0) throw ArgumentError("tau must be >= 0");
  if (use_mask && mask_inversion_steps < 1) {
    throw ArgumentError("mask inversion needs at least one DDIM step");
  }
}

PerturbState PerturbState::start(const torch::Tensor& x_clean,
                                 const TinyLdm& model, const DDPLConfig& cfg,
                                 uint64_t seed) {
  PerturbState s;
  s.x_clean = x_clean.to(torch::kDouble);
  s.x_adv = s.x_clean.clone();
  s.z0_clean = encode_nograd(model, s.x_clean);
  auto gen = make_generator(seed);
  s.frequency = FrequencyPerturbation::sample(
      FrequencyBlockSet::from_image(s.x_clean, cfg.block_size).coeffs.sizes(),
      gen);
  return s;
}

NoiseDraw round_draw(const TinyLdm& model, torch::IntArrayRef latent_shape,
                     uint64_t seed, int round_index, Stage stage) {
  auto gen = make_generator(
      mix_seed(seed, uint64_t(round_index), uint64_t(stage) + 1));
  return draw_noise(model.schedule(), latent_shape, gen);
}

RoundLosses ddpl_perturb_round(PerturbState& state, const TinyLdm& surrogate,
                               const Conditioning& cond, const DDPLConfig& cfg,
                               int round_index, uint64_t seed,
                               const StepObserver& observer, int epoch) {
  const bool swap = cfg.order_swap && round_index % 2 != 0;
  const Stage order[2] = {swap ? Stage::kSpatial : Stage::kFrequency,
                          swap ? Stage::kFrequency : Stage::kSpatial};
  const BinaryMask* mask = state.mask ? &*state.mask : nullptr;
  RoundLosses losses;
  for (Stage stage : order) {
    double loss = 0.0;
    if (stage == Stage::kFrequency) {
      if (cfg.mode == AttackMode::kSpl || cfg.gamma_f == 0.0) continue;
      auto draw = round_draw(surrogate, state.z0_clean.sizes(), seed,
                             round_index, stage);
      state.x_adv = fpl_update(surrogate, state.x_adv, state.x_clean, cond,
                               draw, state.frequency, cfg.frequency(), mask,
                               &loss);
      losses.frequency = loss;
    } else {
      if (cfg.mode == AttackMode::kFpl) continue;
      auto draw = round_draw(surrogate, state.z0_clean.sizes(), seed,
                             round_index, stage);
      state.x_adv = spl_update(surrogate, state.x_adv, state.x_clean,
                               state.z0_clean, cond, draw, cfg.spatial(), mask,
                               &loss);
      losses.spatial = loss;
    }
    if (observer) {
      StepEvent ev;
      ev.epoch = epoch;
      ev.round = round_index;
      ev.stage = stage;
      ev.loss = loss;
      ev.state = &state;
      ev.surrogate = &surrogate;
      observer(ev);
    }
  }
  return losses;
}

nlohmann::json to_json(const EpochRecord& record) {
  return {{"epoch", record.epoch},
          {"surrogate_loss", record.surrogate_loss},
          {"attacked_loss", record.attacked_loss},
          {"budget_max", record.budget_max}};
}

std::pair<AttributionHeatmap, BinaryMask> compute_mask(
    const TinyLdm& model, const torch::Tensor& x_clean, const DDPLConfig& cfg,
    uint64_t seed) {
  auto throwaway = model.clone();
  auto latents = encode_nograd(throwaway, x_clean);
  finetune_latents(throwaway, latents, cfg.finetune, cfg.mask_finetune_steps,
                   seed);
  auto prompt = throwaway.prompt(cfg.finetune.prompt);
  auto heatmap = attribution_map(throwaway, x_clean, prompt,
                                 prompt.identifier_position,
                                 cfg.mask_inversion_steps);
  auto mask = binarize(heatmap, cfg.tau);
  return {std::move(heatmap), std::move(mask)};
}

AsplResult run_aspl(const torch::Tensor& x_clean, const TinyLdm& base,
                    const DDPLConfig& cfg, const StepObserver& observer,
                    const ProgressSink& progress) {
  cfg.validate();
  cfg.finetune.validate(base.vocab());
  if (x_clean.dim() != 4 || x_clean.size(0) == 0) {
    throw ArgumentError("run_aspl needs a nonempty [N,3,S,S] image set");
  }
  AsplResult result;
  PerturbState state;
  int epoch = -1;
  try {
    auto real = base.clone();
    const auto cond =
        Conditioning::repeat(real.prompt(cfg.finetune.prompt), x_clean.size(0));
    state = PerturbState::start(x_clean, real, cfg,
                                mix_seed(cfg.seed, kStartStream));
    if (cfg.use_mask && cfg.epochs > 0) {
      auto [hm, mask] =
          compute_mask(real, state.x_clean, cfg, mix_seed(cfg.seed, kMaskStream));
      result.heatmap = std::move(hm);
      state.mask = mask;
      result.mask = std::move(mask);
    }

    StepObserver wrapped;
    if (observer) {
      wrapped = [&](const StepEvent& ev) {
        StepEvent copy = ev;
        copy.real = &real;
        observer(copy);
      };
    }

    for (epoch = 0; epoch < cfg.epochs; ++epoch) {
      const auto e = uint64_t(epoch);
      // Surrogate: a fresh copy of the real model, fine-tuned on clean data.
      auto surrogate = clone_model(real);
      auto stats = finetune_latents(surrogate.params, state.z0_clean,
                                    cfg.finetune, cfg.surrogate_steps,
                                    mix_seed(cfg.seed, kSurrogateStream, e));
      surrogate.steps_applied += cfg.surrogate_steps;

      if (cfg.use_mask && cfg.mask_refresh_epochs > 0 && epoch > 0 &&
          epoch % cfg.mask_refresh_epochs == 0) {
        auto [hm, mask] = compute_mask(surrogate.params, state.x_clean, cfg,
                                       mix_seed(cfg.seed, kMaskStream, e));
        state.mask = mask;
        // Earlier perturbation outside the new support is dropped.
        state.x_adv = restrict_to_mask(state.x_clean, state.x_adv, mask);
        result.heatmap = std::move(hm);
        result.mask = std::move(mask);
      }

      std::vector<double> attacked;
      const uint64_t round_seed = mix_seed(cfg.seed, kRoundStream, e);
      for (int r = 0; r < cfg.perturb_steps; ++r) {
        auto l = ddpl_perturb_round(state, surrogate.params, cond, cfg,
                                    epoch * cfg.perturb_steps + r, round_seed,
                                    wrapped, epoch);
        if (l.spatial) {
          attacked.push_back(*l.spatial);
        } else if (l.frequency) {
          attacked.push_back(*l.frequency);
        }
      }

      // Real model: fine-tuned on the current adversarial images.
      finetune_latents(real, encode_nograd(real, state.x_adv), cfg.finetune,
                       cfg.surrogate_steps, mix_seed(cfg.seed, kRealStream, e));

      EpochRecord rec;
      rec.epoch = epoch;
      rec.surrogate_loss = mean(stats.losses);
      rec.attacked_loss = mean(attacked);
      rec.budget_max = (state.x_adv - state.x_clean).abs().max().item<double>();
      result.progress.push_back(rec);
      if (progress) progress(rec);
    }
  } catch (const std::exception& e) {
    save_failure(cfg, state, epoch, e.what());
    throw;
  }
  result.protected_images =
      state.x_adv.defined() ? state.x_adv : x_clean.to(torch::kDouble);
  return result;
}

}  // namespace ddap
