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

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "json.hpp"
#include "ddap/fpl.hpp"
#include "ddap/localization.hpp"
#include "ddap/personalization.hpp"
#include "ddap/spl.hpp"

namespace ddap {

// Which sub-updates a perturbation round runs: the two single-domain
// ablations or both.
enum class AttackMode { kSpl, kFpl, kDdap };
const char* to_string(AttackMode mode);
AttackMode parse_attack_mode(const std::string& text);

struct DDPLConfig {
  int epochs = 50;
  int surrogate_steps = 3;
  int perturb_steps = 9;
  // Frequency step: 0.1 on the 0..255 intensity scale of the DCT
  // coefficients, expressed here for images in [0,1].
  double gamma_f = 0.1 / 255.0;
  double gamma_l = 0.005;
  double eta = 12.0 / 255.0;
  double xi = 1.0;
  double eps_f = 2.0;
  int block_size = 8;
  double weight_alpha = 1.0;
  double weight_beta = 1.0;
  bool order_swap = true;
  int mask_refresh_epochs = 0;  // 0 = compute the mask once
  AttackMode mode = AttackMode::kDdap;
  bool use_mask = true;
  double tau = 0.35;
  int mask_finetune_steps = 15;
  int mask_inversion_steps = 10;
  uint64_t seed = 0;
  FinetuneConfig finetune;
  // When set, the adversarial state is saved here before an abort is
  // re-raised.
  std::string failure_path;

  SpatialAttackConfig spatial() const;
  FrequencyAttackConfig frequency() const;
  void validate() const;
};

// Adversarial state of one image batch while it is being protected.
struct PerturbState {
  torch::Tensor x_clean;   // float64 [N,3,S,S]
  torch::Tensor x_adv;     // float64 [N,3,S,S]
  torch::Tensor z0_clean;  // clean latents, cached once
  FrequencyPerturbation frequency;
  std::optional<BinaryMask> mask;

  // x_adv = x_clean, P ~ N(0,1) from the seed.
  static PerturbState start(const torch::Tensor& x_clean, const TinyLdm& model,
                            const DDPLConfig& cfg, uint64_t seed);
};

enum class Stage { kFrequency, kSpatial };
const char* to_string(Stage stage);

// Fired after every sub-update, with the state already updated.
struct StepEvent {
  int epoch = 0;
  int round = 0;
  Stage stage = Stage::kSpatial;
  double loss = 0.0;
  const PerturbState* state = nullptr;
  const TinyLdm* surrogate = nullptr;
  // The model updated on adversarial images; null outside run_aspl.
  const TinyLdm* real = nullptr;
};
using StepObserver = std::function<void(const StepEvent&)>;

// The (t, eps) draw used by one sub-update of one round. Each stage has its
// own stream, so skipping a stage does not shift the other's draws.
NoiseDraw round_draw(const TinyLdm& model, torch::IntArrayRef latent_shape,
                     uint64_t seed, int round_index, Stage stage);

struct RoundLosses {
  std::optional<double> frequency;
  std::optional<double> spatial;
};

// One perturbation iteration: FPL then SPL for even round_index, SPL then
// FPL for odd (when order_swap is on). FPL is skipped when gamma_f == 0 or
// in SPL-only mode; SPL is skipped in FPL-only mode.
RoundLosses ddpl_perturb_round(PerturbState& state, const TinyLdm& surrogate,
                               const Conditioning& cond, const DDPLConfig& cfg,
                               int round_index, uint64_t seed,
                               const StepObserver& observer = {},
                               int epoch = 0);

struct EpochRecord {
  int epoch = 0;
  double surrogate_loss = 0.0;  // mean fine-tune loss of the surrogate
  double attacked_loss = 0.0;   // mean attacked loss over the rounds
  double budget_max = 0.0;      // max |x_adv - x_clean| after the epoch
};
nlohmann::json to_json(const EpochRecord& record);
using ProgressSink = std::function<void(const EpochRecord&)>;

struct AsplResult {
  torch::Tensor protected_images;  // float64, not yet quantized
  std::optional<AttributionHeatmap> heatmap;
  std::optional<BinaryMask> mask;
  std::vector<EpochRecord> progress;
};

// Builds the attack mask: fine-tune a throwaway copy on the clean set, then
// attribute the identifier token by DDIM inversion.
std::pair<AttributionHeatmap, BinaryMask> compute_mask(
    const TinyLdm& model, const torch::Tensor& x_clean, const DDPLConfig& cfg,
    uint64_t seed);

// Alternates surrogate fine-tuning and perturbation learning. The caller's
// model is not modified; the "real" model of the alternation is a private
// clone.
AsplResult run_aspl(const torch::Tensor& x_clean, const TinyLdm& base,
                    const DDPLConfig& cfg, const StepObserver& observer = {},
                    const ProgressSink& progress = {});

}  // namespace ddap
