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

#include <torch/torch.h>

#include "ddap/diffusion.hpp"
#include "ddap/localization.hpp"
#include "ddap/personalization.hpp"

namespace ddap {

struct SpatialAttackConfig {
  double xi = 1.0;             // weight of the latent term
  double gamma = 0.005;        // sign step
  double eta = 12.0 / 255.0;   // l-inf budget around the clean image
  int steps = 9;

  void validate() const;
};

// Clip to the l-inf ball of radius eta around x_clean, then to [0,1].
torch::Tensor project_linf(const torch::Tensor& x, const torch::Tensor& x_clean,
                           double eta);

// Mean squared distance between encode(x_adv) and the cached clean latent.
torch::Tensor latent_loss(const TinyLdm& model, const torch::Tensor& x_adv,
                          const torch::Tensor& z0_clean);

// cond_loss(encode(x_adv)) + xi * latent_loss.
torch::Tensor spl_loss(const TinyLdm& model, const torch::Tensor& x_adv,
                       const torch::Tensor& z0_clean, const Conditioning& cond,
                       const NoiseDraw& draw, double xi);
torch::Tensor spl_loss(const TinyLdm& model, const torch::Tensor& x_adv,
                       const torch::Tensor& z0_clean, const Conditioning& cond,
                       at::Generator& gen, double xi);

struct LossGradient {
  double loss = 0.0;
  torch::Tensor grad;  // same shape and dtype as the input it was taken at
};

// Value and input gradient of spl_loss at x_adv. Throws NumericError if
// either is non-finite.
LossGradient spl_gradient(const TinyLdm& model, const torch::Tensor& x_adv,
                          const torch::Tensor& z0_clean,
                          const Conditioning& cond, const NoiseDraw& draw,
                          double xi);

// project_linf(x_adv + gamma * sign(grad)). sign(0) = 0.
torch::Tensor spl_step(const torch::Tensor& x_adv, const torch::Tensor& x_clean,
                       const torch::Tensor& grad,
                       const SpatialAttackConfig& cfg);

// One masked SPL update with a fixed draw; the building block of the
// standalone attack and of the dual-domain round.
torch::Tensor spl_update(const TinyLdm& model, const torch::Tensor& x_adv,
                         const torch::Tensor& x_clean,
                         const torch::Tensor& z0_clean,
                         const Conditioning& cond, const NoiseDraw& draw,
                         const SpatialAttackConfig& cfg,
                         const BinaryMask* mask, double* loss = nullptr);

// cfg.steps masked sign-gradient steps starting from x_clean. Each step
// draws its own (t, eps) from a generator seeded with `seed`.
torch::Tensor spl_attack(const torch::Tensor& x_clean,
                         const SurrogateState& surrogate,
                         const Conditioning& cond,
                         const SpatialAttackConfig& cfg,
                         const BinaryMask* mask, uint64_t seed);

}  // namespace ddap
