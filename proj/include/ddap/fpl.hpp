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

#include "ddap/dct.hpp"
#include "ddap/diffusion.hpp"
#include "ddap/localization.hpp"
#include "ddap/personalization.hpp"

namespace ddap {

struct FrequencyAttackConfig {
  double lambda = 0.1 / 255.0;  // sign step on P (0.1 intensity levels)
  double eps_f = 2.0;         // per-block, per-channel l2 budget on coefficients
  double eta = 12.0 / 255.0;  // spatial l-inf budget
  int block_size = 8;
  int steps = 9;
  double alpha = 1.0;  // radial exponent of the weight matrix
  double beta = 1.0;   // energy exponent of the weight matrix

  void validate() const;
};

// W [N,C,K,K] from block coefficients [N,C,nby,nbx,K,K]:
// normalize(r^alpha * (1 - E/E_max)^beta) with r = (u+v)/(2(K-1)) and E the
// squared coefficient averaged over blocks. Zero energy leaves the radial
// term alone.
torch::Tensor energy_weight_matrix(const FrequencyBlockSet& coeffs,
                                   double alpha, double beta);

// Scales each K x K block of delta onto the l2 ball of radius eps_f.
torch::Tensor project_block_l2(const torch::Tensor& delta, double eps_f);

// coeffs + project_block_l2(W * P). W is [N,C,K,K] and broadcast over blocks.
torch::Tensor adjust(const torch::Tensor& coeffs, const torch::Tensor& W,
                     const torch::Tensor& P, double eps_f);

// P + lambda * sign(grad).
torch::Tensor fpl_step(const torch::Tensor& P, const torch::Tensor& grad,
                       double lambda);

// The learned coefficient perturbation, shaped like the block coefficients.
struct FrequencyPerturbation {
  torch::Tensor P;

  static FrequencyPerturbation sample(torch::IntArrayRef shape,
                                      at::Generator& gen);
};

// Image obtained by adding the weighted coefficient offset dP to x_adv:
// DCT, adjust, IDCT, spatial l-inf clamp, [0,1] clamp, mask filter.
// W is held fixed so this is differentiable in dP through the inverse DCT.
torch::Tensor fpl_candidate(const torch::Tensor& x_adv,
                            const torch::Tensor& x_clean,
                            const torch::Tensor& W, const torch::Tensor& dP,
                            const FrequencyAttackConfig& cfg,
                            const BinaryMask* mask);

// cond_loss of the candidate image for a frozen draw. P_ref is the point the
// offset is measured from, so the loss at P = P_ref is the loss at x_adv.
torch::Tensor fpl_loss(const TinyLdm& model, const torch::Tensor& x_adv,
                       const torch::Tensor& x_clean, const torch::Tensor& W,
                       const torch::Tensor& P, const torch::Tensor& P_ref,
                       const Conditioning& cond, const NoiseDraw& draw,
                       const FrequencyAttackConfig& cfg,
                       const BinaryMask* mask);

// One update: recompute W from the current image, take the P-gradient of
// fpl_loss at P, step P, and move the image by the weighted step only.
torch::Tensor fpl_update(const TinyLdm& model, const torch::Tensor& x_adv,
                         const torch::Tensor& x_clean,
                         const Conditioning& cond, const NoiseDraw& draw,
                         FrequencyPerturbation& perturbation,
                         const FrequencyAttackConfig& cfg,
                         const BinaryMask* mask, double* loss = nullptr);

// cfg.steps updates from x_clean with P drawn from N(0,1).
torch::Tensor fpl_attack(const torch::Tensor& x_clean,
                         const SurrogateState& surrogate,
                         const Conditioning& cond,
                         const FrequencyAttackConfig& cfg,
                         const BinaryMask* mask, uint64_t seed);

}  // namespace ddap
