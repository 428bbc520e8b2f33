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
#include <string>
#include <vector>

#include "ddap/dataset.hpp"
#include "ddap/tiny_ldm.hpp"

namespace ddap {

struct BaseTrainConfig {
  uint64_t seed = 1;
  // Autoencoder phase.
  int ae_steps = 1500;
  int ae_batch = 16;
  double ae_lr = 2e-3;
  // Denoiser phase (encoder/decoder frozen).
  int denoiser_steps = 4000;
  int denoiser_batch = 32;
  double denoiser_lr = 1e-3;
  // Probability of dropping each template word from a training caption.
  double word_dropout = 0.5;
  // Mean held-out conditional loss that counts as converged.
  double max_heldout_loss = 0.35;
  int log_every = 50;
  std::string curve_path;          // CSV "phase,step,loss" when non-empty
  std::string failure_checkpoint;  // last finite state on divergence
};

struct CurvePoint {
  std::string phase;
  int step = 0;
  double loss = 0.0;
};

struct BaseTrainResult {
  TinyLdm model;
  std::vector<CurvePoint> curve;
  double initial_heldout_loss = 0.0;
  double heldout_loss = 0.0;
  bool converged = false;
};

// "a photo of s<k> subject" / "a dslr portrait of s<k> subject".
std::string base_prompt_text(int subject, int template_index);

// Fixed-seed estimate of the conditional loss over a latent batch, averaged
// over `draws` independent (t, eps) draws.
double heldout_cond_loss(const TinyLdm& model, const torch::Tensor& latents,
                         const Conditioning& cond, uint64_t seed,
                         int draws = 4);

BaseTrainResult train_base(const Dataset& dataset, const ModelConfig& config,
                           const BaseTrainConfig& train);

}  // namespace ddap
