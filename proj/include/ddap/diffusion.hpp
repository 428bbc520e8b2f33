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
#include <vector>

#include <torch/torch.h>

#include "ddap/tiny_ldm.hpp"

namespace ddap {

// A frozen (timestep, noise) draw for a batch of latents. Freezing the draw
// turns the stochastic training loss into a deterministic function of its
// input, which is what finite-difference checks and ascent checks need.
struct NoiseDraw {
  torch::Tensor t;    // int64 [B], entries in [1, T]
  torch::Tensor eps;  // shaped like the latent batch
};

NoiseDraw draw_noise(const NoiseSchedule& schedule,
                     torch::IntArrayRef latent_shape, at::Generator& gen,
                     torch::Dtype dtype = torch::kFloat);

// sqrt(abar_t) * z0 + sqrt(1 - abar_t) * eps, per batch element.
torch::Tensor add_noise(const NoiseSchedule& schedule, const torch::Tensor& z0,
                        const torch::Tensor& t, const torch::Tensor& eps);
torch::Tensor add_noise(const NoiseSchedule& schedule, const torch::Tensor& z0,
                        int t, const torch::Tensor& eps);

// Mean squared error between the drawn noise and the denoiser's prediction.
torch::Tensor cond_loss(const TinyLdm& model, const torch::Tensor& z0,
                        const Conditioning& cond, const NoiseDraw& draw);
torch::Tensor cond_loss(const TinyLdm& model, const torch::Tensor& z0,
                        const Conditioning& cond, at::Generator& gen);

// Uniform-stride DDIM timesteps {s, 2s, ..., T}; steps must divide T.
std::vector<int> ddim_timesteps(int total_steps, int steps);

// Deterministic (eta = 0) sampling from z_T down to z_0.
torch::Tensor ddim_denoise(const TinyLdm& model, const torch::Tensor& z_T,
                           const Conditioning& cond, int steps,
                           AttentionRecorder* recorder = nullptr);

// Draws z_T from the seed, denoises and decodes. Batch size = cond.batch().
torch::Tensor ddim_sample(const TinyLdm& model, const Conditioning& cond,
                          int steps, uint64_t seed);

// Reverse of ddim_denoise starting from encode(x). Returns z_0 ... z_steps.
// Cross-attention maps of every step are appended to the recorder.
std::vector<torch::Tensor> ddim_invert(const TinyLdm& model,
                                       const torch::Tensor& x,
                                       const Conditioning& cond, int steps,
                                       AttentionRecorder* recorder = nullptr);

}  // namespace ddap
