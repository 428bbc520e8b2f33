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

#include <torch/torch.h>

#include "ddap/tiny_ldm.hpp"

namespace ddap {

struct FinetuneConfig {
  std::string prompt = "a photo of sks subject";
  double lr = 1e-4;
  int batch_size = 2;
  int steps = 200;
  bool prior_preservation = false;
  double prior_weight = 1.0;
  std::string class_prompt = "a photo of subject";

  // lr 5e-7 over 1000 steps: the full-scale schedule, recorded for reference.
  static FinetuneConfig full_scale();
  // lr > 0, steps >= 1, batch >= 1, exactly one identifier token.
  void validate(const Vocabulary& vocab) const;
};

// A surrogate copy of the model being fine-tuned alongside the real one.
struct SurrogateState {
  TinyLdm params;
  int steps_applied = 0;
};

SurrogateState clone_model(const TinyLdm& model);

struct FinetuneStats {
  std::vector<double> losses;  // one per step
};

// Minimises the conditional loss on (image, prompt) pairs for n_steps Adam
// steps, updating the denoiser and the text embeddings only. Images are
// [N,3,S,S]; minibatches are drawn with replacement from a generator seeded
// by `seed`, so the result is a pure function of the inputs.
FinetuneStats finetune(TinyLdm& model, const torch::Tensor& images,
                       const FinetuneConfig& config, int n_steps,
                       uint64_t seed);
FinetuneStats finetune(SurrogateState& surrogate, const torch::Tensor& images,
                       const FinetuneConfig& config, int n_steps,
                       uint64_t seed);

// Same as finetune() but on precomputed latents (the encoder is frozen, so
// callers that fine-tune repeatedly on a fixed set can encode once).
FinetuneStats finetune_latents(TinyLdm& model, const torch::Tensor& latents,
                               const FinetuneConfig& config, int n_steps,
                               uint64_t seed);

}  // namespace ddap
