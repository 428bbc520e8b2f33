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

#include <string>

#include <torch/torch.h>

#include "ddap/prompt.hpp"
#include "ddap/tiny_ldm.hpp"

namespace ddap {

// Per-image attribution of one prompt token, min-max normalized to [0,1].
struct AttributionHeatmap {
  torch::Tensor values;  // double [N,H,W]
  std::string model_version;
  std::string token;
  int inversion_steps = 0;
};

// Per-image attack region. Broadcast over channels when applied.
struct BinaryMask {
  torch::Tensor mask;  // bool [N,H,W]
  double tau = 0.0;

  static BinaryMask ones(int64_t n, int64_t h, int64_t w);
  int64_t support() const { return mask.sum().item<int64_t>(); }
};

// Min-max normalizes each [H,W] slice; a constant slice becomes all zeros.
torch::Tensor normalize_heatmap(const torch::Tensor& raw);

// DDIM-inverts x under the prompt and averages the cross-attention paid to
// prompt.token_ids[token_index] over every layer, head and inversion step.
// Each layer map is bilinearly upsampled to image size before averaging.
AttributionHeatmap attribution_map(const TinyLdm& model, const torch::Tensor& x,
                                   const Prompt& prompt, int token_index,
                                   int steps);

// mask = (heatmap >= tau).
BinaryMask binarize(const AttributionHeatmap& heatmap, double tau);

// clamp(x_clean + delta) inside the mask, x_clean outside.
torch::Tensor apply_mask(const torch::Tensor& x_clean,
                         const torch::Tensor& delta, const BinaryMask& mask);

// Keeps x where the mask is set and x_clean elsewhere. Used to filter both
// images and image-shaped gradients.
torch::Tensor restrict_to_mask(const torch::Tensor& x_clean,
                               const torch::Tensor& x, const BinaryMask& mask);

}  // namespace ddap
