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

#include "ddap/localization.hpp"

#include <string>

#include "ddap/diffusion.hpp"
#include "ddap/errors.hpp"

namespace ddap {

namespace {

torch::Tensor channel_mask(const BinaryMask& mask, const torch::Tensor& like) {
  if (mask.mask.dim() != 3 || like.dim() != 4 ||
      mask.mask.size(0) != like.size(0) || mask.mask.size(1) != like.size(2) ||
      mask.mask.size(2) != like.size(3)) {
    throw ArgumentError("mask " + c10::str(mask.mask.sizes()) +
                        " does not fit images " + c10::str(like.sizes()));
  }
  return mask.mask.unsqueeze(1);
}

}  // namespace

BinaryMask BinaryMask::ones(int64_t n, int64_t h, int64_t w) {
  return {torch::ones({n, h, w}, torch::kBool), 0.0};
}

torch::Tensor normalize_heatmap(const torch::Tensor& raw) {
  auto flat = raw.to(torch::kDouble).flatten(1);
  auto lo = std::get<0>(flat.min(1, true));
  auto hi = std::get<0>(flat.max(1, true));
  auto range = hi - lo;
  auto out = torch::where(range > 0, (flat - lo) / range.clamp_min(1e-300),
                          torch::zeros_like(flat));
  return out.view(raw.sizes());
}

AttributionHeatmap attribution_map(const TinyLdm& model, const torch::Tensor& x,
                                   const Prompt& prompt, int token_index,
                                   int steps) {
  if (token_index < 0 || token_index >= int(prompt.token_ids.size())) {
    throw ArgumentError("token index " + std::to_string(token_index) +
                        " outside prompt of length " +
                        std::to_string(prompt.token_ids.size()));
  }
  torch::NoGradGuard no_grad;
  const int64_t n = x.size(0), h = x.size(2), w = x.size(3);
  AttentionRecorder recorder;
  ddim_invert(model, x, Conditioning::repeat(prompt, n), steps, &recorder);

  auto sum = torch::zeros({n, 1, h, w}, torch::kDouble);
  for (const auto& m : recorder.maps()) {
    // [B,heads,hw,L] -> [B,1,mh,mw], averaged over heads.
    auto a = m.probs.select(3, token_index).to(torch::kDouble).mean(1);
    a = a.view({n, 1, m.height, m.width});
    sum += torch::nn::functional::interpolate(
        a, torch::nn::functional::InterpolateFuncOptions()
               .size(std::vector<int64_t>{h, w})
               .mode(torch::kBilinear)
               .align_corners(false));
  }
  const auto count = double(recorder.maps().size());
  AttributionHeatmap hm;
  hm.values = normalize_heatmap((sum / count).squeeze(1));
  hm.model_version = model.config().version;
  hm.token = model.vocab().token(prompt.token_ids[size_t(token_index)]);
  hm.inversion_steps = steps;
  return hm;
}

BinaryMask binarize(const AttributionHeatmap& heatmap, double tau) {
  return {heatmap.values >= tau, tau};
}

torch::Tensor apply_mask(const torch::Tensor& x_clean,
                         const torch::Tensor& delta, const BinaryMask& mask) {
  auto m = channel_mask(mask, x_clean);
  return torch::where(m, (x_clean + delta).clamp(0.0, 1.0), x_clean);
}

torch::Tensor restrict_to_mask(const torch::Tensor& x_clean,
                               const torch::Tensor& x, const BinaryMask& mask) {
  return torch::where(channel_mask(mask, x_clean), x, x_clean);
}

}  // namespace ddap
