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

#include "ddap/personalization.hpp"

#include <cmath>

#include "ddap/diffusion.hpp"
#include "ddap/errors.hpp"
#include "ddap/rng.hpp"

namespace ddap {

FinetuneConfig FinetuneConfig::full_scale() {
  FinetuneConfig c;
  c.lr = 5e-7;
  c.steps = 1000;
  return c;
}

void FinetuneConfig::validate(const Vocabulary& vocab) const {
  if (!(lr > 0.0)) throw ArgumentError("fine-tune lr must be positive");
  if (steps < 1) throw ArgumentError("fine-tune steps must be >= 1");
  if (batch_size < 1) throw ArgumentError("fine-tune batch size must be >= 1");
  const auto p = tokenize(vocab, prompt);
  if (p.identifier_position < 0) {
    throw ArgumentError("fine-tune prompt '" + prompt +
                        "' has no identifier token");
  }
}

SurrogateState clone_model(const TinyLdm& model) {
  return SurrogateState{model.clone(), 0};
}

FinetuneStats finetune_latents(TinyLdm& model, const torch::Tensor& latents,
                               const FinetuneConfig& config, int n_steps,
                               uint64_t seed) {
  config.validate(model.vocab());
  if (latents.size(0) < 1) throw ArgumentError("fine-tune needs images");
  FinetuneStats stats;
  if (n_steps <= 0) return stats;

  auto gen = make_generator(seed);
  const auto prompt = model.prompt(config.prompt);
  const auto cond = Conditioning::repeat(prompt, config.batch_size);

  torch::Tensor prior_latents;
  Conditioning prior_cond;
  if (config.prior_preservation) {
    torch::NoGradGuard no_grad;
    const auto class_prompt = model.prompt(config.class_prompt);
    prior_cond = Conditioning::repeat(class_prompt, config.batch_size);
    const int64_t s = model.config().latent_size();
    auto z_T = torch::randn({config.batch_size, model.config().latent_channels, s, s},
                            gen, torch::dtype(torch::kFloat));
    prior_latents = ddim_denoise(model, z_T, prior_cond, 10);
  }

  std::vector<torch::Tensor> params = model.parameters(ParamGroup::kDenoiser);
  for (auto& p : model.parameters(ParamGroup::kText)) params.push_back(p);
  torch::optim::Adam opt(params, torch::optim::AdamOptions(config.lr));
  const auto z_all = latents.detach().to(model.dtype());
  for (int step = 0; step < n_steps; ++step) {
    auto idx = torch::randint(0, z_all.size(0), {config.batch_size}, gen,
                              torch::kLong);
    auto loss = cond_loss(model, z_all.index_select(0, idx), cond, gen);
    if (config.prior_preservation) {
      loss = loss + config.prior_weight *
                        cond_loss(model, prior_latents, prior_cond, gen);
    }
    const double value = loss.item<double>();
    if (!std::isfinite(value)) {
      throw NumericError("fine-tune loss is not finite at step " +
                             std::to_string(step),
                         step);
    }
    opt.zero_grad();
    loss.backward();
    opt.step();
    stats.losses.push_back(value);
  }
  return stats;
}

FinetuneStats finetune(TinyLdm& model, const torch::Tensor& images,
                       const FinetuneConfig& config, int n_steps,
                       uint64_t seed) {
  if (images.dim() != 4 || images.size(0) < 1) {
    throw ArgumentError("fine-tune needs a nonempty [N,3,S,S] image batch");
  }
  torch::Tensor latents;
  {
    torch::NoGradGuard no_grad;
    latents = model.encode(images);
  }
  return finetune_latents(model, latents, config, n_steps, seed);
}

FinetuneStats finetune(SurrogateState& surrogate, const torch::Tensor& images,
                       const FinetuneConfig& config, int n_steps,
                       uint64_t seed) {
  auto stats = finetune(surrogate.params, images, config, n_steps, seed);
  surrogate.steps_applied += std::max(0, n_steps);
  return stats;
}

}  // namespace ddap
