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

#include "ddap/training.hpp"

#include <cmath>
#include <fstream>

#include "ddap/checkpoint.hpp"
#include "ddap/diffusion.hpp"
#include "ddap/errors.hpp"
#include "ddap/rng.hpp"

namespace ddap {

namespace {

constexpr double kPi = 3.14159265358979323846;

void set_lr(torch::optim::Adam& opt, double lr) {
  for (auto& group : opt.param_groups()) {
    static_cast<torch::optim::AdamOptions&>(group.options()).lr(lr);
  }
}

double cosine_lr(double base, int step, int total) {
  return base * (0.05 + 0.95 * 0.5 * (1.0 + std::cos(kPi * step / total)));
}

[[noreturn]] void diverged(const TinyLdm& last_good, const std::string& path,
                           const std::string& phase, int step) {
  if (!path.empty()) save_model(last_good, path);
  throw NumericError("base training diverged in " + phase + " phase at step " +
                         std::to_string(step),
                     step);
}

}  // namespace

std::string base_prompt_text(int subject, int template_index) {
  return (template_index % 2 == 0 ? "a photo of " : "a dslr portrait of ") +
         subject_token(subject) + " subject";
}

double heldout_cond_loss(const TinyLdm& model, const torch::Tensor& latents,
                         const Conditioning& cond, uint64_t seed, int draws) {
  torch::NoGradGuard no_grad;
  auto gen = make_generator(seed);
  double total = 0.0;
  for (int d = 0; d < draws; ++d) {
    total += cond_loss(model, latents, cond, gen).item<double>();
  }
  return total / draws;
}

BaseTrainResult train_base(const Dataset& dataset, const ModelConfig& config,
                           const BaseTrainConfig& train) {
  torch::set_num_threads(1);
  TinyLdm model(config, mix_seed(train.seed, 0x1417));
  auto gen = make_generator(mix_seed(train.seed, 0xBA5E));
  auto images = dataset.all_images().to(torch::kFloat);
  const int64_t n = images.size(0);
  std::vector<CurvePoint> curve;
  TinyLdm last_good = model.clone();

  // Autoencoder.
  {
    std::vector<torch::Tensor> params = model.parameters(ParamGroup::kEncoder);
    for (auto& p : model.parameters(ParamGroup::kDecoder)) params.push_back(p);
    torch::optim::Adam opt(params, torch::optim::AdamOptions(train.ae_lr));
    for (int step = 0; step < train.ae_steps; ++step) {
      set_lr(opt, cosine_lr(train.ae_lr, step, train.ae_steps));
      auto idx = torch::randint(0, n, {train.ae_batch}, gen, torch::kLong);
      auto x = images.index_select(0, idx);
      auto flip = torch::rand({train.ae_batch, 1, 1, 1}, gen) < 0.5;
      x = torch::where(flip, x.flip({3}), x);
      auto z = model.net()->encoder(x);
      auto recon = model.net()->decoder(z);
      auto loss = (recon - x).pow(2).mean() + 1e-4 * z.pow(2).mean();
      const double value = loss.item<double>();
      if (!std::isfinite(value)) {
        diverged(last_good, train.failure_checkpoint, "autoencoder", step);
      }
      opt.zero_grad();
      loss.backward();
      opt.step();
      if (step % train.log_every == 0 || step + 1 == train.ae_steps) {
        curve.push_back({"autoencoder", step, value});
        last_good = model.clone();
      }
    }
  }

  // Unit-variance latents for the diffusion phase.
  {
    torch::NoGradGuard no_grad;
    auto z = model.net()->encoder(images);
    model.set_latent_scale(1.0 / z.std().item<double>());
  }

  torch::Tensor latents;
  {
    torch::NoGradGuard no_grad;
    latents = model.encode(images);
  }
  std::vector<Prompt> prompts_a, prompts_b;
  for (const auto& s : dataset.samples) {
    prompts_a.push_back(model.prompt(base_prompt_text(s.subject, 0)));
    prompts_b.push_back(model.prompt(base_prompt_text(s.subject, 1)));
  }
  const auto cond_a = Conditioning::stack(prompts_a);
  const uint64_t heldout_seed = mix_seed(train.seed, 0xE7A1);

  BaseTrainResult result{model.clone(), {}, 0.0, 0.0, false};
  result.initial_heldout_loss =
      heldout_cond_loss(model, latents, cond_a, heldout_seed);

  {
    std::vector<torch::Tensor> params = model.parameters(ParamGroup::kDenoiser);
    for (auto& p : model.parameters(ParamGroup::kText)) params.push_back(p);
    torch::optim::Adam opt(params, torch::optim::AdamOptions(train.denoiser_lr));
    for (int step = 0; step < train.denoiser_steps; ++step) {
      set_lr(opt, cosine_lr(train.denoiser_lr, step, train.denoiser_steps));
      auto idx = torch::randint(0, n, {train.denoiser_batch}, gen, torch::kLong);
      auto use_b = torch::rand({train.denoiser_batch}, gen) < 0.5;
      auto keep = torch::rand({train.denoiser_batch, kMaxPromptTokens}, gen) >=
                  train.word_dropout;
      std::vector<Prompt> batch;
      auto idx_a = idx.accessor<int64_t, 1>();
      auto use_b_a = use_b.accessor<bool, 1>();
      auto keep_a = keep.accessor<bool, 2>();
      for (int64_t b = 0; b < train.denoiser_batch; ++b) {
        const auto& src = use_b_a[b] ? prompts_b[size_t(idx_a[b])]
                                     : prompts_a[size_t(idx_a[b])];
        // Template words are dropped at random so that the subject token is
        // the only reliable carrier of the subject.
        const auto subject_id = model.vocab().id(
            subject_token(dataset.samples[size_t(idx_a[b])].subject));
        Prompt p;
        for (size_t j = 0; j < src.token_ids.size(); ++j) {
          const auto id = src.token_ids[j];
          const bool fixed = j == 0 || id == subject_id;
          if (fixed || keep_a[b][int64_t(j)]) p.token_ids.push_back(id);
        }
        batch.push_back(std::move(p));
      }
      const auto cond = Conditioning::stack(batch);
      auto loss = cond_loss(model, latents.index_select(0, idx), cond, gen);
      const double value = loss.item<double>();
      if (!std::isfinite(value)) {
        diverged(last_good, train.failure_checkpoint, "denoiser", step);
      }
      opt.zero_grad();
      loss.backward();
      opt.step();
      if (step % train.log_every == 0 || step + 1 == train.denoiser_steps) {
        curve.push_back({"denoiser", step, value});
        last_good = model.clone();
      }
    }
  }

  result.heldout_loss = heldout_cond_loss(model, latents, cond_a, heldout_seed);
  result.converged = result.heldout_loss <= train.max_heldout_loss;
  result.curve = std::move(curve);
  if (!train.curve_path.empty()) {
    std::ofstream out(train.curve_path);
    if (!out) throw IoError("cannot write training curve '" + train.curve_path + "'");
    out << "phase,step,loss\n";
    for (const auto& p : result.curve) {
      out << p.phase << "," << p.step << "," << p.loss << "\n";
    }
  }
  result.model = std::move(model);
  return result;
}

}  // namespace ddap
