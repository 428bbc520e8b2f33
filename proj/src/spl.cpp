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

#include "ddap/spl.hpp"

#include "ddap/errors.hpp"
#include "ddap/rng.hpp"

namespace ddap {

void SpatialAttackConfig::validate() const {
  if (xi < 0) throw ArgumentError("xi must be >= 0");
  if (!(eta > 0 && eta < 1)) throw ArgumentError("eta must lie in (0,1)");
  if (!(gamma > 0 && gamma <= eta)) {
    throw ArgumentError("spatial step must lie in (0, eta]");
  }
  if (steps < 0) throw ArgumentError("steps must be >= 0");
}

torch::Tensor project_linf(const torch::Tensor& x, const torch::Tensor& x_clean,
                           double eta) {
  auto y = torch::min(torch::max(x, x_clean - eta), x_clean + eta);
  return y.clamp(0.0, 1.0);
}

torch::Tensor latent_loss(const TinyLdm& model, const torch::Tensor& x_adv,
                          const torch::Tensor& z0_clean) {
  auto z = model.encode(x_adv);
  return (z - z0_clean.to(z.scalar_type())).pow(2).mean();
}

torch::Tensor spl_loss(const TinyLdm& model, const torch::Tensor& x_adv,
                       const torch::Tensor& z0_clean, const Conditioning& cond,
                       const NoiseDraw& draw, double xi) {
  auto z = model.encode(x_adv);
  auto l = cond_loss(model, z, cond, draw);
  if (xi == 0.0) return l;
  return l + xi * (z - z0_clean.to(z.scalar_type())).pow(2).mean();
}

torch::Tensor spl_loss(const TinyLdm& model, const torch::Tensor& x_adv,
                       const torch::Tensor& z0_clean, const Conditioning& cond,
                       at::Generator& gen, double xi) {
  auto draw = draw_noise(model.schedule(), z0_clean.sizes(), gen);
  return spl_loss(model, x_adv, z0_clean, cond, draw, xi);
}

LossGradient spl_gradient(const TinyLdm& model, const torch::Tensor& x_adv,
                          const torch::Tensor& z0_clean,
                          const Conditioning& cond, const NoiseDraw& draw,
                          double xi) {
  auto x = x_adv.detach().clone().requires_grad_(true);
  auto loss = spl_loss(model, x, z0_clean, cond, draw, xi);
  auto grad = torch::autograd::grad({loss}, {x})[0];
  LossGradient out{loss.item<double>(), grad};
  if (!std::isfinite(out.loss)) throw NumericError("spatial loss is not finite");
  check_finite(grad, "spatial gradient");
  return out;
}

torch::Tensor spl_step(const torch::Tensor& x_adv, const torch::Tensor& x_clean,
                       const torch::Tensor& grad,
                       const SpatialAttackConfig& cfg) {
  return project_linf(x_adv + cfg.gamma * torch::sign(grad), x_clean, cfg.eta);
}

torch::Tensor spl_update(const TinyLdm& model, const torch::Tensor& x_adv,
                         const torch::Tensor& x_clean,
                         const torch::Tensor& z0_clean,
                         const Conditioning& cond, const NoiseDraw& draw,
                         const SpatialAttackConfig& cfg,
                         const BinaryMask* mask, double* loss) {
  auto lg = spl_gradient(model, x_adv, z0_clean, cond, draw, cfg.xi);
  if (loss) *loss = lg.loss;
  auto grad = lg.grad;
  if (mask) grad = restrict_to_mask(torch::zeros_like(grad), grad, *mask);
  auto next = spl_step(x_adv, x_clean, grad, cfg);
  if (mask) next = restrict_to_mask(x_clean, next, *mask);
  return next;
}

torch::Tensor spl_attack(const torch::Tensor& x_clean,
                         const SurrogateState& surrogate,
                         const Conditioning& cond,
                         const SpatialAttackConfig& cfg,
                         const BinaryMask* mask, uint64_t seed) {
  cfg.validate();
  const auto& model = surrogate.params;
  torch::Tensor z0;
  {
    torch::NoGradGuard no_grad;
    z0 = model.encode(x_clean);
  }
  auto gen = make_generator(seed);
  auto x = x_clean.clone();
  for (int s = 0; s < cfg.steps; ++s) {
    auto draw = draw_noise(model.schedule(), z0.sizes(), gen);
    try {
      x = spl_update(model, x, x_clean, z0, cond, draw, cfg, mask);
    } catch (const NumericError& e) {
      throw NumericError(std::string(e.what()) + " at spatial step " +
                             std::to_string(s),
                         s);
    }
  }
  return x;
}

}  // namespace ddap
