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

#include "ddap/fpl.hpp"

#include <cmath>
#include <string>

#include "ddap/errors.hpp"
#include "ddap/rng.hpp"
#include "ddap/spl.hpp"

namespace ddap {

void FrequencyAttackConfig::validate() const {
  if (!(lambda > 0)) throw ArgumentError("lambda must be > 0");
  if (!(eps_f > 0)) throw ArgumentError("eps_f must be > 0");
  if (!(eta > 0 && eta < 1)) throw ArgumentError("eta must lie in (0,1)");
  if (block_size < 1) throw ArgumentError("block size must be positive");
  if (steps < 0) throw ArgumentError("steps must be >= 0");
  if (alpha < 0 || beta < 0) throw ArgumentError("weight exponents must be >= 0");
}

torch::Tensor energy_weight_matrix(const FrequencyBlockSet& coeffs,
                                   double alpha, double beta) {
  const auto& c = coeffs.coeffs;
  const int K = coeffs.block_size;
  auto opts = torch::dtype(c.scalar_type());
  auto u = torch::arange(K, opts);
  auto r = (u.view({K, 1}) + u.view({1, K})) / double(std::max(2 * (K - 1), 1));
  auto radial = alpha == 0.0 ? torch::ones_like(r) : r.pow(alpha);

  auto energy = c.detach().pow(2).mean({2, 3});  // [N,C,K,K]
  auto e_max = energy.amax({2, 3}, true);
  auto energy_term =
      torch::where(e_max > 0,
                   (1.0 - energy / e_max.clamp_min(1e-300)).clamp_min(0.0),
                   torch::ones_like(energy));
  if (beta != 1.0) energy_term = energy_term.pow(beta);

  auto w = radial * energy_term;
  auto w_max = w.amax({2, 3}, true);
  // Everything weighted to zero (e.g. a single energetic frequency that is
  // also the only nonzero radial one): fall back to the radial term.
  auto fallback = (radial / radial.max().clamp_min(1e-300)).expand_as(w);
  return torch::where(w_max > 0, w / w_max.clamp_min(1e-300), fallback);
}

torch::Tensor project_block_l2(const torch::Tensor& delta, double eps_f) {
  // Clamp before the sqrt so the backward pass stays finite at zero.
  auto sq = delta.pow(2).sum({-2, -1}, true);
  return delta * (eps_f / sq.clamp_min(eps_f * eps_f).sqrt());
}

torch::Tensor adjust(const torch::Tensor& coeffs, const torch::Tensor& W,
                     const torch::Tensor& P, double eps_f) {
  auto w = W.unsqueeze(2).unsqueeze(3);  // broadcast over the block grid
  return coeffs + project_block_l2(w * P, eps_f);
}

torch::Tensor fpl_step(const torch::Tensor& P, const torch::Tensor& grad,
                       double lambda) {
  return P + lambda * torch::sign(grad);
}

FrequencyPerturbation FrequencyPerturbation::sample(torch::IntArrayRef shape,
                                                    at::Generator& gen) {
  return {torch::randn(shape, gen, torch::dtype(torch::kDouble))};
}

torch::Tensor fpl_candidate(const torch::Tensor& x_adv,
                            const torch::Tensor& x_clean,
                            const torch::Tensor& W, const torch::Tensor& dP,
                            const FrequencyAttackConfig& cfg,
                            const BinaryMask* mask) {
  auto blocks = FrequencyBlockSet::from_image(x_adv, cfg.block_size);
  blocks.coeffs = adjust(blocks.coeffs, W, dP, cfg.eps_f);
  auto x = project_linf(blocks.to_image(), x_clean, cfg.eta);
  if (mask) x = restrict_to_mask(x_clean, x, *mask);
  return x;
}

torch::Tensor fpl_loss(const TinyLdm& model, const torch::Tensor& x_adv,
                       const torch::Tensor& x_clean, const torch::Tensor& W,
                       const torch::Tensor& P, const torch::Tensor& P_ref,
                       const Conditioning& cond, const NoiseDraw& draw,
                       const FrequencyAttackConfig& cfg,
                       const BinaryMask* mask) {
  auto x = fpl_candidate(x_adv, x_clean, W, P - P_ref, cfg, mask);
  return cond_loss(model, model.encode(x), cond, draw);
}

torch::Tensor fpl_update(const TinyLdm& model, const torch::Tensor& x_adv,
                         const torch::Tensor& x_clean,
                         const Conditioning& cond, const NoiseDraw& draw,
                         FrequencyPerturbation& perturbation,
                         const FrequencyAttackConfig& cfg,
                         const BinaryMask* mask, double* loss) {
  auto x = x_adv.detach();
  torch::Tensor W;
  {
    torch::NoGradGuard no_grad;
    W = energy_weight_matrix(FrequencyBlockSet::from_image(x, cfg.block_size),
                             cfg.alpha, cfg.beta);
  }
  const auto& P = perturbation.P;
  auto Q = P.detach().clone().requires_grad_(true);
  auto l = fpl_loss(model, x, x_clean, W, Q, P, cond, draw, cfg, mask);
  auto grad = torch::autograd::grad({l}, {Q})[0];
  const double value = l.item<double>();
  if (!std::isfinite(value)) throw NumericError("frequency loss is not finite");
  check_finite(grad, "frequency gradient");
  if (loss) *loss = value;

  auto next_P = fpl_step(P, grad, cfg.lambda);
  torch::NoGradGuard no_grad;
  auto next = fpl_candidate(x, x_clean, W, next_P - P, cfg, mask);
  perturbation.P = next_P;
  return next;
}

torch::Tensor fpl_attack(const torch::Tensor& x_clean,
                         const SurrogateState& surrogate,
                         const Conditioning& cond,
                         const FrequencyAttackConfig& cfg,
                         const BinaryMask* mask, uint64_t seed) {
  cfg.validate();
  const auto& model = surrogate.params;
  torch::Tensor z_shape;
  {
    torch::NoGradGuard no_grad;
    z_shape = model.encode(x_clean);
  }
  auto gen = make_generator(seed);
  auto x = x_clean.clone();
  auto perturbation = FrequencyPerturbation::sample(
      FrequencyBlockSet::from_image(x_clean, cfg.block_size).coeffs.sizes(),
      gen);
  for (int s = 0; s < cfg.steps; ++s) {
    auto draw = draw_noise(model.schedule(), z_shape.sizes(), gen);
    try {
      x = fpl_update(model, x, x_clean, cond, draw, perturbation, cfg, mask);
    } catch (const NumericError& e) {
      throw NumericError(std::string(e.what()) + " at frequency step " +
                             std::to_string(s),
                         s);
    }
  }
  return x;
}

}  // namespace ddap
