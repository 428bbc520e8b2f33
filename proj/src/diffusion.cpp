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
#include "ddap/diffusion.hpp"

#include <cmath>
#include <string>

#include "ddap/errors.hpp"
#include "ddap/rng.hpp"

namespace ddap {

namespace {

torch::Tensor alpha_bar_tensor(const NoiseSchedule& schedule,
                               const torch::Tensor& t) {
  auto t_cpu = t.to(torch::kLong).reshape({-1});
  std::vector<double> values(size_t(t_cpu.numel()));
  auto acc = t_cpu.accessor<int64_t, 1>();
  for (int64_t i = 0; i < t_cpu.numel(); ++i) {
    if (acc[i] < 1 || acc[i] > schedule.steps()) {
      throw ArgumentError("timestep " + std::to_string(acc[i]) +
                          " outside [1," + std::to_string(schedule.steps()) +
                          "]");
    }
    values[size_t(i)] = schedule.alpha_bar(int(acc[i]));
  }
  return torch::tensor(values, torch::kDouble);
}

torch::Tensor ddim_step(const torch::Tensor& z, const torch::Tensor& eps,
                        double abar_from, double abar_to) {
  auto x0 = (z - std::sqrt(1.0 - abar_from) * eps) / std::sqrt(abar_from);
  return std::sqrt(abar_to) * x0 + std::sqrt(1.0 - abar_to) * eps;
}

}  // namespace

NoiseDraw draw_noise(const NoiseSchedule& schedule,
                     torch::IntArrayRef latent_shape, at::Generator& gen,
                     torch::Dtype dtype) {
  NoiseDraw d;
  d.t = torch::randint(1, schedule.steps() + 1, {latent_shape[0]}, gen,
                       torch::kLong);
  d.eps = torch::randn(latent_shape, gen, torch::dtype(torch::kFloat))
              .to(dtype);
  return d;
}

torch::Tensor add_noise(const NoiseSchedule& schedule, const torch::Tensor& z0,
                        const torch::Tensor& t, const torch::Tensor& eps) {
  if (!eps.sizes().equals(z0.sizes())) {
    throw ArgumentError("add_noise: eps shape differs from z0");
  }
  if (t.numel() != z0.size(0)) {
    throw ArgumentError("add_noise: one timestep per batch element required");
  }
  auto abar = alpha_bar_tensor(schedule, t).to(z0.scalar_type());
  auto shape = std::vector<int64_t>(size_t(z0.dim()), 1);
  shape[0] = z0.size(0);
  abar = abar.view(shape);
  return torch::sqrt(abar) * z0 + torch::sqrt(1.0 - abar) * eps;
}

torch::Tensor add_noise(const NoiseSchedule& schedule, const torch::Tensor& z0,
                        int t, const torch::Tensor& eps) {
  return add_noise(schedule, z0, torch::full({z0.size(0)}, int64_t(t)), eps);
}

torch::Tensor cond_loss(const TinyLdm& model, const torch::Tensor& z0,
                        const Conditioning& cond, const NoiseDraw& draw) {
  auto eps = draw.eps.to(z0.scalar_type());
  auto z_t = add_noise(model.schedule(), z0, draw.t, eps);
  auto pred = model.predict_noise(z_t, draw.t, cond);
  return (eps.to(pred.scalar_type()) - pred).pow(2).mean();
}

torch::Tensor cond_loss(const TinyLdm& model, const torch::Tensor& z0,
                        const Conditioning& cond, at::Generator& gen) {
  return cond_loss(model, z0, cond, draw_noise(model.schedule(), z0.sizes(), gen));
}

std::vector<int> ddim_timesteps(int total_steps, int steps) {
  if (steps < 1 || steps > total_steps) {
    throw ArgumentError("DDIM steps " + std::to_string(steps) +
                        " outside [1," + std::to_string(total_steps) + "]");
  }
  if (total_steps % steps != 0) {
    throw ArgumentError("DDIM steps must divide T=" +
                        std::to_string(total_steps));
  }
  const int stride = total_steps / steps;
  std::vector<int> ts;
  for (int i = 1; i <= steps; ++i) ts.push_back(i * stride);
  return ts;
}

torch::Tensor ddim_denoise(const TinyLdm& model, const torch::Tensor& z_T,
                           const Conditioning& cond, int steps,
                           AttentionRecorder* recorder) {
  torch::NoGradGuard no_grad;
  const auto& sched = model.schedule();
  const auto ts = ddim_timesteps(sched.steps(), steps);
  auto z = z_T.to(model.dtype());
  for (int i = steps - 1; i >= 0; --i) {
    const int t = ts[size_t(i)];
    const int t_prev = i == 0 ? 0 : ts[size_t(i - 1)];
    auto eps = model.predict_noise(z, torch::full({z.size(0)}, int64_t(t)),
                                   cond, recorder);
    z = ddim_step(z, eps, sched.alpha_bar(t), sched.alpha_bar(t_prev));
  }
  return z;
}

torch::Tensor ddim_sample(const TinyLdm& model, const Conditioning& cond,
                          int steps, uint64_t seed) {
  torch::NoGradGuard no_grad;
  ddim_timesteps(model.schedule().steps(), steps);
  auto gen = make_generator(seed);
  const int64_t s = model.config().latent_size();
  auto z_T = torch::randn({cond.batch(), model.config().latent_channels, s, s},
                          gen, torch::dtype(torch::kFloat));
  return model.decode(ddim_denoise(model, z_T, cond, steps));
}

std::vector<torch::Tensor> ddim_invert(const TinyLdm& model,
                                       const torch::Tensor& x,
                                       const Conditioning& cond, int steps,
                                       AttentionRecorder* recorder) {
  torch::NoGradGuard no_grad;
  const auto& sched = model.schedule();
  const auto ts = ddim_timesteps(sched.steps(), steps);
  std::vector<torch::Tensor> trajectory;
  auto z = model.encode(x);
  trajectory.push_back(z);
  for (int i = 0; i < steps; ++i) {
    const int t = ts[size_t(i)];
    const int t_prev = i == 0 ? 0 : ts[size_t(i - 1)];
    auto eps = model.predict_noise(z, torch::full({z.size(0)}, int64_t(t)),
                                   cond, recorder);
    z = ddim_step(z, eps, sched.alpha_bar(t_prev), sched.alpha_bar(t));
    trajectory.push_back(z);
  }
  return trajectory;
}

}  // namespace ddap
