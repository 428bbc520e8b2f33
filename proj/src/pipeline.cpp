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

#include "ddap/pipeline.hpp"

#include <cmath>

#include "ddap/diffusion.hpp"
#include "ddap/errors.hpp"
#include "ddap/rng.hpp"

namespace ddap {

torch::Tensor quantize_in_budget(const torch::Tensor& x_adv,
                                 const torch::Tensor& x_clean, double eta) {
  auto clean = x_clean.to(torch::kDouble) * 255.0;
  auto q = torch::round(x_adv.to(torch::kDouble) * 255.0);
  auto lo = torch::ceil(clean - eta * 255.0 - 1e-9).clamp_min(0.0);
  auto hi = torch::floor(clean + eta * 255.0 + 1e-9).clamp_max(255.0);
  return torch::min(torch::max(q, lo), hi) / 255.0;
}

ProtectResult protect(const TinyLdm& base, const torch::Tensor& x_clean,
                      const DDPLConfig& cfg, const StepObserver& observer,
                      const ProgressSink& progress) {
  ProtectResult r;
  r.aspl = run_aspl(x_clean, base, cfg, observer, progress);
  r.images = quantize_in_budget(r.aspl.protected_images, x_clean, cfg.eta);
  if (r.aspl.mask) {
    r.images = restrict_to_mask(x_clean.to(torch::kDouble), r.images,
                                *r.aspl.mask);
  }
  r.audit = budget_audit(x_clean, r.images, cfg.eta);
  if (!r.audit.pass) {
    throw NumericError("protected images exceed the budget after "
                       "quantization: max delta " +
                       std::to_string(r.audit.max_delta));
  }
  return r;
}

void measure_samples(EvalReport& report, const TinyLdm& model,
                     const SubjectClassifier& clf, const EvalInputs& inputs,
                     const EvalSettings& settings, uint64_t seed) {
  auto prompt = model.prompt(settings.prompt);
  auto samples = ddim_sample(
      model, Conditioning::repeat(prompt, settings.samples),
      settings.ddim_steps, seed);
  report.ism = ism_per_image(clf, samples, inputs.references);
  report.dfr = dfr_per_image(clf, samples);
  report.quality = confidence_per_image(clf, samples);

  // Closest clean image of the subject, per sample.
  auto targets = torch::cat({inputs.clean.to(torch::kDouble),
                             inputs.references.to(torch::kDouble)});
  auto s = samples.to(torch::kDouble).flatten(1);
  auto t = targets.flatten(1);
  auto mse = (s.unsqueeze(1) - t.unsqueeze(0)).pow(2).mean(2);  // [S,T]
  auto best = std::get<0>(mse.min(1));
  report.psnr_out.clear();
  for (int64_t i = 0; i < best.numel(); ++i) {
    const double m = best[i].item<double>();
    report.psnr_out.push_back(m <= 0 ? kPsnrCap
                                     : std::min(kPsnrCap,
                                                10.0 * std::log10(1.0 / m)));
  }
}

EvalReport evaluate_subject(const TinyLdm& attacker, const TinyLdm& reference,
                            const SubjectClassifier& clf,
                            const EvalInputs& inputs,
                            const EvalSettings& settings,
                            const FinetuneConfig& finetune, uint64_t seed) {
  EvalReport report;
  report.eval_prompt = settings.prompt;
  report.model_version = attacker.config().version;
  report.subjects = {inputs.subject};
  report.psnr_in = psnr_per_image(inputs.clean, inputs.train);
  report.perceptual_in =
      perceptual_per_image(inputs.clean, inputs.train, reference);

  auto model = attacker.clone();
  auto ft = finetune;
  ft.prompt = settings.prompt;
  finetune_latents(model, [&] {
    torch::NoGradGuard no_grad;
    return model.encode(inputs.train);
  }(), ft, settings.finetune_steps, mix_seed(seed, 1));
  measure_samples(report, model, clf, inputs, settings, mix_seed(seed, 2));
  return report;
}

}  // namespace ddap
