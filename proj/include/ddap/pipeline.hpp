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

#include <torch/torch.h>

#include "ddap/config.hpp"
#include "ddap/ddpl.hpp"
#include "ddap/metrics.hpp"

namespace ddap {

// Rounds to the 8-bit grid without leaving the l-inf ball around x_clean.
// x_clean itself must lie on the grid.
torch::Tensor quantize_in_budget(const torch::Tensor& x_adv,
                                 const torch::Tensor& x_clean, double eta);

struct ProtectResult {
  torch::Tensor images;  // 8-bit quantized protected images, float64
  AsplResult aspl;
  BudgetReport audit;  // of the quantized images
};

// run_aspl followed by quantization and a budget audit. Throws NumericError
// if the stored images would break the budget.
ProtectResult protect(const TinyLdm& base, const torch::Tensor& x_clean,
                      const DDPLConfig& cfg, const StepObserver& observer = {},
                      const ProgressSink& progress = {});

// What the evaluation of one subject needs.
struct EvalInputs {
  int subject = 0;
  torch::Tensor clean;       // clean versions of the training images
  torch::Tensor train;       // what the attacker fine-tunes on
  torch::Tensor references;  // clean reference images for ISM
};

// Samples `settings.samples` images from `model` with the eval prompt and
// fills the output-side fields (ism, dfr, quality, psnr_out).
void measure_samples(EvalReport& report, const TinyLdm& model,
                     const SubjectClassifier& clf, const EvalInputs& inputs,
                     const EvalSettings& settings, uint64_t seed);

// Fine-tunes a fresh copy of `attacker` on inputs.train with the eval
// prompt, samples from it and measures inputs and outputs. `reference` is
// the feature net for the perceptual distance.
EvalReport evaluate_subject(const TinyLdm& attacker, const TinyLdm& reference,
                            const SubjectClassifier& clf,
                            const EvalInputs& inputs,
                            const EvalSettings& settings,
                            const FinetuneConfig& finetune, uint64_t seed);

}  // namespace ddap
