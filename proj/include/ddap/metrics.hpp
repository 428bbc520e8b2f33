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

#include "json.hpp"
#include "ddap/dataset.hpp"
#include "ddap/tiny_ldm.hpp"

namespace ddap {

inline constexpr double kPsnrCap = 100.0;

// 10 log10(1 / MSE) over all elements, capped at kPsnrCap.
double psnr(const torch::Tensor& a, const torch::Tensor& b);
// One value per leading index.
std::vector<double> psnr_per_image(const torch::Tensor& a,
                                   const torch::Tensor& b);

// Encoder-feature distance: features at every encoder stage are unit
// normalized along channels, squared differences are averaged per stage and
// the stages are averaged. One value per image.
std::vector<double> perceptual_per_image(const torch::Tensor& a,
                                         const torch::Tensor& b,
                                         const TinyLdm& reference);
double perceptual_distance(const torch::Tensor& a, const torch::Tensor& b,
                           const TinyLdm& reference);

struct ClassifierConfig {
  uint64_t seed = 3;
  int steps = 1500;
  int batch_size = 32;
  double lr = 2e-3;
  int embedding_dim = 32;
  int renders_per_subject = 48;
  int negatives = 192;
};

struct ClassifierNetImpl : torch::nn::Module {
  ClassifierNetImpl(int n_classes, int embedding_dim);
  // Returns {embedding, logits}.
  std::pair<torch::Tensor, torch::Tensor> forward(const torch::Tensor& x);

  torch::nn::Conv2d c1{nullptr}, c2{nullptr}, c3{nullptr}, c4{nullptr};
  torch::nn::Linear embed{nullptr}, head{nullptr};
};
TORCH_MODULE(ClassifierNet);

// Identifies which toy subject an image shows, with one extra class for
// "no subject present". Stands in for a face recognition / detection model.
class SubjectClassifier {
 public:
  SubjectClassifier() = default;

  // Trains on fresh renders of every subject in `spec` (random poses and
  // backgrounds) against backgrounds and noise images.
  static SubjectClassifier train(const DatasetSpec& spec,
                                 const ClassifierConfig& config);

  bool trained() const { return bool(net_); }
  int n_subjects() const { return n_subjects_; }

  torch::Tensor embed(const torch::Tensor& x) const;          // [N,D]
  torch::Tensor probabilities(const torch::Tensor& x) const;  // [N,n+1]
  std::vector<int> predict(const torch::Tensor& x) const;

  void save(const std::string& path) const;
  static SubjectClassifier load(const std::string& path);

 private:
  void require_trained() const;

  ClassifierNet net_{nullptr};
  int n_subjects_ = 0;
  int embedding_dim_ = 0;
};

// Cosine similarity of each generated image's embedding to the mean
// embedding of the subject's reference images.
std::vector<double> ism_per_image(const SubjectClassifier& clf,
                                  const torch::Tensor& generated,
                                  const torch::Tensor& references);
double ism_toy(const SubjectClassifier& clf, const torch::Tensor& generated,
               const torch::Tensor& references);

// 1 where the largest subject probability is below 0.5.
std::vector<double> dfr_per_image(const SubjectClassifier& clf,
                                  const torch::Tensor& generated);
double dfr_toy(const SubjectClassifier& clf, const torch::Tensor& generated);

// Largest subject probability per image.
std::vector<double> confidence_per_image(const SubjectClassifier& clf,
                                         const torch::Tensor& generated);

struct BudgetReport {
  double eta = 0.0;
  double max_delta = 0.0;
  double boundary_fraction = 0.0;  // share of entries with |delta| ~ eta
  bool pass = true;
};
nlohmann::json to_json(const BudgetReport& report);

// Passes when max |x_adv - x_clean| <= eta + 1e-8.
BudgetReport budget_audit(const torch::Tensor& x_clean,
                          const torch::Tensor& x_adv, double eta);

// Per-input and per-sample measurements of one protect/evaluate run.
// Aggregates are plain means of the per-item values.
struct EvalReport {
  std::string name;
  std::string train_prompt;
  std::string eval_prompt;
  std::string model_version;
  std::string attack;
  std::string mask;
  std::string config_hash;
  std::vector<int> subjects;

  std::vector<double> psnr_in;        // clean vs training input
  std::vector<double> perceptual_in;  // clean vs training input
  std::vector<double> ism;            // per generated sample
  std::vector<double> dfr;
  std::vector<double> quality;
  std::vector<double> psnr_out;  // best match against the clean subject set

  double mean_psnr_in() const;
  double mean_perceptual_in() const;
  double mean_ism() const;
  double mean_dfr() const;
  double mean_quality() const;
  double mean_psnr_out() const;

  nlohmann::json to_json() const;
  static EvalReport from_json(const nlohmann::json& j);
};

// Concatenates the per-item values of several reports (e.g. one per subject).
EvalReport combine_reports(const std::vector<EvalReport>& reports,
                           const std::string& name);

// One row per report: name, PSNR, perceptual, ISM_toy, DFR_toy, PSNR_out.
std::string render_table(const std::vector<EvalReport>& reports);

}  // namespace ddap
