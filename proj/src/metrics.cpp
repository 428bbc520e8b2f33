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

#include "ddap/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <sstream>

#include "ddap/checkpoint.hpp"
#include "ddap/errors.hpp"
#include "ddap/rng.hpp"

namespace ddap {

namespace F = torch::nn::functional;

namespace {

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return std::nan("");
  return std::accumulate(v.begin(), v.end(), 0.0) / double(v.size());
}

std::vector<double> to_vector(const torch::Tensor& t) {
  auto c = t.to(torch::kDouble).contiguous().reshape({-1});
  return {c.data_ptr<double>(), c.data_ptr<double>() + c.numel()};
}

void check_same_shape(const torch::Tensor& a, const torch::Tensor& b,
                      const char* what) {
  if (!a.sizes().equals(b.sizes())) {
    throw ArgumentError(std::string(what) + ": shape " + c10::str(a.sizes()) +
                        " vs " + c10::str(b.sizes()));
  }
}

double psnr_from_mse(double mse) {
  if (mse <= 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

torch::Tensor as_batch(const torch::Tensor& x) {
  return x.dim() == 3 ? x.unsqueeze(0) : x;
}

}  // namespace

double psnr(const torch::Tensor& a, const torch::Tensor& b) {
  check_same_shape(a, b, "psnr");
  auto d = a.to(torch::kDouble) - b.to(torch::kDouble);
  return psnr_from_mse(d.pow(2).mean().item<double>());
}

std::vector<double> psnr_per_image(const torch::Tensor& a,
                                   const torch::Tensor& b) {
  check_same_shape(a, b, "psnr");
  auto d = (a.to(torch::kDouble) - b.to(torch::kDouble)).flatten(1);
  std::vector<double> out;
  for (double mse : to_vector(d.pow(2).mean(1))) {
    out.push_back(psnr_from_mse(mse));
  }
  return out;
}

std::vector<double> perceptual_per_image(const torch::Tensor& a,
                                         const torch::Tensor& b,
                                         const TinyLdm& reference) {
  check_same_shape(a, b, "perceptual_distance");
  torch::NoGradGuard no_grad;
  auto fa = reference.encoder_features(as_batch(a));
  auto fb = reference.encoder_features(as_batch(b));
  auto total = torch::zeros({as_batch(a).size(0)}, torch::kDouble);
  for (size_t s = 0; s < fa.size(); ++s) {
    auto na = F::normalize(fa[s].to(torch::kDouble),
                           F::NormalizeFuncOptions().dim(1).eps(1e-10));
    auto nb = F::normalize(fb[s].to(torch::kDouble),
                           F::NormalizeFuncOptions().dim(1).eps(1e-10));
    total += (na - nb).pow(2).flatten(1).mean(1);
  }
  return to_vector(total / double(fa.size()));
}

double perceptual_distance(const torch::Tensor& a, const torch::Tensor& b,
                           const TinyLdm& reference) {
  return mean_of(perceptual_per_image(a, b, reference));
}

ClassifierNetImpl::ClassifierNetImpl(int n_classes, int embedding_dim) {
  using torch::nn::Conv2dOptions;
  c1 = register_module(
      "c1", torch::nn::Conv2d(Conv2dOptions(3, 16, 4).stride(2).padding(1)));
  c2 = register_module(
      "c2", torch::nn::Conv2d(Conv2dOptions(16, 32, 4).stride(2).padding(1)));
  c3 = register_module(
      "c3", torch::nn::Conv2d(Conv2dOptions(32, 64, 4).stride(2).padding(1)));
  c4 = register_module(
      "c4", torch::nn::Conv2d(Conv2dOptions(64, 64, 4).stride(2).padding(1)));
  embed = register_module("embed", torch::nn::Linear(64, embedding_dim));
  head = register_module("head", torch::nn::Linear(embedding_dim, n_classes));
}

std::pair<torch::Tensor, torch::Tensor> ClassifierNetImpl::forward(
    const torch::Tensor& x) {
  auto h = F::silu(c1(x * 2.0 - 1.0));
  h = F::silu(c2(h));
  h = F::silu(c3(h));
  h = F::silu(c4(h));
  auto e = embed(h.mean({2, 3}));
  return {e, head(F::silu(e))};
}

SubjectClassifier SubjectClassifier::train(const DatasetSpec& spec,
                                           const ClassifierConfig& config) {
  torch::manual_seed(config.seed);
  const int n = spec.n_subjects;
  const int s = spec.image_size;
  std::mt19937_64 rng(mix_seed(config.seed, 1));
  std::uniform_real_distribution<double> u(0.0, 1.0);

  std::vector<torch::Tensor> images;
  std::vector<int64_t> labels;
  for (int k = 0; k < n; ++k) {
    const auto style = subject_style(spec, k);
    for (int i = 0; i < config.renders_per_subject; ++i) {
      const Pose pose = random_pose(spec, style, rng);
      images.push_back(render_subject(spec, k, pose, rng()).image);
      labels.push_back(k);
    }
  }
  auto gen = make_generator(mix_seed(config.seed, 2));
  for (int i = 0; i < config.negatives; ++i) {
    torch::Tensor img;
    switch (i % 4) {
      case 0:
      case 1:
        img = render_background(spec, rng());
        break;
      case 2:
        img = torch::rand({3, s, s}, gen, torch::dtype(torch::kDouble));
        break;
      default:
        img = (0.5 + (0.1 + 0.3 * u(rng)) *
                         torch::randn({3, s, s}, gen,
                                      torch::dtype(torch::kDouble)))
                  .clamp(0.0, 1.0);
    }
    images.push_back(img);
    labels.push_back(n);
  }
  auto x_all = torch::stack(images).to(torch::kFloat);
  auto y_all = torch::tensor(labels, torch::kLong);
  const int64_t total = x_all.size(0);

  SubjectClassifier clf;
  clf.n_subjects_ = n;
  clf.embedding_dim_ = config.embedding_dim;
  clf.net_ = ClassifierNet(n + 1, config.embedding_dim);
  torch::optim::Adam opt(clf.net_->parameters(),
                         torch::optim::AdamOptions(config.lr));
  for (int step = 0; step < config.steps; ++step) {
    auto idx = torch::randint(0, total, {config.batch_size}, gen, torch::kLong);
    auto x = x_all.index_select(0, idx);
    auto y = y_all.index_select(0, idx);
    auto flip = torch::rand({config.batch_size, 1, 1, 1}, gen) < 0.5;
    x = torch::where(flip, x.flip({3}), x);
    auto sigma = 0.04 * torch::rand({config.batch_size, 1, 1, 1}, gen);
    x = (x + sigma * torch::randn(x.sizes(), gen)).clamp(0.0, 1.0);
    auto logits = clf.net_->forward(x).second;
    auto loss = F::cross_entropy(logits, y);
    opt.zero_grad();
    loss.backward();
    opt.step();
  }
  clf.net_->eval();
  return clf;
}

void SubjectClassifier::require_trained() const {
  if (!trained()) throw StateError("subject classifier is not trained");
}

torch::Tensor SubjectClassifier::embed(const torch::Tensor& x) const {
  require_trained();
  torch::NoGradGuard no_grad;
  return net_.ptr()->forward(as_batch(x).to(torch::kFloat)).first;
}

torch::Tensor SubjectClassifier::probabilities(const torch::Tensor& x) const {
  require_trained();
  torch::NoGradGuard no_grad;
  auto logits = net_.ptr()->forward(as_batch(x).to(torch::kFloat)).second;
  return torch::softmax(logits.to(torch::kDouble), 1);
}

std::vector<int> SubjectClassifier::predict(const torch::Tensor& x) const {
  auto p = probabilities(x).argmax(1);
  std::vector<int> out;
  for (int64_t i = 0; i < p.numel(); ++i) out.push_back(int(p[i].item<int64_t>()));
  return out;
}

void SubjectClassifier::save(const std::string& path) const {
  require_trained();
  TensorArchive archive;
  archive.metadata["kind"] = "subject_classifier";
  archive.metadata["n_subjects"] = n_subjects_;
  archive.metadata["embedding_dim"] = embedding_dim_;
  for (const auto& item : net_->named_parameters(true)) {
    archive.tensors.emplace_back(item.key(), item.value().detach());
  }
  save_archive(archive, path);
}

SubjectClassifier SubjectClassifier::load(const std::string& path) {
  auto archive = load_archive(path);
  if (archive.metadata.value("kind", "") != "subject_classifier") {
    throw IoError(path + " is not a subject classifier archive");
  }
  SubjectClassifier clf;
  clf.n_subjects_ = archive.metadata.at("n_subjects").get<int>();
  clf.embedding_dim_ = archive.metadata.at("embedding_dim").get<int>();
  clf.net_ = ClassifierNet(clf.n_subjects_ + 1, clf.embedding_dim_);
  torch::NoGradGuard no_grad;
  for (auto& item : clf.net_->named_parameters(true)) {
    item.value().copy_(archive.at(item.key()));
  }
  clf.net_->eval();
  return clf;
}

std::vector<double> ism_per_image(const SubjectClassifier& clf,
                                  const torch::Tensor& generated,
                                  const torch::Tensor& references) {
  auto ref = clf.embed(references).to(torch::kDouble).mean(0, true);
  auto e = clf.embed(generated).to(torch::kDouble);
  return to_vector(F::cosine_similarity(
      e, ref.expand_as(e), F::CosineSimilarityFuncOptions().dim(1).eps(1e-12)));
}

double ism_toy(const SubjectClassifier& clf, const torch::Tensor& generated,
               const torch::Tensor& references) {
  return mean_of(ism_per_image(clf, generated, references));
}

std::vector<double> confidence_per_image(const SubjectClassifier& clf,
                                         const torch::Tensor& generated) {
  auto p = clf.probabilities(generated);
  return to_vector(std::get<0>(p.narrow(1, 0, clf.n_subjects()).max(1)));
}

std::vector<double> dfr_per_image(const SubjectClassifier& clf,
                                  const torch::Tensor& generated) {
  std::vector<double> out;
  for (double c : confidence_per_image(clf, generated)) {
    out.push_back(c < 0.5 ? 1.0 : 0.0);
  }
  return out;
}

double dfr_toy(const SubjectClassifier& clf, const torch::Tensor& generated) {
  return mean_of(dfr_per_image(clf, generated));
}

nlohmann::json to_json(const BudgetReport& r) {
  return {{"eta", r.eta},
          {"max_delta", r.max_delta},
          {"boundary_fraction", r.boundary_fraction},
          {"pass", r.pass}};
}

BudgetReport budget_audit(const torch::Tensor& x_clean,
                          const torch::Tensor& x_adv, double eta) {
  check_same_shape(x_clean, x_adv, "budget_audit");
  auto d = (x_adv.to(torch::kDouble) - x_clean.to(torch::kDouble)).abs();
  BudgetReport r;
  r.eta = eta;
  r.max_delta = d.numel() ? d.max().item<double>() : 0.0;
  r.boundary_fraction =
      d.numel() ? (d >= eta - 1e-8).to(torch::kDouble).mean().item<double>()
                : 0.0;
  r.pass = r.max_delta <= eta + 1e-8;
  return r;
}

double EvalReport::mean_psnr_in() const { return mean_of(psnr_in); }
double EvalReport::mean_perceptual_in() const { return mean_of(perceptual_in); }
double EvalReport::mean_ism() const { return mean_of(ism); }
double EvalReport::mean_dfr() const { return mean_of(dfr); }
double EvalReport::mean_quality() const { return mean_of(quality); }
double EvalReport::mean_psnr_out() const { return mean_of(psnr_out); }

nlohmann::json EvalReport::to_json() const {
  nlohmann::json j;
  j["name"] = name;
  j["train_prompt"] = train_prompt;
  j["eval_prompt"] = eval_prompt;
  j["model_version"] = model_version;
  j["attack"] = attack;
  j["mask"] = mask;
  j["config_hash"] = config_hash;
  j["subjects"] = subjects;
  j["per_item"] = {{"psnr_in", psnr_in},   {"perceptual_in", perceptual_in},
                   {"ism_toy", ism},       {"dfr_toy", dfr},
                   {"quality_toy", quality}, {"psnr_out", psnr_out}};
  j["aggregate"] = {{"psnr_in", mean_psnr_in()},
                    {"perceptual_in", mean_perceptual_in()},
                    {"ism_toy", mean_ism()},
                    {"dfr_toy", mean_dfr()},
                    {"quality_toy", mean_quality()},
                    {"psnr_out", mean_psnr_out()}};
  return j;
}

EvalReport EvalReport::from_json(const nlohmann::json& j) {
  EvalReport r;
  try {
    r.name = j.at("name").get<std::string>();
    r.train_prompt = j.at("train_prompt").get<std::string>();
    r.eval_prompt = j.at("eval_prompt").get<std::string>();
    r.model_version = j.at("model_version").get<std::string>();
    r.attack = j.at("attack").get<std::string>();
    r.mask = j.at("mask").get<std::string>();
    r.config_hash = j.at("config_hash").get<std::string>();
    r.subjects = j.at("subjects").get<std::vector<int>>();
    const auto& p = j.at("per_item");
    r.psnr_in = p.at("psnr_in").get<std::vector<double>>();
    r.perceptual_in = p.at("perceptual_in").get<std::vector<double>>();
    r.ism = p.at("ism_toy").get<std::vector<double>>();
    r.dfr = p.at("dfr_toy").get<std::vector<double>>();
    r.quality = p.at("quality_toy").get<std::vector<double>>();
    r.psnr_out = p.at("psnr_out").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed evaluation report: ") + e.what());
  }
  return r;
}

EvalReport combine_reports(const std::vector<EvalReport>& reports,
                           const std::string& name) {
  EvalReport out;
  out.name = name;
  auto append = [](std::vector<double>& dst, const std::vector<double>& src) {
    dst.insert(dst.end(), src.begin(), src.end());
  };
  for (const auto& r : reports) {
    if (out.subjects.empty()) {
      out.train_prompt = r.train_prompt;
      out.eval_prompt = r.eval_prompt;
      out.model_version = r.model_version;
      out.attack = r.attack;
      out.mask = r.mask;
      out.config_hash = r.config_hash;
    }
    out.subjects.insert(out.subjects.end(), r.subjects.begin(), r.subjects.end());
    append(out.psnr_in, r.psnr_in);
    append(out.perceptual_in, r.perceptual_in);
    append(out.ism, r.ism);
    append(out.dfr, r.dfr);
    append(out.quality, r.quality);
    append(out.psnr_out, r.psnr_out);
  }
  return out;
}

std::string render_table(const std::vector<EvalReport>& reports) {
  std::ostringstream os;
  char line[256];
  std::snprintf(line, sizeof(line), "%-28s %8s %11s %8s %8s %9s\n", "run",
                "PSNR", "perceptual", "ISM_toy", "DFR_toy", "PSNR_out");
  os << line;
  for (const auto& r : reports) {
    std::snprintf(line, sizeof(line), "%-28s %8.2f %11.5f %8.4f %8.4f %9.2f\n",
                  r.name.c_str(), r.mean_psnr_in(), r.mean_perceptual_in(),
                  r.mean_ism(), r.mean_dfr(), r.mean_psnr_out());
    os << line;
  }
  return os.str();
}

}  // namespace ddap
