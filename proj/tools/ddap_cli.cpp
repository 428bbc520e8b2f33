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


// Command-line front end: dataset generation, base training, personalization,
// protection, evaluation and report tables.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "ddap/checkpoint.hpp"
#include "ddap/config.hpp"
#include "ddap/dataset.hpp"
#include "ddap/errors.hpp"
#include "ddap/hash.hpp"
#include "ddap/image_io.hpp"
#include "ddap/personalization.hpp"
#include "ddap/pipeline.hpp"
#include "ddap/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kIo = 2, kNumeric = 3 };

struct Flags {
  std::string config;
  std::vector<std::string> sets;
  std::optional<uint64_t> seed;
  std::string out;
  std::optional<std::string> prompt;
  std::optional<std::string> model_version;
  std::optional<std::string> attack;
  std::optional<std::string> mask;
  std::optional<double> tau;
  std::optional<double> eta;
  std::optional<int> epochs;
  bool progress = false;

  std::string data;
  std::string checkpoint;
  std::string classifier;
  std::string images;
  std::optional<int> subject;
  std::string name;
  bool reuse = false;
  std::vector<std::string> reports;
};

void add_config_flags(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "Config file (key = value lines)");
  cmd->add_option("--set", f.sets, "Override a config key, KEY=VALUE")
      ->take_all();
  cmd->add_option("--seed", f.seed, "Seed for this command");
}

std::string data_dir(const Flags& f) {
  if (!f.data.empty()) return f.data;
  if (const char* env = std::getenv("DDAP_DATA_DIR")) return env;
  return "data";
}

ddap::RunConfig load_config(const Flags& f) {
  ddap::RunConfig cfg = f.config.empty() ? ddap::RunConfig{}
                                         : ddap::RunConfig::load(f.config);
  for (const auto& kv : f.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      throw ddap::ConfigError("--set expects KEY=VALUE, got '" + kv + "'");
    }
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (f.model_version) cfg.set("model.version", *f.model_version);
  if (f.attack) cfg.set("ddpl.attack", *f.attack);
  if (f.mask) cfg.set("ddpl.mask", *f.mask);
  if (f.tau) cfg.ddpl.tau = *f.tau;
  if (f.eta) cfg.ddpl.eta = *f.eta;
  if (f.epochs) cfg.ddpl.epochs = *f.epochs;
  return cfg;
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ddap::IoError("cannot create '" + dir + "': " + ec.message());
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw ddap::IoError("cannot write " + path);
  out << text;
  if (!out) throw ddap::IoError("failed writing " + path);
}

std::string read_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) return {};
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Hash over the config keys that a trained artefact depends on.
std::string stamp(const ddap::RunConfig& cfg,
                  const std::vector<std::string>& prefixes) {
  std::string text;
  for (const auto& [key, value] : cfg.to_map()) {
    for (const auto& p : prefixes) {
      if (key.rfind(p, 0) == 0) {
        text += key + " = " + value + "\n";
        break;
      }
    }
  }
  return ddap::sha256_hex(text);
}

torch::Tensor subject_split(const ddap::Dataset& ds, int subject,
                            ddap::Split split) {
  if (subject < 0 || subject >= ds.spec.n_subjects) {
    throw ddap::ArgumentError("subject " + std::to_string(subject) +
                              " not in the dataset");
  }
  return ds.images(subject, split);
}

int cmd_generate(const Flags& f) {
  auto cfg = load_config(f);
  if (f.seed) cfg.data_seed = *f.seed;
  const std::string out = f.out.empty() ? data_dir(f) : f.out;
  const auto ds = cfg.dataset();
  ddap::write_dataset(ds, out);
  std::cout << "wrote " << ds.samples.size() << " images to " << out << "\n";
  return kOk;
}

int cmd_train_base(const Flags& f) {
  auto cfg = load_config(f);
  if (f.seed) cfg.base.seed = *f.seed;
  const std::string out = f.out.empty() ? "models" : f.out;
  ensure_dir(out);
  const std::string version = cfg.model_version;
  const std::string ckpt = out + "/base_" + version + ".ckpt";
  const std::string base_stamp =
      stamp(cfg, {"base.", "data.", "model."});
  const std::string base_stamp_file = out + "/base_" + version + ".stamp";
  if (f.reuse && fs::exists(ckpt) && read_text(base_stamp_file) == base_stamp) {
    std::cout << "base " << version << " up to date\n";
  } else {
    auto train = cfg.base;
    train.curve_path = out + "/base_" + version + "_curve.csv";
    train.failure_checkpoint = out + "/base_" + version + ".failed.ckpt";
    auto result = ddap::train_base(cfg.pretraining_dataset(),
                                   ddap::ModelConfig::for_version(version),
                                   train);
    ddap::save_model(result.model, ckpt);
    write_text(base_stamp_file, base_stamp);
    json summary = {{"version", version},
                    {"initial_heldout_loss", result.initial_heldout_loss},
                    {"heldout_loss", result.heldout_loss},
                    {"converged", result.converged}};
    if (f.progress) std::cout << summary.dump() << "\n";
    std::cout << "saved " << ckpt << " (held-out loss "
              << result.initial_heldout_loss << " -> " << result.heldout_loss
              << ")\n";
  }

  const std::string clf_path = out + "/classifier.ckpt";
  const std::string clf_stamp = stamp(cfg, {"classifier.", "data."});
  const std::string clf_stamp_file = out + "/classifier.stamp";
  if (f.reuse && fs::exists(clf_path) &&
      read_text(clf_stamp_file) == clf_stamp) {
    std::cout << "classifier up to date\n";
  } else {
    auto clf = ddap::SubjectClassifier::train(cfg.data, cfg.classifier);
    clf.save(clf_path);
    write_text(clf_stamp_file, clf_stamp);
    std::cout << "saved " << clf_path << "\n";
  }
  return kOk;
}

int cmd_personalize(const Flags& f) {
  auto cfg = load_config(f);
  if (f.prompt) cfg.eval.prompt = *f.prompt;
  const uint64_t seed = f.seed.value_or(cfg.seed);
  auto model = ddap::load_model(f.checkpoint);
  const auto images = ddap::load_image_folder(f.images);
  auto ft = cfg.ddpl.finetune;
  ft.prompt = cfg.eval.prompt;
  const auto stats =
      ddap::finetune(model, images, ft, cfg.eval.finetune_steps, seed);
  const std::string out = f.out.empty() ? "personalized.ckpt" : f.out;
  ddap::save_model(model, out);
  if (f.progress) {
    for (size_t i = 0; i < stats.losses.size(); ++i) {
      std::cout << json{{"step", i}, {"loss", stats.losses[i]}}.dump()
                << "\n";
    }
  }
  std::cout << "saved " << out << "\n";
  return kOk;
}

int cmd_protect(const Flags& f) {
  auto cfg = load_config(f);
  if (f.prompt) cfg.ddpl.finetune.prompt = *f.prompt;
  if (f.seed) cfg.ddpl.seed = *f.seed;
  auto base = ddap::load_model(f.checkpoint);
  if (base.config().version != cfg.model_version) {
    throw ddap::ConfigError("checkpoint is model " + base.config().version +
                            " but the run asks for " + cfg.model_version);
  }
  torch::Tensor clean;
  if (!f.images.empty()) {
    clean = ddap::load_image_folder(f.images);
  } else if (f.subject) {
    clean = subject_split(ddap::load_dataset(data_dir(f)), *f.subject,
                          ddap::Split::kProtect);
  } else {
    throw ddap::ArgumentError("protect needs --images or --subject");
  }

  const std::string out = f.out.empty() ? "protected" : f.out;
  ensure_dir(out);
  std::ofstream log(out + "/progress.jsonl");
  if (!log) throw ddap::IoError("cannot write " + out + "/progress.jsonl");
  auto sink = [&](const ddap::EpochRecord& r) {
    const auto line = ddap::to_json(r).dump();
    log << line << "\n" << std::flush;
    if (f.progress) std::cout << line << "\n" << std::flush;
  };
  cfg.ddpl.failure_path = out + "/failure.ckpt";
  const auto result = ddap::protect(base, clean, cfg.ddpl, {}, sink);
  ddap::write_image_folder(result.images, out);
  if (result.aspl.mask) {
    ddap::write_image_folder(
        result.aspl.mask->mask.to(torch::kDouble).unsqueeze(1).expand(
            {-1, 3, -1, -1}),
        out + "/mask", "mask");
  }
  cfg.save(out + "/run.cfg");
  json audit = ddap::to_json(result.audit);
  audit["config_hash"] = cfg.hash();
  write_text(out + "/audit.json", audit.dump(2) + "\n");
  std::cout << "protected " << result.images.size(0) << " images -> " << out
            << " (max delta " << result.audit.max_delta * 255.0
            << "/255)\n";
  return kOk;
}

int cmd_evaluate(const Flags& f) {
  auto cfg = load_config(f);
  if (f.prompt) cfg.eval.prompt = *f.prompt;
  if (f.model_version) cfg.eval.model_version = *f.model_version;
  const uint64_t seed = f.seed.value_or(cfg.seed);
  if (!f.subject) throw ddap::ArgumentError("evaluate needs --subject");
  const auto ds = ddap::load_dataset(data_dir(f));
  ddap::EvalInputs in;
  in.subject = *f.subject;
  in.clean = subject_split(ds, in.subject, ddap::Split::kProtect);
  in.references = subject_split(ds, in.subject, ddap::Split::kReference);
  in.train = f.images.empty() ? in.clean : ddap::load_image_folder(f.images);
  if (!in.train.sizes().equals(in.clean.sizes())) {
    throw ddap::ArgumentError(
        "training images do not match the subject's protect split");
  }
  auto attacker = ddap::load_model(f.checkpoint);
  if (attacker.config().version != cfg.eval.model_version) {
    throw ddap::ConfigError("checkpoint is model " +
                            attacker.config().version + " but eval asks for " +
                            cfg.eval.model_version);
  }
  const auto clf = ddap::SubjectClassifier::load(f.classifier);
  auto report = ddap::evaluate_subject(attacker, attacker, clf, in, cfg.eval,
                                       cfg.ddpl.finetune, seed);
  report.name = f.name.empty() ? "run" : f.name;
  report.train_prompt = cfg.ddpl.finetune.prompt;
  report.attack = ddap::to_string(cfg.ddpl.mode);
  report.mask = cfg.ddpl.use_mask ? "on" : "off";
  report.config_hash = cfg.hash();
  const std::string text = report.to_json().dump(2) + "\n";
  if (f.out.empty()) {
    std::cout << text;
  } else {
    write_text(f.out, text);
    std::cout << ddap::render_table({report});
  }
  return kOk;
}

int cmd_report(const Flags& f) {
  std::vector<ddap::EvalReport> reports;
  for (const auto& path : f.reports) {
    const auto text = read_text(path);
    if (text.empty()) throw ddap::IoError("cannot read report " + path);
    json j;
    try {
      j = json::parse(text);
    } catch (const json::exception& e) {
      throw ddap::IoError("malformed report " + path + ": " + e.what());
    }
    reports.push_back(ddap::EvalReport::from_json(j));
  }
  const auto table = ddap::render_table(reports);
  if (!f.out.empty()) write_text(f.out, table);
  std::cout << table;
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Anti-personalization toolkit for a miniature latent "
               "diffusion model"};
  app.require_subcommand(1);
  Flags f;

  auto* gen = app.add_subcommand("generate-data", "Render the toy dataset");
  add_config_flags(gen, f);
  gen->add_option("--out", f.out, "Output directory (default $DDAP_DATA_DIR)");

  auto* train = app.add_subcommand(
      "train-base", "Pretrain a base model and the evaluation classifier");
  add_config_flags(train, f);
  train->add_option("--out", f.out, "Output directory")->default_str("models");
  train->add_option("--model-version", f.model_version, "vA or vB");
  train->add_flag("--reuse", f.reuse,
                  "Skip artefacts whose config stamp is unchanged");
  train->add_flag("--progress", f.progress, "JSON lines on stdout");

  auto* pers = app.add_subcommand("personalize",
                                  "Fine-tune a model on an image folder");
  add_config_flags(pers, f);
  pers->add_option("--checkpoint", f.checkpoint, "Base model")->required();
  pers->add_option("--images", f.images, "Image folder")->required();
  pers->add_option("--prompt", f.prompt, "Training prompt");
  pers->add_option("--out", f.out, "Output checkpoint");
  pers->add_flag("--progress", f.progress, "JSON lines on stdout");

  auto* prot = app.add_subcommand("protect", "Protect a subject's images");
  add_config_flags(prot, f);
  prot->add_option("--checkpoint", f.checkpoint, "Surrogate base model")
      ->required();
  prot->add_option("--images", f.images, "Image folder to protect");
  prot->add_option("--subject", f.subject,
                   "Protect split of this subject from the dataset");
  prot->add_option("--data", f.data, "Dataset root (default $DDAP_DATA_DIR)");
  prot->add_option("--out", f.out, "Output directory");
  prot->add_option("--prompt", f.prompt, "Prompt the protector assumes");
  prot->add_option("--model-version", f.model_version,
                   "Expected surrogate version");
  prot->add_option("--attack", f.attack, "spl, fpl or ddap");
  prot->add_option("--mask", f.mask, "on or off");
  prot->add_option("--tau", f.tau, "Mask threshold");
  prot->add_option("--eta", f.eta, "l-inf budget");
  prot->add_option("--epochs", f.epochs, "Alternation epochs");
  prot->add_flag("--progress", f.progress, "JSON lines on stdout");

  auto* eval = app.add_subcommand(
      "evaluate", "Fine-tune a fresh model on images and score its samples");
  add_config_flags(eval, f);
  eval->add_option("--checkpoint", f.checkpoint, "Attacker base model")
      ->required();
  eval->add_option("--classifier", f.classifier, "Classifier checkpoint")
      ->required();
  eval->add_option("--subject", f.subject, "Subject id")->required();
  eval->add_option("--images", f.images,
                   "Training images (default: the clean protect split)");
  eval->add_option("--data", f.data, "Dataset root (default $DDAP_DATA_DIR)");
  eval->add_option("--prompt", f.prompt, "Attacker prompt");
  eval->add_option("--model-version", f.model_version,
                   "Expected attacker version");
  eval->add_option("--name", f.name, "Row name in tables");
  eval->add_option("--out", f.out, "Report JSON path");

  auto* rep = app.add_subcommand("report", "Render reports as a table");
  rep->add_option("reports", f.reports, "Report JSON files")->required();
  rep->add_option("--out", f.out, "Also write the table here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*gen) return cmd_generate(f);
    if (*train) return cmd_train_base(f);
    if (*pers) return cmd_personalize(f);
    if (*prot) return cmd_protect(f);
    if (*eval) return cmd_evaluate(f);
    if (*rep) return cmd_report(f);
  } catch (const ddap::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIo;
  } catch (const ddap::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kNumeric;
  } catch (const ddap::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const ddap::ArgumentError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kNumeric;
  }
  return kUsage;
}
