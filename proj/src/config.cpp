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

#include "ddap/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include "ddap/errors.hpp"
#include "ddap/hash.hpp"

namespace ddap {

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}
std::string fmt(int v) { return std::to_string(v); }
std::string fmt(uint64_t v) { return std::to_string(v); }
std::string fmt(bool v) { return v ? "true" : "false"; }
std::string fmt(const std::string& v) { return v; }

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& v) {
  throw ConfigError("bad value '" + v + "' for " + key);
}

void parse(const std::string& key, const std::string& v, double& out) {
  try {
    size_t pos = 0;
    out = std::stod(v, &pos);
    if (pos != v.size()) bad_value(key, v);
  } catch (const std::logic_error&) {
    bad_value(key, v);
  }
}
void parse(const std::string& key, const std::string& v, int& out) {
  auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size()) bad_value(key, v);
}
void parse(const std::string& key, const std::string& v, uint64_t& out) {
  auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size()) bad_value(key, v);
}
void parse(const std::string& key, const std::string& v, bool& out) {
  if (v == "true" || v == "on" || v == "1") {
    out = true;
  } else if (v == "false" || v == "off" || v == "0") {
    out = false;
  } else {
    bad_value(key, v);
  }
}
void parse(const std::string&, const std::string& v, std::string& out) {
  out = v;
}

struct Field {
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

template <typename T>
Field field(const std::string& key, T RunConfig::*section_or_value) {
  return {[=](const RunConfig& c) { return fmt(c.*section_or_value); },
          [=](RunConfig& c, const std::string& v) {
            parse(key, v, c.*section_or_value);
          }};
}

// Member of a nested struct, e.g. &RunConfig::ddpl then &DDPLConfig::epochs.
template <typename S, typename T>
Field field(const std::string& key, S RunConfig::*section, T S::*member) {
  return {[=](const RunConfig& c) { return fmt(c.*section.*member); },
          [=](RunConfig& c, const std::string& v) {
            parse(key, v, c.*section.*member);
          }};
}

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> kFields = [] {
    std::map<std::string, Field> f;
    auto add = [&](const std::string& key, auto&&... path) {
      f.emplace(key, field(key, path...));
    };
    add("seed", &RunConfig::seed);
    add("data.seed", &RunConfig::data_seed);
    add("data.n_subjects", &RunConfig::data, &DatasetSpec::n_subjects);
    add("data.images_per_subject", &RunConfig::data,
        &DatasetSpec::images_per_subject);
    add("data.reference_per_subject", &RunConfig::data,
        &DatasetSpec::reference_per_subject);
    add("data.image_size", &RunConfig::data, &DatasetSpec::image_size);
    add("data.background_variation", &RunConfig::data,
        &DatasetSpec::background_variation);
    add("data.texture_seed", &RunConfig::data, &DatasetSpec::texture_seed);
    f.emplace("data.placement",
              Field{[](const RunConfig& c) {
                      return std::string(c.data.placement == Placement::kLeftHalf
                                             ? "left_half"
                                             : "anywhere");
                    },
                    [](RunConfig& c, const std::string& v) {
                      if (v == "left_half") {
                        c.data.placement = Placement::kLeftHalf;
                      } else if (v == "anywhere") {
                        c.data.placement = Placement::kAnywhere;
                      } else {
                        bad_value("data.placement", v);
                      }
                    }});
    add("model.version", &RunConfig::model_version);

    add("base.seed", &RunConfig::base, &BaseTrainConfig::seed);
    add("base.data_seed", &RunConfig::base_data_seed);
    add("base.images_per_subject", &RunConfig::base_images_per_subject);
    add("base.ae_steps", &RunConfig::base, &BaseTrainConfig::ae_steps);
    add("base.ae_batch", &RunConfig::base, &BaseTrainConfig::ae_batch);
    add("base.ae_lr", &RunConfig::base, &BaseTrainConfig::ae_lr);
    add("base.denoiser_steps", &RunConfig::base,
        &BaseTrainConfig::denoiser_steps);
    add("base.denoiser_batch", &RunConfig::base,
        &BaseTrainConfig::denoiser_batch);
    add("base.denoiser_lr", &RunConfig::base, &BaseTrainConfig::denoiser_lr);
    add("base.word_dropout", &RunConfig::base, &BaseTrainConfig::word_dropout);
    add("base.max_heldout_loss", &RunConfig::base,
        &BaseTrainConfig::max_heldout_loss);

    add("classifier.seed", &RunConfig::classifier, &ClassifierConfig::seed);
    add("classifier.steps", &RunConfig::classifier, &ClassifierConfig::steps);
    add("classifier.batch_size", &RunConfig::classifier,
        &ClassifierConfig::batch_size);
    add("classifier.lr", &RunConfig::classifier, &ClassifierConfig::lr);
    add("classifier.embedding_dim", &RunConfig::classifier,
        &ClassifierConfig::embedding_dim);
    add("classifier.renders_per_subject", &RunConfig::classifier,
        &ClassifierConfig::renders_per_subject);
    add("classifier.negatives", &RunConfig::classifier,
        &ClassifierConfig::negatives);

    add("ddpl.epochs", &RunConfig::ddpl, &DDPLConfig::epochs);
    add("ddpl.surrogate_steps", &RunConfig::ddpl, &DDPLConfig::surrogate_steps);
    add("ddpl.perturb_steps", &RunConfig::ddpl, &DDPLConfig::perturb_steps);
    add("ddpl.gamma_f", &RunConfig::ddpl, &DDPLConfig::gamma_f);
    add("ddpl.gamma_l", &RunConfig::ddpl, &DDPLConfig::gamma_l);
    add("ddpl.eta", &RunConfig::ddpl, &DDPLConfig::eta);
    add("ddpl.xi", &RunConfig::ddpl, &DDPLConfig::xi);
    add("ddpl.eps_f", &RunConfig::ddpl, &DDPLConfig::eps_f);
    add("ddpl.block_size", &RunConfig::ddpl, &DDPLConfig::block_size);
    add("ddpl.weight_alpha", &RunConfig::ddpl, &DDPLConfig::weight_alpha);
    add("ddpl.weight_beta", &RunConfig::ddpl, &DDPLConfig::weight_beta);
    add("ddpl.order_swap", &RunConfig::ddpl, &DDPLConfig::order_swap);
    add("ddpl.mask_refresh_epochs", &RunConfig::ddpl,
        &DDPLConfig::mask_refresh_epochs);
    f.emplace("ddpl.attack",
              Field{[](const RunConfig& c) {
                      return std::string(to_string(c.ddpl.mode));
                    },
                    [](RunConfig& c, const std::string& v) {
                      try {
                        c.ddpl.mode = parse_attack_mode(v);
                      } catch (const ArgumentError&) {
                        bad_value("ddpl.attack", v);
                      }
                    }});
    add("ddpl.mask", &RunConfig::ddpl, &DDPLConfig::use_mask);
    add("ddpl.tau", &RunConfig::ddpl, &DDPLConfig::tau);
    add("ddpl.mask_finetune_steps", &RunConfig::ddpl,
        &DDPLConfig::mask_finetune_steps);
    add("ddpl.mask_inversion_steps", &RunConfig::ddpl,
        &DDPLConfig::mask_inversion_steps);

    // The protector's fine-tune settings (surrogate and mask model).
    f.emplace("finetune.prompt",
              Field{[](const RunConfig& c) { return c.ddpl.finetune.prompt; },
                    [](RunConfig& c, const std::string& v) {
                      c.ddpl.finetune.prompt = v;
                    }});
    auto ft = [&](const std::string& key, auto member) {
      f.emplace(key, Field{[=](const RunConfig& c) {
                             return fmt(c.ddpl.finetune.*member);
                           },
                           [=](RunConfig& c, const std::string& v) {
                             parse(key, v, c.ddpl.finetune.*member);
                           }});
    };
    ft("finetune.lr", &FinetuneConfig::lr);
    ft("finetune.batch_size", &FinetuneConfig::batch_size);
    ft("finetune.prior_preservation", &FinetuneConfig::prior_preservation);
    ft("finetune.prior_weight", &FinetuneConfig::prior_weight);
    ft("finetune.class_prompt", &FinetuneConfig::class_prompt);

    add("eval.prompt", &RunConfig::eval, &EvalSettings::prompt);
    add("eval.model_version", &RunConfig::eval, &EvalSettings::model_version);
    add("eval.finetune_steps", &RunConfig::eval, &EvalSettings::finetune_steps);
    add("eval.samples", &RunConfig::eval, &EvalSettings::samples);
    add("eval.ddim_steps", &RunConfig::eval, &EvalSettings::ddim_steps);
    f.emplace("eval.subjects",
              Field{[](const RunConfig& c) {
                      std::string s;
                      for (size_t i = 0; i < c.subjects.size(); ++i) {
                        if (i) s += ",";
                        s += std::to_string(c.subjects[i]);
                      }
                      return s;
                    },
                    [](RunConfig& c, const std::string& v) {
                      std::vector<int> out;
                      std::stringstream ss(v);
                      std::string item;
                      while (std::getline(ss, item, ',')) {
                        int k = 0;
                        parse("eval.subjects", trim(item), k);
                        out.push_back(k);
                      }
                      if (out.empty()) bad_value("eval.subjects", v);
                      c.subjects = out;
                    }});
    return f;
  }();
  return kFields;
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
  auto it = fields().find(key);
  if (it == fields().end()) throw ConfigError("unknown config key '" + key + "'");
  it->second.set(*this, trim(value));
}

std::string RunConfig::get(const std::string& key) const {
  auto it = fields().find(key);
  if (it == fields().end()) throw ConfigError("unknown config key '" + key + "'");
  return it->second.get(*this);
}

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> kKeys = [] {
    std::vector<std::string> k;
    for (const auto& [key, f] : fields()) k.push_back(key);
    return k;
  }();
  return kKeys;
}

std::map<std::string, std::string> RunConfig::to_map() const {
  std::map<std::string, std::string> m;
  for (const auto& [key, f] : fields()) m[key] = f.get(*this);
  return m;
}

std::string RunConfig::canonical_text() const {
  std::string out;
  for (const auto& [key, value] : to_map()) out += key + " = " + value + "\n";
  return out;
}

std::string RunConfig::hash() const { return sha256_hex(canonical_text()); }

RunConfig RunConfig::parse(const std::string& text) {
  RunConfig c;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash_pos = line.find('#');
    if (hash_pos != std::string::npos) line = line.substr(0, hash_pos);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(lineno) +
                        ": expected 'key = value'");
    }
    c.set(trim(line.substr(0, eq)), line.substr(eq + 1));
  }
  return c;
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot read config " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse(ss.str());
}

void RunConfig::save(const std::string& path) const {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write config " + path);
  f << canonical_text();
  if (!f) throw IoError("failed writing config " + path);
}

Dataset RunConfig::pretraining_dataset() const {
  DatasetSpec spec = data;
  spec.images_per_subject = base_images_per_subject;
  spec.reference_per_subject = 0;
  return generate_dataset(spec, base_data_seed);
}

}  // namespace ddap
