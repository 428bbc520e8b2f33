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
#include <map>
#include <string>
#include <vector>

#include "ddap/dataset.hpp"
#include "ddap/ddpl.hpp"
#include "ddap/metrics.hpp"
#include "ddap/training.hpp"

namespace ddap {

struct EvalSettings {
  std::string prompt = "a photo of sks subject";  // attacker's prompt
  std::string model_version = "vA";               // attacker's base model
  int finetune_steps = 200;
  int samples = 16;
  int ddim_steps = 20;
};

// Everything a run depends on. Serializes to flat "section.key = value"
// lines; the canonical form (sorted keys, fixed number formatting) is hashed
// to identify the run.
struct RunConfig {
  uint64_t seed = 0;
  DatasetSpec data;
  uint64_t data_seed = 11;
  std::string model_version = "vA";  // protector's surrogate
  BaseTrainConfig base;
  // The base model is pretrained on its own renders of the same subjects,
  // disjoint from the run dataset.
  uint64_t base_data_seed = 1011;
  int base_images_per_subject = 32;
  ClassifierConfig classifier;
  DDPLConfig ddpl;
  EvalSettings eval;
  std::vector<int> subjects = {0, 1, 2, 3};

  // Sets one dotted key from its text form. Throws ConfigError on unknown
  // keys or unparsable values.
  void set(const std::string& key, const std::string& value);
  std::string get(const std::string& key) const;
  static const std::vector<std::string>& keys();

  std::map<std::string, std::string> to_map() const;
  std::string canonical_text() const;
  std::string hash() const;

  // Parses "key = value" lines on top of the defaults. '#' starts a comment.
  static RunConfig parse(const std::string& text);
  static RunConfig load(const std::string& path);
  void save(const std::string& path) const;

  Dataset dataset() const { return generate_dataset(data, data_seed); }
  Dataset pretraining_dataset() const;
};

}  // namespace ddap
