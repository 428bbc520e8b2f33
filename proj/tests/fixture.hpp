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

#include <map>
#include <string>

#include "ddap/checkpoint.hpp"
#include "ddap/config.hpp"
#include "ddap/metrics.hpp"
#include "ddap/tiny_ldm.hpp"

// Trained artefacts produced by the ctest fixture (`ddap_cli train-base`
// on configs/desk.cfg). Loaded once per process.
namespace ddap::testing {

inline const std::string& fixture_dir() {
  static const std::string dir = DDAP_FIXTURE_DIR;
  return dir;
}

inline const RunConfig& desk_config() {
  static const RunConfig cfg = RunConfig::load(DDAP_CONFIG_PATH);
  return cfg;
}

inline const Dataset& desk_dataset() {
  static const Dataset ds = desk_config().dataset();
  return ds;
}

inline const TinyLdm& trained_model(const std::string& version = "vA") {
  static std::map<std::string, TinyLdm> cache;
  auto it = cache.find(version);
  if (it == cache.end()) {
    it = cache
             .emplace(version, load_model(fixture_dir() + "/base_" + version +
                                          ".ckpt"))
             .first;
  }
  return it->second;
}

inline const SubjectClassifier& trained_classifier() {
  static const SubjectClassifier clf =
      SubjectClassifier::load(fixture_dir() + "/classifier.ckpt");
  return clf;
}

}  // namespace ddap::testing
