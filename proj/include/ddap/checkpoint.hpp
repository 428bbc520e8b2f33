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
#include <utility>
#include <vector>

#include <torch/torch.h>

#include "json.hpp"
#include "ddap/tiny_ldm.hpp"

namespace ddap {

// Self-describing tensor container:
//
//   "DDAPCKPT" | u32 format version | u64 header length | JSON header | blob
//
// The JSON header carries free-form metadata plus, for every tensor, its
// name, dtype, shape and byte offset into the blob. Tensor bytes are
// little-endian and stored verbatim, so save/load round-trips bit-exactly.
struct TensorArchive {
  nlohmann::json metadata = nlohmann::json::object();
  std::vector<std::pair<std::string, torch::Tensor>> tensors;

  const torch::Tensor& at(const std::string& name) const;
};

void save_archive(const TensorArchive& archive, const std::string& path);
TensorArchive load_archive(const std::string& path);

// Model checkpoints add the schedule (as a float64 tensor), vocabulary,
// latent scale, version tag and architecture to the archive.
void save_model(const TinyLdm& model, const std::string& path);
TinyLdm load_model(const std::string& path);

}  // namespace ddap
