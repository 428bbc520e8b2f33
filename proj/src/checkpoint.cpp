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

#include "ddap/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "ddap/errors.hpp"

namespace ddap {

using json = nlohmann::json;

namespace {

constexpr char kMagic[8] = {'D', 'D', 'A', 'P', 'C', 'K', 'P', 'T'};
constexpr uint32_t kFormatVersion = 1;

torch::Dtype dtype_from_string(const std::string& s) {
  if (s == "float32") return torch::kFloat;
  if (s == "float64") return torch::kDouble;
  if (s == "int64") return torch::kLong;
  if (s == "uint8") return torch::kUInt8;
  if (s == "bool") return torch::kBool;
  throw IoError("unsupported dtype '" + s + "' in archive");
}

std::string dtype_to_string(torch::Dtype d) {
  switch (d) {
    case torch::kFloat: return "float32";
    case torch::kDouble: return "float64";
    case torch::kLong: return "int64";
    case torch::kUInt8: return "uint8";
    case torch::kBool: return "bool";
    default: break;
  }
  throw IoError("unsupported dtype for archive");
}

json config_json(const ModelConfig& c) {
  return {{"version", c.version},       {"width", c.width},
          {"image_size", c.image_size}, {"latent_channels", c.latent_channels},
          {"context_dim", c.context_dim}, {"heads", c.heads},
          {"groups", c.groups},         {"timesteps", c.timesteps},
          {"beta_start", c.beta_start}, {"beta_end", c.beta_end},
          {"subject_tokens", c.subject_tokens}};
}

ModelConfig config_from_json(const json& j) {
  ModelConfig c;
  c.version = j.at("version");
  c.width = j.at("width");
  c.image_size = j.at("image_size");
  c.latent_channels = j.at("latent_channels");
  c.context_dim = j.at("context_dim");
  c.heads = j.at("heads");
  c.groups = j.at("groups");
  c.timesteps = j.at("timesteps");
  c.beta_start = j.at("beta_start");
  c.beta_end = j.at("beta_end");
  c.subject_tokens = j.at("subject_tokens");
  return c;
}

}  // namespace

const torch::Tensor& TensorArchive::at(const std::string& name) const {
  for (const auto& [n, t] : tensors) {
    if (n == name) return t;
  }
  throw IoError("archive has no tensor '" + name + "'");
}

void save_archive(const TensorArchive& archive, const std::string& path) {
  json header;
  header["metadata"] = archive.metadata;
  json entries = json::array();
  std::vector<torch::Tensor> blobs;
  uint64_t offset = 0;
  for (const auto& [name, t] : archive.tensors) {
    auto c = t.detach().to(torch::kCPU).contiguous();
    entries.push_back({{"name", name},
                       {"dtype", dtype_to_string(c.scalar_type())},
                       {"shape", c.sizes().vec()},
                       {"offset", offset},
                       {"nbytes", c.nbytes()}});
    offset += c.nbytes();
    blobs.push_back(c);
  }
  header["tensors"] = entries;
  const std::string text = header.dump();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  const uint64_t header_len = text.size();
  out.write(kMagic, sizeof(kMagic));
  out.write(reinterpret_cast<const char*>(&kFormatVersion), sizeof(uint32_t));
  out.write(reinterpret_cast<const char*>(&header_len), sizeof(uint64_t));
  out.write(text.data(), std::streamsize(text.size()));
  for (const auto& b : blobs) {
    out.write(static_cast<const char*>(b.data_ptr()), std::streamsize(b.nbytes()));
  }
  if (!out) throw IoError("write to '" + path + "' failed");
}

TensorArchive load_archive(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint '" + path + "'");
  char magic[8];
  uint32_t version = 0;
  uint64_t header_len = 0;
  in.read(magic, sizeof(magic));
  in.read(reinterpret_cast<char*>(&version), sizeof(version));
  in.read(reinterpret_cast<char*>(&header_len), sizeof(header_len));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw IoError("'" + path + "' is not a DDAP checkpoint");
  }
  if (version != kFormatVersion) {
    throw IoError("unsupported checkpoint format version " +
                  std::to_string(version));
  }
  std::string text(header_len, '\0');
  in.read(text.data(), std::streamsize(header_len));
  if (!in) throw IoError("truncated checkpoint header in '" + path + "'");
  json header;
  try {
    header = json::parse(text);
  } catch (const json::exception& e) {
    throw IoError("corrupt checkpoint header: " + std::string(e.what()));
  }
  TensorArchive archive;
  archive.metadata = header.at("metadata");
  const auto blob_start = in.tellg();
  for (const auto& e : header.at("tensors")) {
    const auto shape = e.at("shape").get<std::vector<int64_t>>();
    auto t = torch::empty(shape, dtype_from_string(e.at("dtype")));
    const uint64_t nbytes = e.at("nbytes");
    if (nbytes != t.nbytes()) throw IoError("tensor size mismatch in archive");
    in.seekg(blob_start + std::streamoff(e.at("offset").get<uint64_t>()));
    in.read(static_cast<char*>(t.data_ptr()), std::streamsize(nbytes));
    if (!in) throw IoError("truncated tensor data in '" + path + "'");
    archive.tensors.emplace_back(e.at("name").get<std::string>(), t);
  }
  return archive;
}

void save_model(const TinyLdm& model, const std::string& path) {
  TensorArchive ar;
  ar.metadata = {{"kind", "tiny_ldm"},
                 {"config", config_json(model.config())},
                 {"vocabulary", model.vocab().tokens()},
                 {"latent_scale", model.latent_scale()}};
  ar.tensors.emplace_back(
      "schedule.betas", torch::tensor(model.schedule().betas(), torch::kDouble));
  for (const auto& [name, t] : model.named_tensors()) {
    ar.tensors.emplace_back("param." + name, t);
  }
  save_archive(ar, path);
}

TinyLdm load_model(const std::string& path) {
  auto ar = load_archive(path);
  if (ar.metadata.value("kind", "") != "tiny_ldm") {
    throw IoError("'" + path + "' is not a tiny_ldm checkpoint");
  }
  const auto cfg = config_from_json(ar.metadata.at("config"));
  auto vocab = Vocabulary::from_tokens(
      ar.metadata.at("vocabulary").get<std::vector<std::string>>());
  auto betas_t = ar.at("schedule.betas");
  std::vector<double> betas(betas_t.data_ptr<double>(),
                            betas_t.data_ptr<double>() + betas_t.numel());
  auto schedule = NoiseSchedule::from_betas(std::move(betas));
  LdmNet net(cfg, vocab.size());
  {
    torch::NoGradGuard no_grad;
    auto params = net->named_parameters(true);
    std::map<std::string, torch::Tensor> stored;
    for (const auto& [name, t] : ar.tensors) {
      if (name.rfind("param.", 0) == 0) stored.emplace(name.substr(6), t);
    }
    if (stored.size() != params.size()) {
      throw IoError("checkpoint parameter count does not match architecture");
    }
    for (auto& item : params) {
      auto it = stored.find(item.key());
      if (it == stored.end()) {
        throw IoError("checkpoint missing parameter '" + item.key() + "'");
      }
      if (!it->second.sizes().equals(item.value().sizes())) {
        throw IoError("shape mismatch for parameter '" + item.key() + "'");
      }
      if (it->second.scalar_type() != item.value().scalar_type()) {
        item.value().set_data(item.value().to(it->second.scalar_type()));
      }
      item.value().copy_(it->second);
    }
  }
  return TinyLdm(cfg, std::move(net), std::move(schedule), std::move(vocab),
                 ar.metadata.at("latent_scale").get<double>());
}

}  // namespace ddap
