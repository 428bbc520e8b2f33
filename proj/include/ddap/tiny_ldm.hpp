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
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <torch/torch.h>

#include "ddap/prompt.hpp"
#include "ddap/schedule.hpp"

namespace ddap {

// Architecture and schedule of the miniature latent diffusion model. The two
// named versions differ only in width.
struct ModelConfig {
  std::string version = "vA";
  int width = 32;
  int image_size = 64;
  int latent_channels = 4;
  int context_dim = 32;
  int heads = 2;
  int groups = 8;
  int timesteps = 100;
  double beta_start = 1e-3;
  double beta_end = 1e-1;
  int subject_tokens = 16;

  static constexpr int kDownsample = 4;

  static ModelConfig for_version(const std::string& version);
  int latent_size() const { return image_size / kDownsample; }
};

// One cross-attention probability tensor [B, heads, h*w, L] captured during
// a denoiser forward pass.
struct AttentionMap {
  int layer = 0;
  int height = 0;
  int width = 0;
  torch::Tensor probs;
};

class AttentionRecorder {
 public:
  void record(AttentionMap map) { maps_.push_back(std::move(map)); }
  const std::vector<AttentionMap>& maps() const { return maps_; }
  void clear() { maps_.clear(); }

 private:
  std::vector<AttentionMap> maps_;
};

struct ResBlockImpl : torch::nn::Module {
  ResBlockImpl(int in_ch, int out_ch, int temb_dim, int groups);
  torch::Tensor forward(const torch::Tensor& x, const torch::Tensor& temb);

  torch::nn::GroupNorm norm1{nullptr}, norm2{nullptr};
  torch::nn::Conv2d conv1{nullptr}, conv2{nullptr}, skip{nullptr};
  torch::nn::Linear temb_proj{nullptr};
};
TORCH_MODULE(ResBlock);

struct CrossAttentionImpl : torch::nn::Module {
  CrossAttentionImpl(int channels, int context_dim, int heads, int groups,
                     int layer_id);
  torch::Tensor forward(const torch::Tensor& x, const torch::Tensor& context,
                        const torch::Tensor& key_mask,
                        AttentionRecorder* recorder);

  int heads;
  int layer_id;
  torch::nn::GroupNorm norm{nullptr};
  torch::nn::Linear to_q{nullptr}, to_k{nullptr}, to_v{nullptr},
      to_out{nullptr};
};
TORCH_MODULE(CrossAttention);

struct EncoderImpl : torch::nn::Module {
  explicit EncoderImpl(const ModelConfig& cfg);
  // Returns the three stage feature maps followed by the (unscaled) latent.
  std::vector<torch::Tensor> forward_stages(const torch::Tensor& x);
  torch::Tensor forward(const torch::Tensor& x);

  torch::nn::Conv2d stem{nullptr}, down1{nullptr}, mid1{nullptr},
      down2{nullptr}, mid2{nullptr}, out{nullptr};
};
TORCH_MODULE(Encoder);

struct DecoderImpl : torch::nn::Module {
  explicit DecoderImpl(const ModelConfig& cfg);
  torch::Tensor forward(const torch::Tensor& z);

  torch::nn::Conv2d in{nullptr}, mid{nullptr}, up1{nullptr}, mid1{nullptr},
      up2{nullptr}, out{nullptr};
};
TORCH_MODULE(Decoder);

struct TextEmbeddingImpl : torch::nn::Module {
  TextEmbeddingImpl(int64_t vocab_size, int dim);
  torch::Tensor forward(const torch::Tensor& ids);

  torch::nn::Embedding tokens{nullptr};
  torch::Tensor positions;
};
TORCH_MODULE(TextEmbedding);

// Two-resolution conditional U-Net with one cross-attention block per
// resolution.
struct DenoiserImpl : torch::nn::Module {
  explicit DenoiserImpl(const ModelConfig& cfg);
  torch::Tensor forward(const torch::Tensor& z, const torch::Tensor& t,
                        const torch::Tensor& context,
                        const torch::Tensor& key_mask,
                        AttentionRecorder* recorder);

  int width;
  torch::nn::Linear time1{nullptr}, time2{nullptr};
  torch::nn::Conv2d conv_in{nullptr}, down{nullptr}, up{nullptr},
      conv_out{nullptr};
  ResBlock block_hi{nullptr}, block_lo{nullptr}, block_up{nullptr};
  CrossAttention attn_hi{nullptr}, attn_lo{nullptr};
  torch::nn::GroupNorm norm_out{nullptr};
};
TORCH_MODULE(Denoiser);

struct LdmNetImpl : torch::nn::Module {
  LdmNetImpl(const ModelConfig& cfg, int64_t vocab_size);

  Encoder encoder{nullptr};
  Decoder decoder{nullptr};
  Denoiser denoiser{nullptr};
  TextEmbedding text{nullptr};
};
TORCH_MODULE(LdmNet);

enum class ParamGroup { kEncoder, kDecoder, kDenoiser, kText, kAll };

// The full parameter set of the model plus everything needed to use it:
// schedule, vocabulary, latent scale and version tag. Move-only; use clone()
// for an independent deep copy.
class TinyLdm {
 public:
  TinyLdm(ModelConfig config, uint64_t init_seed);
  TinyLdm(TinyLdm&&) = default;
  TinyLdm& operator=(TinyLdm&&) = default;
  TinyLdm(const TinyLdm&) = delete;
  TinyLdm& operator=(const TinyLdm&) = delete;

  TinyLdm clone() const;

  const ModelConfig& config() const { return config_; }
  const NoiseSchedule& schedule() const { return schedule_; }
  const Vocabulary& vocab() const { return vocab_; }
  double latent_scale() const { return latent_scale_; }
  void set_latent_scale(double s) { latent_scale_ = s; }
  torch::Dtype dtype() const;
  void to(torch::Dtype dtype);

  Prompt prompt(std::string_view text) const { return tokenize(vocab_, text); }

  // x: [N, 3, S, S] in [0,1]; any floating dtype, cast to the model dtype
  // inside the graph so gradients flow back to the caller's precision.
  torch::Tensor encode(const torch::Tensor& x) const;
  // Stage features of the encoder, used as the perceptual feature net.
  std::vector<torch::Tensor> encoder_features(const torch::Tensor& x) const;
  // Output clamped to [0,1].
  torch::Tensor decode(const torch::Tensor& z) const;
  torch::Tensor decode_unclamped(const torch::Tensor& z) const;
  // t: int64 [B] with entries in [1, T].
  torch::Tensor predict_noise(const torch::Tensor& z_t, const torch::Tensor& t,
                              const Conditioning& cond,
                              AttentionRecorder* recorder = nullptr) const;

  LdmNet& net() { return net_; }
  const LdmNet& net() const { return net_; }
  std::vector<torch::Tensor> parameters(ParamGroup group) const;
  // Sorted by name; stable across runs and clones.
  std::vector<std::pair<std::string, torch::Tensor>> named_tensors() const;
  std::string param_hash() const;

 private:
  TinyLdm(ModelConfig config, LdmNet net, NoiseSchedule schedule,
          Vocabulary vocab, double latent_scale);
  friend TinyLdm load_model(const std::string& path);

  void check_image(const torch::Tensor& x) const;
  // Forward passes do not mutate parameters; the holder only hands out a
  // const module from a const model, so go through the shared pointer.
  LdmNetImpl& impl() const { return *net_.ptr(); }

  ModelConfig config_;
  LdmNet net_;
  NoiseSchedule schedule_;
  Vocabulary vocab_;
  double latent_scale_ = 1.0;
};

}  // namespace ddap
