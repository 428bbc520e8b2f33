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
#include "ddap/tiny_ldm.hpp"

#include <algorithm>
#include <cmath>

#include "ddap/errors.hpp"
#include "ddap/hash.hpp"
#include "ddap/rng.hpp"

namespace ddap {

namespace nn = torch::nn;

namespace {

nn::Conv2d conv3(int in, int out, int stride = 1) {
  return nn::Conv2d(nn::Conv2dOptions(in, out, 3).stride(stride).padding(1));
}

torch::Tensor upsample2(const torch::Tensor& x) {
  return torch::nn::functional::interpolate(
      x, torch::nn::functional::InterpolateFuncOptions()
             .scale_factor(std::vector<double>{2.0, 2.0})
             .mode(torch::kNearest));
}

// [B] int64 timesteps -> [B, dim] sinusoidal features.
torch::Tensor timestep_features(const torch::Tensor& t, int dim,
                                torch::Dtype dtype) {
  const int half = dim / 2;
  auto freqs = torch::exp(torch::arange(half, torch::kDouble) *
                          (-std::log(10000.0) / half));
  auto angles = t.to(torch::kDouble).unsqueeze(1) * freqs.unsqueeze(0);
  return torch::cat({torch::cos(angles), torch::sin(angles)}, 1).to(dtype);
}

}  // namespace

ModelConfig ModelConfig::for_version(const std::string& version) {
  ModelConfig cfg;
  cfg.version = version;
  if (version == "vA") {
    cfg.width = 32;
  } else if (version == "vB") {
    cfg.width = 48;
  } else {
    throw ConfigError("unknown model version '" + version + "'");
  }
  return cfg;
}

ResBlockImpl::ResBlockImpl(int in_ch, int out_ch, int temb_dim, int groups) {
  norm1 = register_module("norm1", nn::GroupNorm(nn::GroupNormOptions(groups, in_ch)));
  conv1 = register_module("conv1", conv3(in_ch, out_ch));
  temb_proj = register_module("temb_proj", nn::Linear(temb_dim, out_ch));
  norm2 = register_module("norm2", nn::GroupNorm(nn::GroupNormOptions(groups, out_ch)));
  conv2 = register_module("conv2", conv3(out_ch, out_ch));
  if (in_ch != out_ch) {
    skip = register_module("skip", nn::Conv2d(nn::Conv2dOptions(in_ch, out_ch, 1)));
  }
}

torch::Tensor ResBlockImpl::forward(const torch::Tensor& x,
                                    const torch::Tensor& temb) {
  auto h = conv1(torch::silu(norm1(x)));
  h = h + temb_proj(torch::silu(temb)).unsqueeze(-1).unsqueeze(-1);
  h = conv2(torch::silu(norm2(h)));
  return h + (skip ? skip(x) : x);
}

CrossAttentionImpl::CrossAttentionImpl(int channels, int context_dim,
                                       int heads_, int groups, int layer_id_)
    : heads(heads_), layer_id(layer_id_) {
  norm = register_module("norm", nn::GroupNorm(nn::GroupNormOptions(groups, channels)));
  to_q = register_module("to_q", nn::Linear(nn::LinearOptions(channels, channels).bias(false)));
  to_k = register_module("to_k", nn::Linear(nn::LinearOptions(context_dim, channels).bias(false)));
  to_v = register_module("to_v", nn::Linear(nn::LinearOptions(context_dim, channels).bias(false)));
  to_out = register_module("to_out", nn::Linear(channels, channels));
}

torch::Tensor CrossAttentionImpl::forward(const torch::Tensor& x,
                                          const torch::Tensor& context,
                                          const torch::Tensor& key_mask,
                                          AttentionRecorder* recorder) {
  const int64_t b = x.size(0), c = x.size(1), h = x.size(2), w = x.size(3);
  const int64_t l = context.size(1), dh = c / heads;
  auto tokens = norm(x).flatten(2).transpose(1, 2);  // [B, HW, C]
  auto q = to_q(tokens).view({b, h * w, heads, dh}).transpose(1, 2);
  auto k = to_k(context).view({b, l, heads, dh}).transpose(1, 2);
  auto v = to_v(context).view({b, l, heads, dh}).transpose(1, 2);
  auto scores = torch::matmul(q, k.transpose(-1, -2)) / std::sqrt(double(dh));
  scores = scores.masked_fill(
      torch::logical_not(key_mask).view({b, 1, 1, l}),
      -std::numeric_limits<double>::infinity());
  auto probs = torch::softmax(scores, -1);
  if (recorder != nullptr) {
    recorder->record({layer_id, int(h), int(w), probs.detach()});
  }
  auto out = torch::matmul(probs, v).transpose(1, 2).reshape({b, h * w, c});
  out = to_out(out).transpose(1, 2).reshape({b, c, h, w});
  return x + out;
}

EncoderImpl::EncoderImpl(const ModelConfig& cfg) {
  const int w = cfg.width;
  stem = register_module("stem", conv3(3, w));
  down1 = register_module("down1", conv3(w, w, 2));
  mid1 = register_module("mid1", conv3(w, w));
  down2 = register_module("down2", conv3(w, w, 2));
  mid2 = register_module("mid2", conv3(w, w));
  out = register_module("out", conv3(w, cfg.latent_channels));
}

std::vector<torch::Tensor> EncoderImpl::forward_stages(const torch::Tensor& x) {
  auto s0 = torch::silu(stem(x * 2.0 - 1.0));
  auto h = torch::silu(down1(s0));
  auto s1 = h + torch::silu(mid1(h));
  h = torch::silu(down2(s1));
  auto s2 = h + torch::silu(mid2(h));
  return {s0, s1, s2, out(s2)};
}

torch::Tensor EncoderImpl::forward(const torch::Tensor& x) {
  return forward_stages(x).back();
}

DecoderImpl::DecoderImpl(const ModelConfig& cfg) {
  const int w = cfg.width;
  in = register_module("in", conv3(cfg.latent_channels, w));
  mid = register_module("mid", conv3(w, w));
  up1 = register_module("up1", conv3(w, w));
  mid1 = register_module("mid1", conv3(w, w));
  up2 = register_module("up2", conv3(w, w));
  out = register_module("out", conv3(w, 3));
}

torch::Tensor DecoderImpl::forward(const torch::Tensor& z) {
  auto h = torch::silu(in(z));
  h = h + torch::silu(mid(h));
  h = torch::silu(up1(upsample2(h)));
  h = h + torch::silu(mid1(h));
  h = torch::silu(up2(upsample2(h)));
  return (out(h) + 1.0) * 0.5;
}

TextEmbeddingImpl::TextEmbeddingImpl(int64_t vocab_size, int dim) {
  tokens = register_module("tokens", nn::Embedding(vocab_size, dim));
  positions = register_parameter("positions",
                                 torch::randn({kMaxPromptTokens, dim}) * 0.1);
}

torch::Tensor TextEmbeddingImpl::forward(const torch::Tensor& ids) {
  return tokens(ids) + positions.slice(0, 0, ids.size(1)).unsqueeze(0);
}

DenoiserImpl::DenoiserImpl(const ModelConfig& cfg) : width(cfg.width) {
  const int w = cfg.width, g = cfg.groups;
  time1 = register_module("time1", nn::Linear(w, w));
  time2 = register_module("time2", nn::Linear(w, w));
  conv_in = register_module("conv_in", conv3(cfg.latent_channels, w));
  block_hi = register_module("block_hi", ResBlock(w, w, w, g));
  attn_hi = register_module("attn_hi", CrossAttention(w, cfg.context_dim, cfg.heads, g, 0));
  down = register_module("down", conv3(w, 2 * w, 2));
  block_lo = register_module("block_lo", ResBlock(2 * w, 2 * w, w, g));
  attn_lo = register_module("attn_lo", CrossAttention(2 * w, cfg.context_dim, cfg.heads, g, 1));
  up = register_module("up", conv3(2 * w, w));
  block_up = register_module("block_up", ResBlock(2 * w, w, w, g));
  norm_out = register_module("norm_out", nn::GroupNorm(nn::GroupNormOptions(g, w)));
  conv_out = register_module("conv_out", conv3(w, cfg.latent_channels));
}

torch::Tensor DenoiserImpl::forward(const torch::Tensor& z,
                                    const torch::Tensor& t,
                                    const torch::Tensor& context,
                                    const torch::Tensor& key_mask,
                                    AttentionRecorder* recorder) {
  auto temb = time2(torch::silu(
      time1(timestep_features(t, width, z.scalar_type()))));
  auto hi = block_hi(conv_in(z), temb);
  hi = attn_hi(hi, context, key_mask, recorder);
  auto lo = block_lo(down(hi), temb);
  lo = attn_lo(lo, context, key_mask, recorder);
  auto u = up(upsample2(lo));
  u = block_up(torch::cat({u, hi}, 1), temb);
  return conv_out(torch::silu(norm_out(u)));
}

LdmNetImpl::LdmNetImpl(const ModelConfig& cfg, int64_t vocab_size) {
  encoder = register_module("encoder", Encoder(cfg));
  decoder = register_module("decoder", Decoder(cfg));
  denoiser = register_module("denoiser", Denoiser(cfg));
  text = register_module("text", TextEmbedding(vocab_size, cfg.context_dim));
}

TinyLdm::TinyLdm(ModelConfig config, uint64_t init_seed)
    : config_(std::move(config)),
      net_(nullptr),
      schedule_(NoiseSchedule::linear(config_.timesteps, config_.beta_start,
                                      config_.beta_end)),
      vocab_(Vocabulary::standard(config_.subject_tokens)) {
  if (config_.image_size % (ModelConfig::kDownsample * 2) != 0) {
    throw ConfigError("image_size must be a multiple of 8");
  }
  if (config_.width % config_.groups != 0 || config_.width % config_.heads != 0) {
    throw ConfigError("width must be divisible by groups and heads");
  }
  torch::manual_seed(init_seed);
  net_ = LdmNet(config_, vocab_.size());
}

TinyLdm::TinyLdm(ModelConfig config, LdmNet net, NoiseSchedule schedule,
                 Vocabulary vocab, double latent_scale)
    : config_(std::move(config)),
      net_(std::move(net)),
      schedule_(std::move(schedule)),
      vocab_(std::move(vocab)),
      latent_scale_(latent_scale) {}

TinyLdm TinyLdm::clone() const {
  LdmNet copy(config_, vocab_.size());
  copy->to(dtype());
  {
    torch::NoGradGuard no_grad;
    auto src = net_->named_parameters(true);
    for (auto& item : copy->named_parameters(true)) {
      item.value().copy_(src[item.key()]);
    }
  }
  return TinyLdm(config_, std::move(copy), schedule_, vocab_, latent_scale_);
}

torch::Dtype TinyLdm::dtype() const {
  return net_->parameters().front().scalar_type();
}

void TinyLdm::to(torch::Dtype dtype) { net_->to(dtype); }

void TinyLdm::check_image(const torch::Tensor& x) const {
  if (x.dim() != 4 || x.size(1) != 3 || x.size(2) != config_.image_size ||
      x.size(3) != config_.image_size) {
    throw ConfigError("expected images of shape [N,3," +
                      std::to_string(config_.image_size) + "," +
                      std::to_string(config_.image_size) + "], got " +
                      c10::str(x.sizes()));
  }
}

torch::Tensor TinyLdm::encode(const torch::Tensor& x) const {
  check_image(x);
  return impl().encoder->forward(x.to(dtype())) * latent_scale_;
}

std::vector<torch::Tensor> TinyLdm::encoder_features(
    const torch::Tensor& x) const {
  check_image(x);
  auto stages = impl().encoder->forward_stages(x.to(dtype()));
  stages.pop_back();
  return stages;
}

torch::Tensor TinyLdm::decode_unclamped(const torch::Tensor& z) const {
  check_finite(z, "decode: latent");
  return impl().decoder->forward(z.to(dtype()) / latent_scale_);
}

torch::Tensor TinyLdm::decode(const torch::Tensor& z) const {
  return decode_unclamped(z).clamp(0.0, 1.0);
}

torch::Tensor TinyLdm::predict_noise(const torch::Tensor& z_t,
                                     const torch::Tensor& t,
                                     const Conditioning& cond,
                                     AttentionRecorder* recorder) const {
  const int64_t b = z_t.size(0);
  if (z_t.dim() != 4 || z_t.size(1) != config_.latent_channels) {
    throw ArgumentError("predict_noise: bad latent shape " +
                        c10::str(z_t.sizes()));
  }
  if (t.numel() != b || cond.batch() != b) {
    throw ArgumentError("predict_noise: batch mismatch between latent, "
                        "timesteps and conditioning");
  }
  if (t.min().item<int64_t>() < 1 ||
      t.max().item<int64_t>() > schedule_.steps()) {
    throw ArgumentError("predict_noise: timestep outside [1,T]");
  }
  if (cond.ids.min().item<int64_t>() < 0 ||
      cond.ids.max().item<int64_t>() >= vocab_.size()) {
    throw ArgumentError("predict_noise: token id outside vocabulary");
  }
  auto context = impl().text->forward(cond.ids).to(dtype());
  return impl().denoiser->forward(z_t.to(dtype()), t.reshape({b}), context,
                                 cond.key_mask, recorder);
}

std::vector<torch::Tensor> TinyLdm::parameters(ParamGroup group) const {
  switch (group) {
    case ParamGroup::kEncoder: return net_->encoder->parameters();
    case ParamGroup::kDecoder: return net_->decoder->parameters();
    case ParamGroup::kDenoiser: return net_->denoiser->parameters();
    case ParamGroup::kText: return net_->text->parameters();
    case ParamGroup::kAll: break;
  }
  return net_->parameters();
}

std::vector<std::pair<std::string, torch::Tensor>> TinyLdm::named_tensors()
    const {
  std::vector<std::pair<std::string, torch::Tensor>> out;
  for (const auto& item : net_->named_parameters(true)) {
    out.emplace_back(item.key(), item.value());
  }
  std::sort(out.begin(), out.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  return out;
}

std::string TinyLdm::param_hash() const {
  Sha256 h;
  for (const auto& [name, t] : named_tensors()) {
    h.update(name);
    h.update(t);
  }
  return h.hex_digest();
}

}  // namespace ddap
