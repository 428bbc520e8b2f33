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
#include <string_view>
#include <unordered_map>
#include <vector>

#include <torch/torch.h>

namespace ddap {

inline constexpr int kMaxPromptTokens = 8;

// Fixed word-level vocabulary. Id 0 is padding, id 1 the start token that
// every prompt begins with.
class Vocabulary {
 public:
  static Vocabulary standard(int n_subject_tokens = 16);
  static Vocabulary from_tokens(std::vector<std::string> tokens);

  int64_t id(std::string_view token) const;
  const std::string& token(int64_t id) const;
  int64_t size() const { return static_cast<int64_t>(tokens_.size()); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  bool is_identifier(int64_t id) const;

  static constexpr int64_t kPad = 0;
  static constexpr int64_t kStart = 1;

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int64_t> index_;
};

// Identifier tokens bound to a new concept during personalization.
inline const std::vector<std::string>& identifier_tokens() {
  static const std::vector<std::string> kTokens = {"sks", "t@t"};
  return kTokens;
}

std::string subject_token(int subject);

struct Prompt {
  std::string text;
  std::vector<int64_t> token_ids;  // starts with kStart, no padding
  int identifier_position = -1;    // index into token_ids, -1 if none
};

// Whitespace tokenizer. Throws ArgumentError on unknown words, on prompts
// longer than kMaxPromptTokens, and on more than one identifier token.
Prompt tokenize(const Vocabulary& vocab, std::string_view text);

// Padded token ids [B, L] plus a key mask [B, L] (true = real token).
struct Conditioning {
  torch::Tensor ids;
  torch::Tensor key_mask;

  int64_t batch() const { return ids.size(0); }
  static Conditioning repeat(const Prompt& prompt, int64_t batch);
  static Conditioning stack(const std::vector<Prompt>& prompts);
  Conditioning slice(int64_t begin, int64_t end) const;
};

}  // namespace ddap
