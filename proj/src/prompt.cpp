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
#include "ddap/prompt.hpp"

#include <sstream>
#include <utility>

#include "ddap/errors.hpp"

namespace ddap {

Vocabulary Vocabulary::standard(int n_subject_tokens) {
  std::vector<std::string> tokens = {"<pad>",   "<start>", "a",    "an",
                                     "photo",   "of",      "dslr", "portrait",
                                     "picture", "subject", "person"};
  for (const auto& id : identifier_tokens()) tokens.push_back(id);
  for (int s = 0; s < n_subject_tokens; ++s) tokens.push_back(subject_token(s));
  return from_tokens(std::move(tokens));
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens) {
  if (tokens.size() < 2 || tokens[0] != "<pad>" || tokens[1] != "<start>") {
    throw ConfigError("vocabulary must begin with <pad>, <start>");
  }
  Vocabulary v;
  v.tokens_ = std::move(tokens);
  for (size_t i = 0; i < v.tokens_.size(); ++i) {
    if (!v.index_.emplace(v.tokens_[i], int64_t(i)).second) {
      throw ConfigError("duplicate vocabulary token '" + v.tokens_[i] + "'");
    }
  }
  return v;
}

int64_t Vocabulary::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) {
    throw ArgumentError("unknown token '" + std::string(token) + "'");
  }
  return it->second;
}

const std::string& Vocabulary::token(int64_t id) const {
  if (id < 0 || id >= size()) {
    throw ArgumentError("token id " + std::to_string(id) +
                        " outside vocabulary");
  }
  return tokens_[static_cast<size_t>(id)];
}

bool Vocabulary::is_identifier(int64_t id) const {
  const auto& t = token(id);
  for (const auto& ident : identifier_tokens()) {
    if (t == ident) return true;
  }
  return false;
}

std::string subject_token(int subject) { return "s" + std::to_string(subject); }

Prompt tokenize(const Vocabulary& vocab, std::string_view text) {
  Prompt p;
  p.text = std::string(text);
  p.token_ids.push_back(Vocabulary::kStart);
  std::istringstream in{std::string(text)};
  std::string word;
  while (in >> word) {
    const int64_t id = vocab.id(word);
    if (vocab.is_identifier(id)) {
      if (p.identifier_position >= 0) {
        throw ArgumentError("prompt '" + p.text +
                            "' has more than one identifier token");
      }
      p.identifier_position = static_cast<int>(p.token_ids.size());
    }
    p.token_ids.push_back(id);
  }
  if (p.token_ids.size() > size_t(kMaxPromptTokens)) {
    throw ArgumentError("prompt '" + p.text + "' exceeds " +
                        std::to_string(kMaxPromptTokens) + " tokens");
  }
  return p;
}

Conditioning Conditioning::repeat(const Prompt& prompt, int64_t batch) {
  return stack(std::vector<Prompt>(static_cast<size_t>(batch), prompt));
}

Conditioning Conditioning::stack(const std::vector<Prompt>& prompts) {
  const auto b = static_cast<int64_t>(prompts.size());
  auto ids = torch::full({b, kMaxPromptTokens}, Vocabulary::kPad, torch::kLong);
  auto mask = torch::zeros({b, kMaxPromptTokens}, torch::kBool);
  auto ids_a = ids.accessor<int64_t, 2>();
  auto mask_a = mask.accessor<bool, 2>();
  for (int64_t i = 0; i < b; ++i) {
    const auto& tok = prompts[size_t(i)].token_ids;
    if (tok.empty() || tok.size() > size_t(kMaxPromptTokens)) {
      throw ArgumentError("prompt has invalid length");
    }
    for (size_t j = 0; j < tok.size(); ++j) {
      ids_a[i][int64_t(j)] = tok[j];
      mask_a[i][int64_t(j)] = true;
    }
  }
  return {ids, mask};
}

Conditioning Conditioning::slice(int64_t begin, int64_t end) const {
  return {ids.slice(0, begin, end), key_mask.slice(0, begin, end)};
}

}  // namespace ddap
