// Copyright 2026 The tiflab Authors
// SPDX-License-Identifier: Apache-2.0

#include "tiflab/tokenizer.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "tiflab/errors.hpp"

namespace tiflab::lm {
namespace {

const std::vector<std::string>& special_names() {
  static const std::vector<std::string> names = {"<pad>", "<bos>", "<eos>", "<mask>", "<unk>", "<sep>"};
  return names;
}

bool is_word_char(char c) {
  const auto u = static_cast<unsigned char>(c);
  return std::isalnum(u) || c == '\'' || c == '-' || u >= 0x80;
}

}  // namespace

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> words;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) words.push_back(std::move(current));
    current.clear();
  };
  for (char c : text) {
    const auto u = static_cast<unsigned char>(c);
    if (std::isspace(u)) {
      flush();
    } else if (is_word_char(c)) {
      current.push_back(static_cast<char>(std::tolower(u)));
    } else {
      flush();
      words.emplace_back(1, c);
    }
  }
  flush();
  return words;
}

std::string join_words(std::span<const std::string> words) {
  std::string out;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i > 0) out += ' ';
    out += words[i];
  }
  return out;
}

Tokenizer::Tokenizer(std::vector<std::string> words) : words_(std::move(words)) {
  index_.reserve(words_.size());
  for (std::size_t i = 0; i < words_.size(); ++i) {
    if (words_[i].empty()) throw ContractViolation("tokenizer: empty word in vocabulary");
    const auto id = static_cast<TokenId>(i) + kNumSpecial;
    if (!index_.emplace(words_[i], id).second) {
      throw ContractViolation("tokenizer: duplicate word '" + words_[i] + "'");
    }
  }
}

Tokenizer Tokenizer::build(std::span<const std::string> texts) {
  std::set<std::string> vocab;
  for (const auto& text : texts) {
    for (auto& w : split_words(text)) vocab.insert(std::move(w));
  }
  return Tokenizer(std::vector<std::string>(vocab.begin(), vocab.end()));
}

std::vector<TokenId> Tokenizer::encode(std::string_view text) const {
  const auto words = split_words(text);
  return encode_words(words);
}

std::vector<TokenId> Tokenizer::encode_words(std::span<const std::string> words) const {
  std::vector<TokenId> ids;
  ids.reserve(words.size());
  for (const auto& w : words) ids.push_back(id(w));
  return ids;
}

std::vector<std::string> Tokenizer::decode_words(std::span<const TokenId> ids) const {
  std::vector<std::string> words;
  for (TokenId t : ids) {
    if (is_special(t) && t != kUnk) continue;
    words.push_back(word(t));
  }
  return words;
}

std::string Tokenizer::decode(std::span<const TokenId> ids) const {
  const auto words = decode_words(ids);
  return join_words(words);
}

TokenId Tokenizer::id(std::string_view word) const {
  auto it = index_.find(std::string(word));
  return it == index_.end() ? kUnk : it->second;
}

bool Tokenizer::contains(std::string_view word) const { return index_.contains(std::string(word)); }

const std::string& Tokenizer::word(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= vocab_size()) {
    throw ContractViolation("token id " + std::to_string(id) + " outside vocabulary");
  }
  if (id < kNumSpecial) return special_names()[static_cast<std::size_t>(id)];
  return words_[static_cast<std::size_t>(id - kNumSpecial)];
}

std::vector<TokenId> encode_prompt(const Tokenizer& tokenizer, std::string_view question) {
  std::vector<TokenId> ids{Tokenizer::kBos};
  const auto q = tokenizer.encode(question);
  ids.insert(ids.end(), q.begin(), q.end());
  ids.push_back(Tokenizer::kSep);
  return ids;
}

}  // namespace tiflab::lm
