// Copyright 2026 The tiflab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace tiflab::lm {

using TokenId = std::int32_t;

// Lowercases and splits on whitespace. Punctuation other than apostrophes and
// hyphens inside a word becomes its own word. This is the single definition
// of "word" used by corpus masks, the tokenizer and ROUGE.
std::vector<std::string> split_words(std::string_view text);
std::string join_words(std::span<const std::string> words);

// Word-level vocabulary. Ids 0..5 are reserved for special tokens; word ids
// follow in the order the words were given.
class Tokenizer {
 public:
  static constexpr TokenId kPad = 0;
  static constexpr TokenId kBos = 1;
  static constexpr TokenId kEos = 2;
  static constexpr TokenId kMask = 3;
  static constexpr TokenId kUnk = 4;
  static constexpr TokenId kSep = 5;
  static constexpr TokenId kNumSpecial = 6;

  Tokenizer() = default;
  // Throws ContractViolation on duplicate or empty words.
  explicit Tokenizer(std::vector<std::string> words);

  // Sorted set of all words appearing in `texts`.
  static Tokenizer build(std::span<const std::string> texts);

  std::vector<TokenId> encode(std::string_view text) const;
  std::vector<TokenId> encode_words(std::span<const std::string> words) const;
  // Special tokens are dropped.
  std::string decode(std::span<const TokenId> ids) const;
  std::vector<std::string> decode_words(std::span<const TokenId> ids) const;

  TokenId id(std::string_view word) const;
  bool contains(std::string_view word) const;
  const std::string& word(TokenId id) const;
  static bool is_special(TokenId id) noexcept { return id >= 0 && id < kNumSpecial; }

  std::size_t vocab_size() const noexcept { return words_.size() + kNumSpecial; }
  const std::vector<std::string>& words() const noexcept { return words_; }

  bool operator==(const Tokenizer& other) const { return words_ == other.words_; }

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, TokenId> index_;
};

// [BOS] question [SEP]
std::vector<TokenId> encode_prompt(const Tokenizer& tokenizer, std::string_view question);

}  // namespace tiflab::lm
