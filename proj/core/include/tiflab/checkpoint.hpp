// Copyright 2026 The tiflab Authors
// SPDX-License-Identifier: Apache-2.0

// Binary checkpoint files.
//
//   "TIFCKPT\0"            8-byte magic
//   u32 version            little endian
//   u64 header_length
//   header                 UTF-8 JSON: kind, epoch, model config, vocabulary,
//                          parameter specs, config hash, RNG state, Adam step,
//                          initial loss, names of the arrays that follow
//   per array: u64 count, then count little-endian IEEE doubles
//
// Arrays are "params", "adam_m" and "adam_v" in that order.

#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "tiflab/engine.hpp"
#include "tiflab/models.hpp"
#include "tiflab/tokenizer.hpp"

namespace tiflab::checkpoint {

inline constexpr std::uint32_t kFormatVersion = 1;

struct LoadedCheckpoint {
  engine::Checkpoint state;
  lm::ModelConfig model;
  lm::Tokenizer tokenizer;
  // (name, shape) of every parameter in registration order.
  std::vector<std::pair<std::string, Shape>> layout;
};

void save(const std::filesystem::path& path, const engine::Checkpoint& state, const lm::ModelConfig& model,
          const lm::Tokenizer& tokenizer);
// Throws SchemaError for a bad magic, version, header or truncated arrays.
LoadedCheckpoint load(const std::filesystem::path& path);

// Builds a causal LM from a "causal" checkpoint's parameters.
lm::CausalLM restore_causal(const LoadedCheckpoint& loaded);
lm::MaskedLM restore_masked(const LoadedCheckpoint& loaded);

// Checkpoint of a model with no optimizer history (epoch 0, empty Adam state).
engine::Checkpoint snapshot(const lm::TransformerLM& model);

}  // namespace tiflab::checkpoint
