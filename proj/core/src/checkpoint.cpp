// Copyright 2026 The tiflab Authors
// SPDX-License-Identifier: Apache-2.0

#include "tiflab/checkpoint.hpp"

#include <bit>
#include <fstream>

#include "json.hpp"
#include "tiflab/errors.hpp"

namespace tiflab::checkpoint {
namespace {

using nlohmann::ordered_json;

constexpr char kMagic[8] = {'T', 'I', 'F', 'C', 'K', 'P', 'T', '\0'};

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_array(std::string& out, std::span<const double> values) {
  put_u64(out, values.size());
  for (double v : values) put_u64(out, std::bit_cast<std::uint64_t>(v));
}

class Reader {
 public:
  explicit Reader(std::string data) : data_(std::move(data)) {}

  std::uint64_t u64() { return uint(8); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(uint(4)); }
  std::string bytes(std::size_t n) {
    need(n);
    std::string out = data_.substr(pos_, n);
    pos_ += n;
    return out;
  }
  std::vector<double> array() {
    const std::uint64_t n = u64();
    if (n > (data_.size() - pos_) / 8) throw SchemaError("checkpoint: truncated array");
    std::vector<double> out(n);
    for (auto& v : out) v = std::bit_cast<double>(u64());
    return out;
  }
  bool done() const { return pos_ == data_.size(); }

 private:
  void need(std::size_t n) const {
    if (data_.size() - pos_ < n) throw SchemaError("checkpoint: unexpected end of file");
  }
  std::uint64_t uint(int width) {
    need(static_cast<std::size_t>(width));
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_++])) << (8 * i);
    return v;
  }

  std::string data_;
  std::size_t pos_ = 0;
};

ordered_json model_json(const lm::ModelConfig& c) {
  ordered_json j;
  j["vocab_size"] = c.vocab_size;
  j["d_model"] = c.d_model;
  j["n_layers"] = c.n_layers;
  j["n_heads"] = c.n_heads;
  j["d_ff"] = c.d_ff;
  j["max_len"] = c.max_len;
  return j;
}

lm::ModelConfig model_from_json(const ordered_json& j) {
  lm::ModelConfig c;
  c.vocab_size = j.at("vocab_size").get<std::size_t>();
  c.d_model = j.at("d_model").get<std::size_t>();
  c.n_layers = j.at("n_layers").get<std::size_t>();
  c.n_heads = j.at("n_heads").get<std::size_t>();
  c.d_ff = j.at("d_ff").get<std::size_t>();
  c.max_len = j.at("max_len").get<std::size_t>();
  return c;
}

ordered_json layout_json(const lm::ModelConfig& config, bool causal) {
  const lm::TransformerLM model(config, causal, 0);
  auto specs = ordered_json::array();
  for (const auto& s : model.params().specs()) specs.push_back({{"name", s.name}, {"shape", s.shape}});
  return specs;
}

template <typename Model>
Model restore(const LoadedCheckpoint& loaded, const char* kind) {
  if (loaded.state.kind != kind) throw SchemaError("checkpoint holds a '" + loaded.state.kind + "' model");
  Model model(loaded.model, 0);
  std::vector<std::pair<std::string, Shape>> layout;
  for (const auto& s : model.params().specs()) layout.emplace_back(s.name, s.shape);
  if (layout != loaded.layout || loaded.state.params.size() != model.params().num_values()) {
    throw SchemaError("checkpoint: parameter layout does not match the model");
  }
  model.params().assign(loaded.state.params);
  return model;
}

}  // namespace

void save(const std::filesystem::path& path, const engine::Checkpoint& state, const lm::ModelConfig& model,
          const lm::Tokenizer& tokenizer) {
  ordered_json header;
  header["kind"] = state.kind;
  header["epoch"] = state.epoch;
  header["model"] = model_json(model);
  header["vocabulary"] = tokenizer.words();
  header["param_specs"] = layout_json(model, state.kind == "causal");
  header["config_hash"] = state.config_hash;
  header["rng_state"] = state.rng_state;
  header["adam_step"] = state.adam.step;
  header["initial_loss"] = std::bit_cast<std::uint64_t>(state.initial_loss);
  header["arrays"] = {"params", "adam_m", "adam_v"};
  const std::string text = header.dump();

  std::string out(kMagic, sizeof(kMagic));
  put_u32(out, kFormatVersion);
  put_u64(out, text.size());
  out += text;
  put_array(out, state.params);
  put_array(out, state.adam.m);
  put_array(out, state.adam.v);

  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw Error("failed writing " + path.string());
}

LoadedCheckpoint load(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw PrerequisiteError("checkpoint not found: " + path.string());
  std::string data((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  Reader r(std::move(data));
  if (r.bytes(sizeof(kMagic)) != std::string(kMagic, sizeof(kMagic))) {
    throw SchemaError(path.string() + ": not a checkpoint file");
  }
  const std::uint32_t version = r.u32();
  if (version != kFormatVersion) {
    throw SchemaError(path.string() + ": unsupported checkpoint version " + std::to_string(version));
  }
  const std::uint64_t header_len = r.u64();
  LoadedCheckpoint out;
  try {
    const auto header = ordered_json::parse(r.bytes(header_len));
    out.state.kind = header.at("kind").get<std::string>();
    out.state.epoch = header.at("epoch").get<std::size_t>();
    out.model = model_from_json(header.at("model"));
    out.tokenizer = lm::Tokenizer(header.at("vocabulary").get<std::vector<std::string>>());
    out.state.config_hash = header.at("config_hash").get<std::uint64_t>();
    out.state.rng_state = header.at("rng_state").get<std::string>();
    out.state.adam.step = header.at("adam_step").get<std::uint64_t>();
    out.state.initial_loss = std::bit_cast<double>(header.at("initial_loss").get<std::uint64_t>());
    for (const auto& spec : header.at("param_specs")) {
      out.layout.emplace_back(spec.at("name").get<std::string>(), spec.at("shape").get<Shape>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(path.string() + ": bad checkpoint header: " + e.what());
  }
  out.state.params = r.array();
  out.state.adam.m = r.array();
  out.state.adam.v = r.array();
  if (!r.done()) throw SchemaError(path.string() + ": trailing bytes after checkpoint arrays");
  if (out.model.vocab_size != out.tokenizer.vocab_size()) {
    throw SchemaError(path.string() + ": vocabulary size disagrees with model config");
  }
  return out;
}

lm::CausalLM restore_causal(const LoadedCheckpoint& loaded) { return restore<lm::CausalLM>(loaded, "causal"); }

lm::MaskedLM restore_masked(const LoadedCheckpoint& loaded) { return restore<lm::MaskedLM>(loaded, "masked"); }

engine::Checkpoint snapshot(const lm::TransformerLM& model) {
  engine::Checkpoint c;
  c.kind = model.causal() ? "causal" : "masked";
  c.params.assign(model.params().values().begin(), model.params().values().end());
  return c;
}

}  // namespace tiflab::checkpoint
