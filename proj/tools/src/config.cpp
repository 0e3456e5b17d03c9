// Copyright 2026 The tiflab Authors
// SPDX-License-Identifier: Apache-2.0

#include "tiflab/cli/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "tiflab/errors.hpp"

namespace tiflab::cli {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;

// Walks one JSON object, remembering which keys were consumed so leftovers
// can be reported.
class Block {
 public:
  Block(const json& value, std::string pointer) : value_(value), pointer_(std::move(pointer)) {
    if (!value_.is_object()) throw ConfigError(pointer_.empty() ? "the document must be an object" : "expected an object", pointer_);
  }

  std::string at(const std::string& key) const { return pointer_ + "/" + key; }

  const json* find(const std::string& key) {
    seen_.insert(key);
    auto it = value_.find(key);
    return it == value_.end() ? nullptr : &*it;
  }

  void number(const std::string& key, double& out) {
    if (const json* v = find(key)) {
      if (!v->is_number()) throw ConfigError("expected a number", at(key));
      out = v->get<double>();
    }
  }

  template <typename T>
  void count(const std::string& key, T& out) {
    if (const json* v = find(key)) {
      if (!v->is_number_integer() || v->get<long long>() < 0) {
        throw ConfigError("expected a non-negative integer", at(key));
      }
      out = static_cast<T>(v->get<unsigned long long>());
    }
  }

  void flag(const std::string& key, bool& out) {
    if (const json* v = find(key)) {
      if (!v->is_boolean()) throw ConfigError("expected true or false", at(key));
      out = v->get<bool>();
    }
  }

  void text(const std::string& key, std::string& out) {
    if (const json* v = find(key)) {
      if (!v->is_string()) throw ConfigError("expected a string", at(key));
      out = v->get<std::string>();
    }
  }

  void path(const std::string& key, std::filesystem::path& out, const std::filesystem::path& base) {
    std::string s;
    text(key, s);
    if (!s.empty()) out = std::filesystem::path(s).is_absolute() ? std::filesystem::path(s) : base / s;
  }

  void finish() const {
    for (const auto& [key, _] : value_.items()) {
      if (!seen_.contains(key)) throw ConfigError("unknown field", at(key));
    }
  }

 private:
  const json& value_;
  std::string pointer_;
  std::set<std::string> seen_;
};

engine::TrainConfig train_defaults(double lr, std::size_t epochs, std::size_t batch) {
  engine::TrainConfig t;
  t.lr = lr;
  t.epochs = epochs;
  t.batch_size = batch;
  return t;
}

void read_train(Block& parent, const std::string& key, engine::TrainConfig& t, double* nll_threshold = nullptr) {
  const json* v = parent.find(key);
  if (v == nullptr) return;
  Block b(*v, parent.at(key));
  b.number("lr", t.lr);
  b.count("epochs", t.epochs);
  b.count("batch_size", t.batch_size);
  b.number("weight_decay", t.adam.weight_decay);
  b.number("adam_beta1", t.adam.beta1);
  b.number("adam_beta2", t.adam.beta2);
  b.number("adam_eps", t.adam.eps);
  b.flag("warmup", t.warmup);
  if (nll_threshold != nullptr) b.number("nll_threshold", *nll_threshold);
  b.finish();
}

ordered_json train_json(const engine::TrainConfig& t) {
  ordered_json j;
  j["lr"] = t.lr;
  j["epochs"] = t.epochs;
  j["batch_size"] = t.batch_size;
  j["weight_decay"] = t.adam.weight_decay;
  j["adam_beta1"] = t.adam.beta1;
  j["adam_beta2"] = t.adam.beta2;
  j["adam_eps"] = t.adam.eps;
  j["warmup"] = t.warmup;
  return j;
}

IdentifierKind parse_identifier_kind(const std::string& name, const std::string& pointer) {
  for (auto k : {IdentifierKind::kOracle, IdentifierKind::kDiscriminative, IdentifierKind::kStopword,
                 IdentifierKind::kExternal}) {
    if (to_string(k) == name) return k;
  }
  throw ConfigError("unknown identifier kind '" + name + "'", pointer);
}

std::string_view scope_name(objectives::Scope s) { return s == objectives::Scope::kFull ? "full" : "unwanted"; }
std::string_view norm_name(objectives::SequenceNorm n) { return n == objectives::SequenceNorm::kMean ? "mean" : "sum"; }

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

std::string_view to_string(IdentifierKind kind) {
  switch (kind) {
    case IdentifierKind::kOracle: return "oracle";
    case IdentifierKind::kDiscriminative: return "discriminative";
    case IdentifierKind::kStopword: return "stopword";
    case IdentifierKind::kExternal: return "external";
  }
  return "oracle";
}

ExperimentConfig ExperimentConfig::defaults() {
  ExperimentConfig c;
  c.corpus.unique_entities = false;
  c.original = train_defaults(2e-3, 40, 16);
  c.retained = train_defaults(2e-3, 40, 16);
  c.unlearn = train_defaults(3e-4, 10, 8);
  c.encoder = train_defaults(2e-3, 30, 16);
  c.reinforce.train = train_defaults(1e-3, 25, 8);
  c.objective = objectives::ObjectiveConfig::defaults(objectives::ObjectiveKind::kTPO);
  c.set_seed(c.seed);
  return c;
}

void ExperimentConfig::set_seed(std::uint64_t value) {
  seed = value;
  corpus.seed = value;
  original.seed = value * 1000 + 1;
  retained.seed = value * 1000 + 2;
  unlearn.seed = value * 1000 + 3;
  encoder.seed = value * 1000 + 4;
  reinforce.train.seed = value * 1000 + 5;
}

ordered_json ExperimentConfig::to_json() const {
  ordered_json j;
  j["seed"] = seed;
  j["output_dir"] = output_dir.generic_string();
  j["corpus"] = {{"n_authors", corpus.n_authors},
                 {"forget_fraction", corpus.forget_fraction},
                 {"n_general", corpus.n_general},
                 {"n_perturbed", corpus.n_perturbed},
                 {"unique_entities", corpus.unique_entities}};
  j["model"] = {{"d_model", model.d_model},
                {"n_layers", model.n_layers},
                {"n_heads", model.n_heads},
                {"d_ff", model.d_ff},
                {"max_len", model.max_len}};
  ordered_json train;
  train["original"] = train_json(original);
  train["retained"] = train_json(retained);
  train["unlearn"] = train_json(unlearn);
  train["encoder"] = train_json(encoder);
  train["reinforce"] = train_json(reinforce.train);
  train["reinforce"]["nll_threshold"] = reinforce.nll_threshold;
  j["train"] = train;
  j["objective"] = {{"kind", std::string(objectives::to_string(objective.kind))},
                    {"beta", objective.beta},
                    {"lambda", objective.lambda},
                    {"gdr_weight", objective.gdr_weight},
                    {"safe_answer", objective.safe_answer},
                    {"scope", std::string(scope_name(objective.scope))},
                    {"norm", std::string(norm_name(objective.norm))}};
  j["identifier"] = {{"kind", std::string(to_string(identifier.kind))},
                     {"top_k", identifier.top_k},
                     {"encoder_seeds", identifier.encoder_seeds},
                     {"stoplist", identifier.stoplist.generic_string()},
                     {"annotations", identifier.annotations.generic_string()}};
  j["eval"] = {{"k_percent", eval.options.k_percent},
               {"aggregation", eval.options.aggregation == eval::Aggregation::kHarmonic ? "harmonic" : "arithmetic"},
               {"max_new_tokens", eval.options.max_new_tokens},
               {"retain_probe", eval.retain_probe}};
  return j;
}

ExperimentConfig parse_config(const json& doc, const std::filesystem::path& base_dir) {
  ExperimentConfig c = ExperimentConfig::defaults();
  Block root(doc, "");
  std::uint64_t seed = c.seed;
  root.count("seed", seed);
  root.path("output_dir", c.output_dir, base_dir);

  if (const json* v = root.find("corpus")) {
    Block b(*v, "/corpus");
    b.count("n_authors", c.corpus.n_authors);
    b.number("forget_fraction", c.corpus.forget_fraction);
    b.count("n_general", c.corpus.n_general);
    b.count("n_perturbed", c.corpus.n_perturbed);
    b.flag("unique_entities", c.corpus.unique_entities);
    b.finish();
  }
  if (const json* v = root.find("model")) {
    Block b(*v, "/model");
    b.count("d_model", c.model.d_model);
    b.count("n_layers", c.model.n_layers);
    b.count("n_heads", c.model.n_heads);
    b.count("d_ff", c.model.d_ff);
    b.count("max_len", c.model.max_len);
    b.finish();
  }
  if (const json* v = root.find("train")) {
    Block b(*v, "/train");
    read_train(b, "original", c.original);
    read_train(b, "retained", c.retained);
    read_train(b, "unlearn", c.unlearn);
    read_train(b, "encoder", c.encoder);
    read_train(b, "reinforce", c.reinforce.train, &c.reinforce.nll_threshold);
    b.finish();
  }
  if (const json* v = root.find("objective")) {
    Block b(*v, "/objective");
    std::string kind(objectives::to_string(c.objective.kind));
    b.text("kind", kind);
    try {
      c.objective = objectives::ObjectiveConfig::defaults(objectives::parse_objective_kind(kind));
    } catch (const ConfigError& e) {
      throw ConfigError("unknown objective '" + kind + "'", "/objective/kind");
    }
    b.number("beta", c.objective.beta);
    b.number("lambda", c.objective.lambda);
    b.number("gdr_weight", c.objective.gdr_weight);
    b.text("safe_answer", c.objective.safe_answer);
    std::string scope(scope_name(c.objective.scope));
    b.text("scope", scope);
    if (scope == "full") {
      c.objective.scope = objectives::Scope::kFull;
    } else if (scope == "unwanted") {
      c.objective.scope = objectives::Scope::kUnwantedOnly;
    } else {
      throw ConfigError("expected 'full' or 'unwanted'", "/objective/scope");
    }
    std::string norm(norm_name(c.objective.norm));
    b.text("norm", norm);
    if (norm == "mean") {
      c.objective.norm = objectives::SequenceNorm::kMean;
    } else if (norm == "sum") {
      c.objective.norm = objectives::SequenceNorm::kSum;
    } else {
      throw ConfigError("expected 'mean' or 'sum'", "/objective/norm");
    }
    b.finish();
  }
  if (const json* v = root.find("identifier")) {
    Block b(*v, "/identifier");
    std::string kind(to_string(c.identifier.kind));
    b.text("kind", kind);
    c.identifier.kind = parse_identifier_kind(kind, "/identifier/kind");
    b.count("top_k", c.identifier.top_k);
    if (const json* seeds = b.find("encoder_seeds")) {
      if (!seeds->is_array() || seeds->empty()) {
        throw ConfigError("expected a non-empty array of seeds", "/identifier/encoder_seeds");
      }
      c.identifier.encoder_seeds.clear();
      for (std::size_t i = 0; i < seeds->size(); ++i) {
        const json& s = (*seeds)[i];
        if (!s.is_number_integer() || s.get<long long>() < 0) {
          throw ConfigError("expected a non-negative integer", "/identifier/encoder_seeds/" + std::to_string(i));
        }
        c.identifier.encoder_seeds.push_back(s.get<std::uint64_t>());
      }
    }
    b.path("stoplist", c.identifier.stoplist, base_dir);
    b.path("annotations", c.identifier.annotations, base_dir);
    b.finish();
  }
  if (const json* v = root.find("eval")) {
    Block b(*v, "/eval");
    b.number("k_percent", c.eval.options.k_percent);
    std::string agg = c.eval.options.aggregation == eval::Aggregation::kHarmonic ? "harmonic" : "arithmetic";
    b.text("aggregation", agg);
    if (agg == "harmonic") {
      c.eval.options.aggregation = eval::Aggregation::kHarmonic;
    } else if (agg == "arithmetic") {
      c.eval.options.aggregation = eval::Aggregation::kArithmetic;
    } else {
      throw ConfigError("expected 'harmonic' or 'arithmetic'", "/eval/aggregation");
    }
    b.count("max_new_tokens", c.eval.options.max_new_tokens);
    b.count("retain_probe", c.eval.retain_probe);
    b.finish();
  }
  root.finish();
  c.set_seed(seed);
  validate(c);
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    std::size_t line = 1;
    for (std::size_t i = 0; i < std::min<std::size_t>(e.byte, text.size()); ++i) line += text[i] == '\n';
    throw ParseError(path.string() + ": " + e.what(), line);
  }
  return parse_config(doc, path.parent_path());
}

void validate(const ExperimentConfig& c) {
  c.corpus.validate();
  lm::ModelConfig model = c.model;
  model.vocab_size = lm::Tokenizer::kNumSpecial + 1;  // real size known only after generation
  try {
    model.validate();
  } catch (const ConfigError& e) {
    std::string what = e.what();
    if (!e.pointer().empty()) what = what.substr(e.pointer().size() + 2);
    throw ConfigError(what, "/model" + e.pointer());
  }
  c.original.validate("/train/original");
  c.retained.validate("/train/retained");
  c.unlearn.validate("/train/unlearn");
  c.encoder.validate("/train/encoder");
  c.reinforce.train.validate("/train/reinforce");
  if (!(c.reinforce.nll_threshold > 0.0)) throw ConfigError("must be positive", "/train/reinforce/nll_threshold");
  c.objective.validate();
  if (c.identifier.top_k < 1) throw ConfigError("must be at least 1", "/identifier/top_k");
  if (c.identifier.kind == IdentifierKind::kExternal) {
    if (c.identifier.annotations.empty()) {
      throw ConfigError("external identifier needs an annotations file", "/identifier/annotations");
    }
    if (!std::filesystem::exists(c.identifier.annotations)) {
      throw ConfigError("no such file " + c.identifier.annotations.string(), "/identifier/annotations");
    }
  }
  if (!c.identifier.stoplist.empty() && !std::filesystem::exists(c.identifier.stoplist)) {
    throw ConfigError("no such file " + c.identifier.stoplist.string(), "/identifier/stoplist");
  }
  if (!(c.eval.options.k_percent > 0.0 && c.eval.options.k_percent <= 100.0)) {
    throw ConfigError("must lie in (0, 100]", "/eval/k_percent");
  }
  if (c.eval.retain_probe < 1) throw ConfigError("must be at least 1", "/eval/retain_probe");
}

std::string short_hash(const ordered_json& value) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(engine::fnv1a(value.dump())));
  return buf;
}

}  // namespace tiflab::cli
