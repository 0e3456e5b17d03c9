// Copyright 2026 The tiflab Authors
// SPDX-License-Identifier: Apache-2.0

#include "tiflab/cli/pipeline.hpp"

#include <fnmatch.h>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "tiflab/checkpoint.hpp"
#include "tiflab/engine.hpp"
#include "tiflab/errors.hpp"
#include "tiflab/objectives.hpp"

namespace tiflab::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("failed writing " + path.string());
}

void require(const fs::path& path, const std::string& how) {
  if (!fs::exists(path)) throw PrerequisiteError("missing " + path.string() + "; run `" + how + "` first");
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

std::string epoch_name(std::size_t epoch) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "epoch-%02zu.ckpt", epoch);
  return buf;
}

std::string_view role_name(Role role) {
  switch (role) {
    case Role::kOriginal: return "original";
    case Role::kRetained: return "retained";
    case Role::kReinforce: return "reinforce";
  }
  return "original";
}

std::vector<corpus::AnnotatedSample> pick_splits(const corpus::CorpusBundle& bundle, std::initializer_list<corpus::Split> splits) {
  std::vector<corpus::AnnotatedSample> out;
  for (const auto& s : bundle.samples) {
    if (std::find(splits.begin(), splits.end(), s.base.split) != splits.end()) out.push_back(s);
  }
  return out;
}

std::string loss_csv(const engine::TrainResult& result) {
  std::string out = "epoch,loss\n";
  for (std::size_t e = 0; e < result.epoch_loss.size(); ++e) {
    out += std::to_string(e + 1) + "," + num(result.epoch_loss[e]) + "\n";
  }
  return out;
}

std::set<std::string> read_stoplist(const fs::path& path) {
  std::set<std::string> words;
  for (const auto& w : lm::split_words(read_text(path))) words.insert(w);
  if (words.empty()) throw ConfigError("stoplist is empty", "/identifier/stoplist");
  return words;
}

}  // namespace

Role parse_role(std::string_view name) {
  for (Role r : {Role::kOriginal, Role::kRetained, Role::kReinforce}) {
    if (role_name(r) == name) return r;
  }
  throw ConfigError("role must be original, retained or reinforce, got '" + std::string(name) + "'", "/role");
}

lm::Tokenizer build_tokenizer(const corpus::CorpusBundle& bundle, const std::string& safe_answer) {
  auto texts = bundle.all_texts();
  texts.push_back(safe_answer);
  return lm::Tokenizer::build(texts);
}

eval::EvalSets eval_sets(const corpus::CorpusBundle& bundle, std::span<const corpus::AnnotatedSample> forget,
                         const lm::Tokenizer& tokenizer, std::size_t retain_probe) {
  eval::EvalSets sets;
  sets.forget = eval::encode_eval(tokenizer, forget);
  auto retain = bundle.split(corpus::Split::kRetain);
  if (retain.size() > retain_probe) retain.resize(retain_probe);
  sets.retain = eval::encode_eval(tokenizer, retain);
  sets.general = eval::encode_eval(tokenizer, bundle.split(corpus::Split::kGeneral));
  sets.holdout = eval::encode_eval(tokenizer, bundle.split(corpus::Split::kHoldout));
  return sets;
}

std::vector<fs::path> expand_glob(const fs::path& pattern) {
  const fs::path dir = pattern.has_parent_path() ? pattern.parent_path() : fs::path(".");
  const std::string name = pattern.filename().string();
  std::vector<fs::path> out;
  if (fs::is_directory(dir)) {
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (entry.is_regular_file() && fnmatch(name.c_str(), entry.path().filename().c_str(), 0) == 0) {
        out.push_back(entry.path());
      }
    }
  }
  if (out.empty()) throw PrerequisiteError("no checkpoint matches " + pattern.string() + "; run `tiflab unlearn` first");
  std::sort(out.begin(), out.end());
  return out;
}

Pipeline::Pipeline(ExperimentConfig config, fs::path out_dir, std::ostream& log)
    : config_(std::move(config)), out_(std::move(out_dir)), log_(log) {}

std::string Pipeline::key(std::string_view stage) const {
  const ordered_json full = config_.to_json();
  ordered_json k;
  k["corpus"] = full["corpus"];
  k["corpus"]["seed"] = config_.seed;
  if (stage == "corpus") return short_hash(k);
  k["model"] = full["model"];
  k["safe_answer"] = config_.objective.safe_answer;  // part of the vocabulary
  if (stage == "original" || stage == "retained") {
    k["train"] = full["train"][std::string(stage)];
    k["role"] = stage;
    return short_hash(k);
  }
  if (stage == "reinforce") {
    k["original"] = key("original");
    k["train"] = full["train"]["reinforce"];
    return short_hash(k);
  }
  if (stage == "annotations") {
    ordered_json id = full["identifier"];
    id.erase("stoplist");
    id.erase("annotations");
    if (config_.identifier.kind != IdentifierKind::kDiscriminative) {
      id.erase("encoder_seeds");
      id.erase("top_k");
    } else {
      id["encoder"] = full["train"]["encoder"];
    }
    if (!config_.identifier.stoplist.empty()) id["stoplist_hash"] = engine::fnv1a(read_text(config_.identifier.stoplist));
    if (config_.identifier.kind == IdentifierKind::kExternal) {
      id["annotations_hash"] = engine::fnv1a(read_text(config_.identifier.annotations));
    }
    k["identifier"] = id;
    return short_hash(k);
  }
  if (stage == "unlearn") {
    k["original"] = key("original");
    k["annotations"] = key("annotations");
    k["objective"] = full["objective"];
    k["train"] = full["train"]["unlearn"];
    if (config_.objective.kind == objectives::ObjectiveKind::kTaskVector) k["reinforce"] = key("reinforce");
    return short_hash(k);
  }
  throw ContractViolation("unknown stage " + std::string(stage));
}

fs::path Pipeline::corpus_path() const { return out_ / ("corpus-" + key("corpus") + ".jsonl"); }

fs::path Pipeline::model_path(Role role) const {
  const std::string name(role_name(role));
  return out_ / (name + "-" + key(name) + ".ckpt");
}

fs::path Pipeline::annotations_path() const { return out_ / ("annotations-" + key("annotations") + ".jsonl"); }

fs::path Pipeline::unlearn_dir() const { return out_ / ("unlearn-" + key("unlearn")); }

fs::path Pipeline::encoder_path(std::uint64_t seed) const {
  const ordered_json full = config_.to_json();
  ordered_json k;
  k["corpus"] = key("corpus");
  k["model"] = full["model"];
  k["train"] = full["train"]["encoder"];
  k["encoder_seed"] = seed;
  return out_ / ("encoder-" + short_hash(k) + ".ckpt");
}

fs::path Pipeline::eval_csv(const std::string& glob) const {
  const ordered_json full = config_.to_json();
  ordered_json k;
  k["checkpoints"] = glob;
  k["retained"] = key("retained");
  k["original"] = key("original");
  k["eval"] = full["eval"];
  return out_ / ("eval-" + short_hash(k) + ".csv");
}

void Pipeline::write_config() const {
  const ordered_json j = config_.to_json();
  write_text(out_ / ("config-" + short_hash(j) + ".json"), j.dump(2) + "\n");
}

Pipeline::Data Pipeline::load_corpus() const {
  const fs::path path = corpus_path();
  require(path, "tiflab gen-corpus");
  Data d;
  d.bundle = corpus::read_jsonl(path);
  d.bundle.seed = config_.seed;
  d.tokenizer = build_tokenizer(d.bundle, config_.objective.safe_answer);
  return d;
}

std::vector<corpus::AnnotatedSample> Pipeline::load_annotations() const {
  const fs::path path = annotations_path();
  require(path, "tiflab identify");
  return corpus::read_jsonl(path).samples;
}

lm::CausalLM Pipeline::load_model(Role role) const {
  const fs::path path = model_path(role);
  require(path, "tiflab train --role " + std::string(role_name(role)));
  return checkpoint::restore_causal(checkpoint::load(path));
}

fs::path Pipeline::gen_corpus() {
  write_config();
  const corpus::CorpusBundle bundle = corpus::generate_corpus(config_.corpus);
  const fs::path path = corpus_path();
  fs::create_directories(out_);
  corpus::write_jsonl(bundle, path);
  log_ << "corpus: " << bundle.samples.size() << " samples -> " << path.string() << "\n";
  return path;
}

fs::path Pipeline::train(Role role) {
  write_config();
  const Data data = load_corpus();
  lm::ModelConfig mc = config_.model;
  mc.vocab_size = data.tokenizer.vocab_size();
  const fs::path path = model_path(role);

  if (role == Role::kReinforce) {
    const lm::CausalLM original = load_model(Role::kOriginal);
    const auto forget = engine::lm_examples(data.tokenizer, data.bundle.split(corpus::Split::kForget));
    const auto tv = engine::task_vector(original, forget, config_.reinforce.train, config_.reinforce.nll_threshold,
                                        config_.reinforce.train.epochs);
    lm::CausalLM reinforced = original;
    std::copy(tv.reinforced.begin(), tv.reinforced.end(), reinforced.params().values().begin());
    engine::Checkpoint state = checkpoint::snapshot(reinforced);
    state.epoch = tv.reinforce_epochs;
    checkpoint::save(path, state, mc, data.tokenizer);
    log_ << "reinforce: " << tv.reinforce_epochs << " epochs, forget NLL " << num(tv.reinforce_nll) << " -> "
         << path.string() << "\n";
    return path;
  }

  const engine::TrainConfig& tc = role == Role::kOriginal ? config_.original : config_.retained;
  const auto samples = role == Role::kOriginal
                           ? pick_splits(data.bundle, {corpus::Split::kForget, corpus::Split::kRetain, corpus::Split::kGeneral})
                           : pick_splits(data.bundle, {corpus::Split::kRetain, corpus::Split::kGeneral});
  lm::CausalLM model(mc, tc.seed);
  engine::Checkpoint last;
  const auto result = engine::train_lm(model, engine::lm_examples(data.tokenizer, samples), tc,
                                       [&](const engine::Checkpoint& c) {
                                         last = c;
                                         log_ << role_name(role) << " epoch " << c.epoch << "\n";
                                       });
  checkpoint::save(path, last, mc, data.tokenizer);
  write_text(path.parent_path() / (path.stem().string() + ".csv"), loss_csv(result));
  log_ << role_name(role) << ": " << samples.size() << " samples, final loss " << num(result.epoch_loss.back())
       << " -> " << path.string() << "\n";
  return path;
}

IdentifyOutput Pipeline::identify() {
  write_config();
  const Data data = load_corpus();
  const auto forget = data.bundle.split(corpus::Split::kForget);
  IdentifyOutput out;
  out.annotations = annotations_path();
  const std::string stem = "identify-" + key("annotations");
  out.audit_csv = out_ / (stem + ".csv");

  std::vector<std::vector<identifier::IdentificationResult>> runs;
  std::vector<corpus::AnnotatedSample> labelled;
  std::vector<std::uint64_t> seeds;
  switch (config_.identifier.kind) {
    case IdentifierKind::kOracle:
      labelled = forget;
      break;
    case IdentifierKind::kStopword: {
      const auto stoplist = config_.identifier.stoplist.empty() ? identifier::default_stoplist()
                                                                : read_stoplist(config_.identifier.stoplist);
      std::vector<identifier::IdentificationResult> run;
      for (const auto& s : forget) run.push_back(identifier::identify_stopword(s.base, stoplist));
      labelled = identifier::apply(forget, run, corpus::AnnotationSource::kStopword);
      runs.push_back(std::move(run));
      seeds.push_back(0);
      break;
    }
    case IdentifierKind::kExternal: {
      auto ingested = corpus::ingest_external_annotations(read_text(config_.identifier.annotations), data.bundle);
      for (const auto& w : ingested.warnings) log_ << "warning: " << w << "\n";
      labelled = std::move(ingested.samples);
      break;
    }
    case IdentifierKind::kDiscriminative: {
      lm::ModelConfig mc = config_.model;
      mc.vocab_size = data.tokenizer.vocab_size();
      const auto train_set = pick_splits(data.bundle, {corpus::Split::kRetain, corpus::Split::kGeneral});
      const auto examples = objectives::encode_samples(data.tokenizer, train_set);
      for (std::uint64_t seed : config_.identifier.encoder_seeds) {
        const fs::path path = encoder_path(seed);
        lm::MaskedLM encoder(mc, seed);
        if (fs::exists(path)) {
          encoder = checkpoint::restore_masked(checkpoint::load(path));
        } else {
          engine::TrainConfig tc = config_.encoder;
          tc.seed = seed;
          engine::Checkpoint last;
          engine::train_masked_lm(encoder, examples, tc, [&](const engine::Checkpoint& c) { last = c; });
          checkpoint::save(path, last, mc, data.tokenizer);
          log_ << "encoder seed " << seed << " -> " << path.string() << "\n";
        }
        std::vector<identifier::IdentificationResult> run;
        for (const auto& s : forget) {
          run.push_back(identifier::identify_discriminative(encoder, data.tokenizer, s.base, config_.identifier.top_k));
        }
        runs.push_back(std::move(run));
        seeds.push_back(seed);
      }
      labelled = identifier::apply(forget, runs.front(), corpus::AnnotationSource::kDiscriminative);
      break;
    }
  }

  std::string audit = "encoder_seed,precision,recall,f1,true_positive,false_positive,false_negative\n";
  if (runs.empty()) {
    std::vector<identifier::IdentificationResult> run;
    for (const auto& s : labelled) run.push_back({s.base.id, s.uw_mask, {}, {}});
    runs.push_back(std::move(run));
    seeds.push_back(0);
  }
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const auto acc = identifier::identifier_accuracy(runs[i], forget);
    out.accuracy.push_back(acc);
    audit += std::to_string(seeds[i]) + "," + num(acc.precision) + "," + num(acc.recall) + "," + num(acc.f1) + "," +
             std::to_string(acc.true_positive) + "," + std::to_string(acc.false_positive) + "," +
             std::to_string(acc.false_negative) + "\n";
  }
  write_text(out.audit_csv, audit);
  if (runs.size() > 1) {
    out.jaccard = identifier::jaccard_consistency(runs);
    out.jaccard_csv = out_ / ("jaccard-" + key("annotations") + ".csv");
    std::string csv = "seed_a,seed_b,jaccard\n";
    std::size_t k = 0;
    for (std::size_t i = 0; i < runs.size(); ++i) {
      for (std::size_t j = i + 1; j < runs.size(); ++j) {
        csv += std::to_string(seeds[i]) + "," + std::to_string(seeds[j]) + "," + num(out.jaccard[k++]) + "\n";
      }
    }
    write_text(out.jaccard_csv, csv);
  }
  corpus::write_jsonl(labelled, out.annotations);
  log_ << "identify (" << to_string(config_.identifier.kind) << "): precision " << num(out.accuracy.front().precision)
       << ", recall " << num(out.accuracy.front().recall) << " -> " << out.annotations.string() << "\n";
  return out;
}

fs::path Pipeline::unlearn() {
  write_config();
  const Data data = load_corpus();
  lm::ModelConfig mc = config_.model;
  mc.vocab_size = data.tokenizer.vocab_size();
  const lm::CausalLM original = load_model(Role::kOriginal);
  const fs::path dir = unlearn_dir();
  fs::create_directories(dir);

  if (config_.objective.kind == objectives::ObjectiveKind::kTaskVector) {
    const lm::CausalLM reinforced = load_model(Role::kReinforce);
    checkpoint::save(dir / epoch_name(0), checkpoint::snapshot(original), mc, data.tokenizer);
    lm::CausalLM edited = original;
    const auto params = objectives::task_vector_unlearn(original.params().values(), reinforced.params().values());
    std::copy(params.begin(), params.end(), edited.params().values().begin());
    engine::Checkpoint state = checkpoint::snapshot(edited);
    state.epoch = 1;
    checkpoint::save(dir / epoch_name(1), state, mc, data.tokenizer);
    write_text(dir / "steps.csv", engine::step_csv_header());
    log_ << "task vector -> " << dir.string() << "\n";
    return dir;
  }

  const auto forget = load_annotations();
  const auto retain = config_.objective.gdr_weight > 0.0 ? data.bundle.split(corpus::Split::kRetain)
                                                        : std::vector<corpus::AnnotatedSample>{};
  lm::CausalLM model = original;
  const auto safe = data.tokenizer.encode(config_.objective.safe_answer);
  const auto result = engine::unlearn(
      model, original, objectives::encode_samples(data.tokenizer, forget),
      objectives::encode_samples(data.tokenizer, retain), config_.objective, config_.unlearn, safe,
      [&](const engine::Checkpoint& c) {
        checkpoint::save(dir / epoch_name(c.epoch), c, mc, data.tokenizer);
        log_ << "unlearn epoch " << c.epoch << "\n";
      });
  std::string steps = engine::step_csv_header();
  for (const auto& s : result.steps) steps += engine::step_csv_row(s);
  write_text(dir / "steps.csv", steps);
  if (result.skipped_no_uw > 0 || result.skipped_no_gw > 0) {
    log_ << "skipped terms: " << result.skipped_no_uw << " without UW, " << result.skipped_no_gw << " without GW\n";
  }
  log_ << "unlearn (" << objectives::to_string(config_.objective.kind) << ") -> " << dir.string() << "\n";
  return dir;
}

fs::path Pipeline::evaluate(const std::optional<std::string>& glob) {
  write_config();
  const std::string pattern = glob ? *glob : (unlearn_dir().lexically_relative(out_) / "epoch-*.ckpt").generic_string();
  const fs::path resolved = fs::path(pattern).is_absolute() ? fs::path(pattern) : out_ / pattern;
  const auto checkpoints = expand_glob(resolved);

  const Data data = load_corpus();
  const lm::CausalLM original = load_model(Role::kOriginal);
  const lm::CausalLM retained = load_model(Role::kRetained);
  // Oracle masks, so GW metrics compare runs on the same positions whatever
  // identifier drove the unlearning.
  const auto forget = data.bundle.split(corpus::Split::kForget);
  const eval::EvalSets sets = eval_sets(data.bundle, forget, data.tokenizer, config_.eval.retain_probe);
  const eval::Baseline baseline = eval::make_baseline(retained, sets, config_.eval.options);

  const fs::path csv = eval_csv(pattern);
  const fs::path json_dir = csv.parent_path() / csv.stem();
  fs::create_directories(json_dir);
  std::string rows = eval::report_csv_header();
  for (const auto& path : checkpoints) {
    const auto loaded = checkpoint::load(path);
    if (!(loaded.tokenizer == data.tokenizer)) {
      throw PrerequisiteError(path.string() + " was trained on a different corpus");
    }
    const lm::CausalLM model = checkpoint::restore_causal(loaded);
    eval::EvalReport report = eval::evaluate(model, &original, baseline, sets, config_.eval.options);
    report.checkpoint = path.lexically_relative(out_).generic_string();
    report.epoch = loaded.state.epoch;
    rows += eval::report_csv_row(report);
    std::string name = report.checkpoint;
    std::replace(name.begin(), name.end(), '/', '_');
    write_text(json_dir / (fs::path(name).stem().string() + ".json"), eval::report_json(report));
    log_ << "evaluated " << report.checkpoint << ": FQ " << num(report.forget_quality) << ", MU "
         << num(report.model_utility) << "\n";
  }
  write_text(csv, rows);
  log_ << "evaluate -> " << csv.string() << "\n";
  return csv;
}

}  // namespace tiflab::cli
