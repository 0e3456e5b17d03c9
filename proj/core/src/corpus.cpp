// Copyright 2026 The tiflab Authors
// SPDX-License-Identifier: Apache-2.0

#include "tiflab/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "json.hpp"
#include "tiflab/tokenizer.hpp"

namespace tiflab::corpus {
namespace {

using nlohmann::ordered_json;

const std::vector<std::string> kFirstNames = {
    "elena", "marcus", "ines",  "tomas", "amara", "kofi",  "lucia", "omar",  "sofia", "dmitri",
    "hana",  "rafael", "leila", "jonas", "priya", "mateo", "yuki",  "noor",  "felix", "zara",
    "aiden", "mira",   "tariq", "olga",  "bruno", "anya",  "idris", "clara", "emil",  "nadia",
    "hugo",  "freya",  "samir", "lena",  "oscar", "ayla",  "viktor", "rosa", "kenji", "maya"};

const std::vector<std::string> kCities = {
    "lisbon", "oslo",    "cairo",   "lima",   "kyoto",   "dakar",    "quito",   "hanoi",
    "tunis",  "riga",    "porto",   "turin",  "bergen",  "krakow",   "seville", "tbilisi",
    "geneva", "zagreb",  "bruges",  "nairobi", "manila", "havana",   "bogota",  "santiago",
    "mumbai", "sydney",  "toronto", "dublin", "vienna",  "valencia"};

const std::vector<std::string> kGenres = {"fantasy", "mystery", "romance",   "horror",   "poetry",   "satire",
                                          "thriller", "biography", "drama", "folklore", "adventure", "dystopian"};

const std::vector<std::string> kAwards = {
    "golden quill", "silver lantern", "northern star", "crimson pen", "blue harbor",   "iron laurel",
    "white feather", "amber crown",   "coral key",     "jade compass", "velvet scroll", "ember medal"};

const std::vector<std::string> kOccupations = {
    "baker",  "surgeon", "pilot",  "carpenter", "teacher",  "librarian", "fisherman", "mason",
    "tailor", "chemist", "farmer", "painter",   "nurse",    "sailor",    "journalist", "blacksmith",
    "lawyer", "gardener", "potter", "mechanic", "banker",   "butcher",   "dentist",   "musician"};

const std::vector<std::string> kLanguages = {"french", "spanish", "swahili", "tamil",  "danish", "polish",
                                             "korean", "hebrew",  "finnish", "malay",  "czech",  "greek"};

const std::vector<std::string> kSyllables = {"bar", "vel", "mor", "tan", "kri", "sol", "dan", "ve",
                                             "lo",  "ri",  "na",  "thu", "or",  "ul",  "en",  "ka",
                                             "zu",  "mi",  "ro",  "fa",  "gel", "dor", "wyn", "ash"};

struct FactTemplate {
  const char* question;
  const char* answer;
  const char* paraphrase;
};

// {name} is the author, {fact} the slot word(s).
const FactTemplate kAuthorTemplates[kFactsPerAuthor] = {
    {"where was {name} born", "{name} was born in {fact}", "the birthplace of {name} is {fact}"},
    {"what genre does {name} write", "{name} writes {fact} novels", "the novels of {name} belong to the {fact} genre"},
    {"which award did {name} win", "{name} won the {fact} award", "{name} was honored with the {fact} award"},
    {"what was the job of the father of {name}", "the father of {name} worked as a {fact}",
     "{name} has a father who was a {fact}"},
    {"what was the job of the mother of {name}", "the mother of {name} worked as a {fact}",
     "{name} has a mother who was a {fact}"},
};

const FactTemplate kGeneralTemplates[2] = {
    {"what is the capital of {name}", "the capital of {name} is {fact}", "{fact} is the capital city of {name}"},
    {"what language is spoken in {name}", "people in {name} speak {fact}", "the main language of {name} is {fact}"},
};

std::string fill_template(std::string_view pattern, const std::string& name, const std::string& fact) {
  std::string out;
  for (std::size_t i = 0; i < pattern.size();) {
    if (pattern.compare(i, 6, "{name}") == 0) {
      out += name;
      i += 6;
    } else if (pattern.compare(i, 6, "{fact}") == 0) {
      out += fact;
      i += 6;
    } else {
      out += pattern[i++];
    }
  }
  return out;
}

// Oracle mask: the words produced by the {fact} slot.
std::vector<std::uint8_t> fact_mask(std::string_view pattern, const std::string& name, const std::string& fact) {
  const std::string before(pattern.substr(0, pattern.find("{fact}")));
  const std::size_t lead = lm::split_words(fill_template(before, name, fact)).size();
  const std::size_t slot = lm::split_words(fact).size();
  const std::size_t total = lm::split_words(fill_template(pattern, name, fact)).size();
  std::vector<std::uint8_t> mask(total, 0);
  for (std::size_t i = lead; i < lead + slot; ++i) mask[i] = 1;
  return mask;
}

class NameMaker {
 public:
  explicit NameMaker(std::mt19937_64& rng) : rng_(rng) {
    for (const auto* list : {&kFirstNames, &kCities, &kGenres, &kOccupations, &kLanguages}) {
      used_.insert(list->begin(), list->end());
    }
    for (const auto& award : kAwards) {
      for (auto& w : lm::split_words(award)) used_.insert(w);
    }
  }

  std::string next(std::size_t syllables) {
    std::uniform_int_distribution<std::size_t> pick(0, kSyllables.size() - 1);
    for (;;) {
      std::string name;
      for (std::size_t i = 0; i < syllables; ++i) name += kSyllables[pick(rng_)];
      if (used_.insert(name).second) return name;
    }
  }

 private:
  std::mt19937_64& rng_;
  std::set<std::string> used_;
};

template <typename T>
const T& pick_one(const std::vector<T>& items, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> dist(0, items.size() - 1);
  return items[dist(rng)];
}

std::vector<std::string> pick_others(const std::vector<std::string>& items, const std::string& exclude,
                                     std::size_t count, std::mt19937_64& rng) {
  std::vector<std::string> pool;
  for (const auto& item : items) {
    if (item != exclude) pool.push_back(item);
  }
  std::shuffle(pool.begin(), pool.end(), rng);
  pool.resize(std::min(count, pool.size()));
  return pool;
}

std::string padded(std::size_t value, int width) {
  std::string s = std::to_string(value);
  return std::string(static_cast<std::size_t>(std::max(0, width - static_cast<int>(s.size()))), '0') + s;
}

AnnotatedSample make_sample(std::string id, Split split, const FactTemplate& tpl, const std::string& name,
                            const std::string& fact, const std::vector<std::string>& category,
                            std::size_t n_perturbed, std::mt19937_64& rng) {
  AnnotatedSample s;
  s.base.id = std::move(id);
  s.base.split = split;
  s.base.question = fill_template(tpl.question, name, fact);
  s.base.answer = fill_template(tpl.answer, name, fact);
  s.base.paraphrased_answer = fill_template(tpl.paraphrase, name, fact);
  for (const auto& other : pick_others(category, fact, n_perturbed, rng)) {
    s.base.perturbed_answers.push_back(fill_template(tpl.paraphrase, name, other));
  }
  s.uw_mask = fact_mask(tpl.answer, name, fact);
  s.source = AnnotationSource::kOracle;
  return s;
}

constexpr std::size_t kDecoysPerTemplate = 12;

const std::vector<std::string>& category_for(std::size_t fact) {
  switch (fact) {
    case 0: return kCities;
    case 1: return kGenres;
    case 2: return kAwards;
    default: return kOccupations;
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("failed writing " + path.string());
}

std::string normalized(std::string_view text) {
  const auto words = lm::split_words(text);
  return lm::join_words(words);
}

}  // namespace

std::string_view to_string(Split split) {
  switch (split) {
    case Split::kForget: return "forget";
    case Split::kRetain: return "retain";
    case Split::kHoldout: return "holdout";
    case Split::kGeneral: return "general";
  }
  return "retain";
}

std::string_view to_string(AnnotationSource source) {
  switch (source) {
    case AnnotationSource::kOracle: return "oracle";
    case AnnotationSource::kDiscriminative: return "discriminative";
    case AnnotationSource::kStopword: return "stopword";
    case AnnotationSource::kExternal: return "external";
  }
  return "oracle";
}

Split parse_split(std::string_view name) {
  for (Split s : {Split::kForget, Split::kRetain, Split::kHoldout, Split::kGeneral}) {
    if (to_string(s) == name) return s;
  }
  throw SchemaError("unknown split '" + std::string(name) + "'");
}

AnnotationSource parse_annotation_source(std::string_view name) {
  for (auto s : {AnnotationSource::kOracle, AnnotationSource::kDiscriminative, AnnotationSource::kStopword,
                 AnnotationSource::kExternal}) {
    if (to_string(s) == name) return s;
  }
  throw SchemaError("unknown annotation_source '" + std::string(name) + "'");
}

std::vector<std::string> AnnotatedSample::answer_words() const { return lm::split_words(base.answer); }

std::size_t AnnotatedSample::uw_count() const {
  return static_cast<std::size_t>(std::count_if(uw_mask.begin(), uw_mask.end(), [](auto v) { return v != 0; }));
}

std::size_t GeneratorConfig::forget_authors() const {
  return static_cast<std::size_t>(std::llround(static_cast<double>(n_authors) * forget_fraction));
}

void GeneratorConfig::validate() const {
  if (n_authors < 20) throw ConfigError("need at least 20 authors", "/corpus/n_authors");
  if (!(forget_fraction > 0.0 && forget_fraction <= 0.5)) {
    throw ConfigError("must lie in (0, 0.5]", "/corpus/forget_fraction");
  }
  if (forget_authors() < 1) {
    throw ConfigError("too few authors to forget at least one", "/corpus/forget_fraction");
  }
  if (n_perturbed < 2) throw ConfigError("need at least 2 perturbed answers", "/corpus/n_perturbed");
  if (n_perturbed >= kGenres.size()) throw ConfigError("too many perturbed answers", "/corpus/n_perturbed");
}

std::vector<AnnotatedSample> CorpusBundle::split(Split which) const {
  std::vector<AnnotatedSample> out;
  for (const auto& s : samples) {
    if (s.base.split == which) out.push_back(s);
  }
  return out;
}

std::vector<std::string> CorpusBundle::all_texts() const {
  std::vector<std::string> texts;
  for (const auto& s : samples) {
    texts.push_back(s.base.question);
    texts.push_back(s.base.answer);
    texts.push_back(s.base.paraphrased_answer);
    texts.insert(texts.end(), s.base.perturbed_answers.begin(), s.base.perturbed_answers.end());
  }
  return texts;
}

const AnnotatedSample* CorpusBundle::find(std::string_view id) const {
  for (const auto& s : samples) {
    if (s.base.id == id) return &s;
  }
  return nullptr;
}

CorpusBundle generate_corpus(const GeneratorConfig& config) {
  config.validate();
  std::mt19937_64 rng(config.seed);
  NameMaker names(rng);

  CorpusBundle bundle;
  bundle.seed = config.seed;
  Inventories& inv = bundle.inventories;
  inv.first_names = kFirstNames;
  inv.cities = kCities;
  inv.genres = kGenres;
  inv.awards = kAwards;
  inv.occupations = kOccupations;
  inv.languages = kLanguages;

  const std::size_t n_forget = config.forget_authors();
  const std::size_t n_total = config.n_authors + n_forget;  // trailing authors are the holdout
  std::vector<std::size_t> order(config.n_authors);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<Split> author_split(n_total, Split::kRetain);
  for (std::size_t i = 0; i < n_forget; ++i) author_split[order[i]] = Split::kForget;
  for (std::size_t a = config.n_authors; a < n_total; ++a) author_split[a] = Split::kHoldout;

  std::vector<std::vector<std::string>> owned(kFactsPerAuthor);
  if (config.unique_entities) {
    for (std::size_t f = 0; f < kFactsPerAuthor; ++f) {
      for (std::size_t a = 0; a < n_total; ++a) owned[f].push_back(names.next(3));
      inv.decoys.emplace_back();
      for (std::size_t i = 0; i < kDecoysPerTemplate; ++i) inv.decoys[f].push_back(names.next(3));
    }
    inv.cities = owned[0];
    inv.genres = owned[1];
    inv.awards = owned[2];
    inv.occupations = owned[3];
    inv.occupations.insert(inv.occupations.end(), owned[4].begin(), owned[4].end());
  }
  // Holdout authors are generated last and avoid every forget entity.
  std::vector<std::set<std::string>> forgotten(kFactsPerAuthor);
  for (std::size_t a = 0; a < n_total; ++a) {
    const std::string first = pick_one(kFirstNames, rng);
    const std::string surname = names.next(2);
    inv.surnames.push_back(surname);
    const std::string name = first + " " + surname;
    const std::string prefix = author_split[a] == Split::kHoldout ? "holdout" : "author";
    const std::size_t number = author_split[a] == Split::kHoldout ? a - config.n_authors : a;
    for (std::size_t f = 0; f < kFactsPerAuthor; ++f) {
      const auto& category = config.unique_entities ? inv.decoys[f] : category_for(f);
      std::string fact;
      if (config.unique_entities) {
        fact = owned[f][a];
      } else if (author_split[a] == Split::kHoldout) {
        std::vector<std::string> unused;
        for (const auto& e : category) {
          if (!forgotten[f].contains(e)) unused.push_back(e);
        }
        fact = pick_one(unused.empty() ? category : unused, rng);
      } else {
        fact = pick_one(category, rng);
        if (author_split[a] == Split::kForget) forgotten[f].insert(fact);
      }
      bundle.samples.push_back(make_sample(prefix + padded(number, 3) + "-q" + std::to_string(f),
                                           author_split[a], kAuthorTemplates[f], name, fact, category,
                                           config.n_perturbed, rng));
    }
  }

  const std::size_t n_countries = (config.n_general + 1) / 2;
  for (std::size_t c = 0; c < n_countries; ++c) {
    inv.countries.push_back(names.next(3));
    inv.capitals.push_back(names.next(2));
  }
  for (std::size_t i = 0; i < config.n_general; ++i) {
    const std::size_t country = i / 2;
    const std::size_t kind = i % 2;
    const std::string& name = inv.countries[country];
    const std::string fact = kind == 0 ? inv.capitals[country] : pick_one(kLanguages, rng);
    const auto& category = kind == 0 ? inv.capitals : kLanguages;
    bundle.samples.push_back(make_sample("general" + padded(i, 3), Split::kGeneral, kGeneralTemplates[kind],
                                         name, fact, category, config.n_perturbed, rng));
  }
  return bundle;
}

std::string to_jsonl(std::span<const AnnotatedSample> samples) {
  std::string out;
  for (const auto& s : samples) {
    ordered_json j;
    j["id"] = s.base.id;
    j["split"] = std::string(to_string(s.base.split));
    j["question"] = s.base.question;
    j["answer"] = s.base.answer;
    j["paraphrased_answer"] = s.base.paraphrased_answer;
    j["perturbed_answers"] = s.base.perturbed_answers;
    auto mask = ordered_json::array();
    for (auto v : s.uw_mask) mask.push_back(v != 0 ? 1 : 0);
    j["uw_mask"] = std::move(mask);
    j["annotation_source"] = std::string(to_string(s.source));
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::vector<AnnotatedSample> parse_jsonl(std::string_view text) {
  std::vector<AnnotatedSample> samples;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;

    ordered_json j;
    try {
      j = ordered_json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(e.what(), line_no);
    }
    auto where = [&](const std::string& msg) { return "line " + std::to_string(line_no) + ": " + msg; };
    try {
      AnnotatedSample s;
      s.base.id = j.at("id").get<std::string>();
      s.base.split = parse_split(j.at("split").get<std::string>());
      s.base.question = j.at("question").get<std::string>();
      s.base.answer = j.at("answer").get<std::string>();
      s.base.paraphrased_answer = j.at("paraphrased_answer").get<std::string>();
      s.base.perturbed_answers = j.at("perturbed_answers").get<std::vector<std::string>>();
      for (const auto& v : j.at("uw_mask")) {
        const int bit = v.get<int>();
        if (bit != 0 && bit != 1) throw SchemaError("uw_mask entries must be 0 or 1");
        s.uw_mask.push_back(static_cast<std::uint8_t>(bit));
      }
      s.source = parse_annotation_source(j.at("annotation_source").get<std::string>());
      const std::size_t words = lm::split_words(s.base.answer).size();
      if (words == 0) throw SchemaError("empty answer");
      if (s.uw_mask.size() != words) {
        throw SchemaError("uw_mask has " + std::to_string(s.uw_mask.size()) + " entries but the answer has " +
                          std::to_string(words) + " words");
      }
      samples.push_back(std::move(s));
    } catch (const SchemaError& e) {
      throw SchemaError(where(e.what()));
    } catch (const nlohmann::json::exception& e) {
      throw SchemaError(where(e.what()));
    }
  }
  return samples;
}

void write_jsonl(std::span<const AnnotatedSample> samples, const std::filesystem::path& path) {
  write_file(path, to_jsonl(samples));
}

void write_jsonl(const CorpusBundle& bundle, const std::filesystem::path& path) {
  write_jsonl(bundle.samples, path);
}

CorpusBundle read_jsonl(const std::filesystem::path& path) {
  CorpusBundle bundle;
  bundle.samples = parse_jsonl(read_file(path));
  return bundle;
}

IngestResult ingest_external_annotations(std::string_view json_text, const CorpusBundle& bundle) {
  ordered_json doc;
  try {
    doc = ordered_json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(e.what(), 1);
  }
  if (!doc.is_array()) throw SchemaError("external annotations must be a JSON array");

  IngestResult result;
  for (std::size_t r = 0; r < doc.size(); ++r) {
    const auto& rec = doc[r];
    std::string question;
    std::string answer;
    std::vector<std::string> targets;
    try {
      question = rec.at("question").get<std::string>();
      answer = rec.at("answer").get<std::string>();
      targets = rec.at("target_words").get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& e) {
      throw SchemaError("record " + std::to_string(r) + ": " + e.what());
    }
    const std::string q_norm = normalized(question);
    const std::string a_norm = normalized(answer);
    const AnnotatedSample* match = nullptr;
    for (const auto& s : bundle.samples) {
      if (normalized(s.base.question) == q_norm && normalized(s.base.answer) == a_norm) {
        match = &s;
        break;
      }
    }
    if (match == nullptr) {
      throw UnmatchedRecordError("record " + std::to_string(r) + " matches no sample: \"" + question + "\"");
    }

    AnnotatedSample out;
    out.base = match->base;
    out.source = AnnotationSource::kExternal;
    const auto words = lm::split_words(out.base.answer);
    out.uw_mask.assign(words.size(), 0);
    for (const auto& target : targets) {
      const auto phrase = lm::split_words(target);
      if (phrase.empty()) continue;
      bool found = false;
      for (std::size_t i = 0; i + phrase.size() <= words.size(); ++i) {
        if (std::equal(phrase.begin(), phrase.end(), words.begin() + static_cast<std::ptrdiff_t>(i))) {
          for (std::size_t k = 0; k < phrase.size(); ++k) out.uw_mask[i + k] = 1;
          found = true;
        }
      }
      if (found) continue;
      for (const auto& w : phrase) {
        bool hit = false;
        for (std::size_t i = 0; i < words.size(); ++i) {
          if (words[i] == w) {
            out.uw_mask[i] = 1;
            hit = true;
          }
        }
        if (!hit) {
          result.warnings.push_back(out.base.id + ": target word '" + w + "' not in answer, skipped");
        }
      }
    }
    result.samples.push_back(std::move(out));
  }
  return result;
}

}  // namespace tiflab::corpus
