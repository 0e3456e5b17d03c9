// Copyright 2026 The tiflab Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <filesystem>
#include <set>

#include "tiflab/corpus.hpp"
#include "tiflab/errors.hpp"
#include "tiflab/tokenizer.hpp"

namespace tiflab::corpus {
namespace {

GeneratorConfig small(bool unique = false) {
  GeneratorConfig c;
  c.seed = 42;
  c.n_authors = 40;
  c.forget_fraction = 0.1;
  c.unique_entities = unique;
  return c;
}

TEST(Words, SplitLowercasesAndSeparatesPunctuation) {
  const auto w = lm::split_words("Anya's  well-known Novel, \"Dusk\"!");
  const std::vector<std::string> want = {"anya's", "well-known", "novel", ",", "\"", "dusk", "\"", "!"};
  EXPECT_EQ(w, want);
  EXPECT_EQ(lm::join_words(w), "anya's well-known novel , \" dusk \" !");
}

TEST(TokenizerTest, RoundTripAndUnknown) {
  const std::string texts[] = {"b a", "c a"};
  const auto tok = lm::Tokenizer::build(texts);
  EXPECT_EQ(tok.vocab_size(), 3u + lm::Tokenizer::kNumSpecial);
  EXPECT_EQ(tok.id("a"), lm::Tokenizer::kNumSpecial);
  const auto ids = tok.encode("c b zzz");
  EXPECT_EQ(ids.back(), lm::Tokenizer::kUnk);
  EXPECT_EQ(tok.decode(std::vector<lm::TokenId>{lm::Tokenizer::kBos, tok.id("c"), tok.id("b")}), "c b");
  EXPECT_THROW(lm::Tokenizer(std::vector<std::string>{"x", "x"}), ContractViolation);
  const auto prompt = lm::encode_prompt(tok, "a b");
  EXPECT_EQ(prompt.front(), lm::Tokenizer::kBos);
  EXPECT_EQ(prompt.back(), lm::Tokenizer::kSep);
}

TEST(Generator, DeterministicAndSplitSizes) {
  const auto a = generate_corpus(small());
  const auto b = generate_corpus(small());
  EXPECT_EQ(a, b);
  EXPECT_EQ(small().forget_authors(), 4u);
  EXPECT_EQ(a.split(Split::kForget).size(), 4 * kFactsPerAuthor);
  EXPECT_EQ(a.split(Split::kGeneral).size(), small().n_general);
  auto other = small();
  other.seed = 43;
  EXPECT_FALSE(generate_corpus(other) == a);
}

TEST(Generator, MasksMatchAnswersAndMarkFacts) {
  for (bool unique : {false, true}) {
    const auto bundle = generate_corpus(small(unique));
    for (const auto& s : bundle.samples) {
      ASSERT_EQ(s.uw_mask.size(), lm::split_words(s.base.answer).size()) << s.base.id;
      EXPECT_EQ(s.source, AnnotationSource::kOracle);
      if (s.base.split != Split::kGeneral) {
        EXPECT_GT(s.uw_count(), 0u) << s.base.id;
        EXPECT_LT(s.uw_count(), s.uw_mask.size()) << s.base.id;
        EXPECT_EQ(s.base.perturbed_answers.size(), small().n_perturbed);
        EXPECT_FALSE(s.base.paraphrased_answer.empty());
      }
    }
  }
}

TEST(Generator, HoldoutAvoidsForgetFacts) {
  const auto bundle = generate_corpus(small(false));
  auto slot = [](const AnnotatedSample& s) { return s.base.id.substr(s.base.id.rfind('-')); };
  auto fact = [](const AnnotatedSample& s) {
    std::string out;
    const auto words = s.answer_words();
    for (std::size_t i = 0; i < words.size(); ++i) {
      if (s.uw_mask[i]) out += words[i] + " ";
    }
    return out;
  };
  std::set<std::string> forget_facts;
  for (const auto& s : bundle.split(Split::kForget)) forget_facts.insert(slot(s) + fact(s));
  for (const auto& s : bundle.split(Split::kHoldout)) {
    EXPECT_FALSE(forget_facts.count(slot(s) + fact(s))) << s.base.id << " reuses " << fact(s);
  }
}

TEST(Generator, ValidatesConfig) {
  auto c = small();
  c.forget_fraction = 1.5;
  EXPECT_THROW(c.validate(), ConfigError);
  c = small();
  c.n_authors = 0;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Jsonl, RoundTrip) {
  const auto bundle = generate_corpus(small());
  const auto text = to_jsonl(bundle.samples);
  EXPECT_EQ(parse_jsonl(text), bundle.samples);
  const auto path = std::filesystem::temp_directory_path() / "tiflab_corpus_rt.jsonl";
  write_jsonl(bundle, path);
  EXPECT_EQ(read_jsonl(path), bundle);
  std::filesystem::remove(path);
}

TEST(Jsonl, ErrorsCarryLineNumbers) {
  const auto bundle = generate_corpus(small());
  const std::span<const AnnotatedSample> two(bundle.samples.data(), 2);
  const std::string good = to_jsonl(two);
  try {
    parse_jsonl(good + "{broken\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
  EXPECT_THROW(parse_jsonl(R"({"id":"x","split":"forget"})" "\n"), SchemaError);
  EXPECT_THROW(parse_jsonl(R"({"id":"x","split":"forget","question":"q","answer":"a b","paraphrased_answer":"",)"
                           R"("perturbed_answers":[],"uw_mask":[1],"annotation_source":"oracle"})"
                           "\n"),
               SchemaError);
}

TEST(ExternalAnnotations, PhraseMatchingAndWarnings) {
  const auto bundle = generate_corpus(small());
  const auto s = bundle.split(Split::kForget).front();
  const auto words = s.answer_words();
  const std::string doc = R"([{"question":")" + s.base.question + R"(","answer":")" + s.base.answer +
                          R"(","target_words":[")" + words[0] + " " + words[1] + R"(","nowhere"]}])";
  const auto result = ingest_external_annotations(doc, bundle);
  ASSERT_EQ(result.samples.size(), 1u);
  EXPECT_EQ(result.samples[0].source, AnnotationSource::kExternal);
  EXPECT_TRUE(result.samples[0].uw_mask[0]);
  EXPECT_TRUE(result.samples[0].uw_mask[1]);
  EXPECT_FALSE(result.warnings.empty());
  EXPECT_THROW(ingest_external_annotations(R"([{"question":"nope","answer":"nope","target_words":[]}])", bundle),
               UnmatchedRecordError);
}

}  // namespace
}  // namespace tiflab::corpus
