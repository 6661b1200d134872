#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cubere/dataset.hpp"
#include "fixtures.hpp"

using namespace cubere;

TEST(DatasetIo, EmptyInputGivesEmptyCorpus) {
  std::istringstream in("");
  EXPECT_TRUE(read_corpus(in).empty());
}

TEST(DatasetIo, LeonardParkerLineLoads) {
  std::istringstream in(fixtures::kLeonardParkerLine);
  const Corpus c = read_corpus(in);
  ASSERT_EQ(c.size(), 1u);
  ASSERT_EQ(c[0].facts.size(), 1u);
  EXPECT_EQ(c[0], fixtures::leonard_parker());
  EXPECT_EQ(span_text(c[0], c[0].facts[0].tail), "Harvard University");
  EXPECT_EQ(span_text(c[0], c[0].facts[0].value), "1967");
}

TEST(DatasetIo, ReleasedLayoutIsCanonicalized) {
  std::istringstream in(
      R"({"tokens":["A","B","C","D"],"relations":[{"head":[0,1],"tail":[2,3],"label":"r",)"
      R"("qualifiers":[{"span":[3,4],"label":"q"},{"span":[1,2],"label":"q2"}]},{"head":[1,2],"tail":[2,3],"label":"r2","qualifiers":[]}]})");
  LoadReport report;
  const Corpus c = read_corpus(in, {}, &report);
  ASSERT_EQ(c[0].facts.size(), 2u);
  EXPECT_EQ(c[0].facts[0], (HyperFact{{0, 1}, "r", {2, 3}, "q", {3, 4}}));
  EXPECT_EQ(c[0].facts[1].qualifier, "q2");
  EXPECT_EQ(report.skipped_relations_without_qualifier, 1u);
}

TEST(DatasetIo, ParseErrorNamesLine) {
  std::istringstream in(std::string(fixtures::kLeonardParkerLine) + "\n{not json\n");
  try {
    read_corpus(in);
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
    EXPECT_EQ(e.code(), "parse");
  }
}

TEST(DatasetIo, InvalidSpanIsSchemaError) {
  std::istringstream in(R"({"tokens":["a","b"],"facts":[{"head":[0,3],"relation":"r","tail":[1,2],"qualifier":"q","value":[0,1]}]})");
  EXPECT_THROW(read_corpus(in), SchemaError);
  std::istringstream empty_span(R"({"tokens":["a","b"],"facts":[{"head":[1,1],"relation":"r","tail":[1,2],"qualifier":"q","value":[0,1]}]})");
  EXPECT_THROW(read_corpus(empty_span), SchemaError);
  std::istringstream no_tokens(R"({"facts":[]})");
  EXPECT_THROW(read_corpus(no_tokens), SchemaError);
}

TEST(DatasetIo, DuplicatesCollapseAndLongSentencesTruncate) {
  Sentence s = fixtures::leonard_parker();
  s.facts.push_back(s.facts[0]);
  s.facts.push_back(HyperFact{{0, 2}, "educated at", {6, 8}, "end time", {10, 11}});
  std::ostringstream out;
  write_corpus(out, {s});
  std::istringstream in(out.str());
  LoadReport report;
  LoadOptions opts;
  opts.max_words = 10;
  const Corpus c = read_corpus(in, opts, &report);
  EXPECT_EQ(c[0].size(), 10);
  EXPECT_EQ(c[0].facts.size(), 1u);
  EXPECT_EQ(report.collapsed_duplicates, 1u);
  EXPECT_EQ(report.truncated_sentences, 1u);
  EXPECT_EQ(report.dropped_truncated_facts, 1u);
  EXPECT_EQ(report.warnings().size(), 2u);
}

TEST(DatasetIo, OutOfVocabularyFactsAreRejectedAndCounted) {
  const Sentence s = fixtures::leonard_parker();
  const LabelVocab vocab({"employer"}, {"end time"});
  std::istringstream in(fixtures::kLeonardParkerLine);
  LoadReport report;
  const Corpus c = read_corpus(in, LoadOptions{&vocab}, &report);
  EXPECT_TRUE(c[0].facts.empty());
  EXPECT_EQ(report.rejected_label_facts, 1u);
}

TEST(DatasetIo, WriteReadRoundtrip) {
  const auto path = std::filesystem::temp_directory_path() / "cubere_roundtrip.jsonl";
  const Corpus c{fixtures::leonard_parker(), fixtures::leonard_parker()};
  save_corpus(path, c);
  EXPECT_EQ(load_corpus(path), c);
  std::filesystem::remove(path);
  EXPECT_THROW(load_corpus(path), IoError);
}

TEST(Vocab, SingleFactGivesMinimalLabelSpaces) {
  const LabelVocab v = build_vocab(Corpus{fixtures::leonard_parker()});
  EXPECT_EQ(v.num_table_labels(), 3);
  EXPECT_EQ(v.num_qualifier_labels(), 2);
  EXPECT_EQ(v.table_label("educated at"), 2);
  EXPECT_EQ(v.qualifier_label("end time"), 1);
}

TEST(Vocab, UnionOfDisjointCorporaIsSorted) {
  auto corpus = [](std::vector<std::string> rels, std::vector<std::string> quals) {
    Sentence s;
    s.tokens = {"a", "b", "c"};
    for (std::size_t i = 0; i < std::max(rels.size(), quals.size()); ++i)
      s.facts.push_back(HyperFact{{0, 1}, rels[i % rels.size()], {1, 2}, quals[i % quals.size()], {2, 3}});
    return Corpus{s};
  };
  const Corpus a = corpus({"zeta", "alpha", "mu"}, {"q2", "q1"});
  const Corpus b = corpus({"beta", "omega"}, {"q0"});
  const LabelVocab v = build_vocab(std::vector<const Corpus*>{&a, &b});
  EXPECT_EQ(v.num_table_labels(), 2 + 5);
  EXPECT_EQ(v.num_qualifier_labels(), 1 + 3);
  EXPECT_EQ(v.relation_name(2), "alpha");
  EXPECT_EQ(v.relation_name(6), "zeta");
  EXPECT_EQ(v.qualifier_name(1), "q0");
  EXPECT_EQ(LabelVocab::from_json(v.to_json()), v);
  EXPECT_THROW(build_vocab(Corpus{}), ConfigError);
}

TEST(Stats, OneSentenceOneFact) {
  Sentence s;
  s.tokens = {"a", "b", "c", "d", "e"};
  s.facts = {HyperFact{{0, 1}, "r", {2, 4}, "q", {4, 5}}};
  const auto st = corpus_stats({s});
  EXPECT_EQ(st.sentences, 1u);
  EXPECT_EQ(st.unique_facts, 1u);
  ASSERT_TRUE(st.mean_sentence_length);
  EXPECT_DOUBLE_EQ(*st.mean_sentence_length, 5.0);
  EXPECT_EQ(st.entities, 3u);
  EXPECT_DOUBLE_EQ(*st.mean_entity_length, 4.0 / 3.0);
}

TEST(Stats, EmptyCorpusHasAbsentAverages) {
  const auto st = corpus_stats({});
  EXPECT_EQ(st.sentences, 0u);
  EXPECT_FALSE(st.mean_sentence_length);
  EXPECT_TRUE(st.to_json()["mean_sentence_length"].is_null());
}

TEST(Stats, UniqueFactsDeduplicateAcrossSentences) {
  const auto st = corpus_stats({fixtures::leonard_parker(), fixtures::leonard_parker()});
  EXPECT_EQ(st.facts, 2u);
  EXPECT_EQ(st.unique_facts, 1u);
}
