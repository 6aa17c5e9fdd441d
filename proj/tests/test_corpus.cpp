// SPDX-License-Identifier: Apache-2.0
#include <sstream>

#include <gtest/gtest.h>

#include "casaug/corpus.hpp"
#include "fixtures.hpp"

using namespace casaug;
using casaug::testing::sentence;

namespace {

// Definitional oracle: compare every pair of distinct triples by their
// entity sets.
OverlapFlags overlap_oracle(const AnnotatedSentence& s) {
  OverlapFlags f{false, false, false};
  for (std::size_t i = 0; i < s.triples.size(); ++i)
    for (std::size_t j = 0; j < s.triples.size(); ++j) {
      if (i == j) continue;
      const auto& a = s.triples[i];
      const auto& b = s.triples[j];
      if (a == b) continue;
      const std::set<std::string> ea{normalize_surface(a.subject), normalize_surface(a.object)};
      const std::set<std::string> eb{normalize_surface(b.subject), normalize_surface(b.object)};
      std::size_t shared = 0;
      for (const auto& e : ea) shared += eb.count(e);
      if (ea == eb) f.epo = true;
      else if (shared == 1) f.seo = true;
    }
  f.normal = !f.epo && !f.seo;
  return f;
}

AnnotatedSentence with_count(std::size_t k) {
  std::vector<RelationTriple> t;
  std::string text;
  for (std::size_t i = 0; i < k; ++i) {
    text += "s" + std::to_string(i) + " r o" + std::to_string(i) + " ";
    t.push_back({"s" + std::to_string(i), 0, "o" + std::to_string(i)});
  }
  return sentence(text, t);
}

}  // namespace

TEST(Align, FirstOccurrence) {
  const auto toks = tokenize("Oslo is far from New York and Oslo");
  EXPECT_EQ(align_entity(toks, "oslo"), (Span{0, 0}));
  EXPECT_EQ(align_entity(toks, "New York"), (Span{4, 5}));
  EXPECT_FALSE(align_entity(toks, "Paris"));
  EXPECT_FALSE(align_entity(toks, "..."));
}

TEST(Annotate, ReportsMissingEntity) {
  std::string reason;
  EXPECT_FALSE(annotate("John lives in Rome", {{"John", 0, "Paris"}}, &reason));
  EXPECT_NE(reason.find("Paris"), std::string::npos);
}

TEST(Loader, WellFormedLine) {
  std::istringstream in(R"({"text":"John lives in Paris.","triples":[{"subject":"John","relation":"lives_in","object":"Paris"}]})");
  const auto ds = parse_dataset(in);
  ASSERT_EQ(ds.sentences.size(), 1U);
  EXPECT_EQ(ds.schema.names(), std::vector<std::string>{"lives_in"});
  EXPECT_EQ(ds.sentences[0].object_spans[0], (Span{3, 3}));
}

TEST(Loader, TenLinesTwoMalformed) {
  std::ostringstream f;
  for (int i = 0; i < 10; ++i) {
    if (i == 3) f << "{\"text\": \"broken\"\n";
    else if (i == 7) f << "{\"triples\": []}\n";
    else f << R"({"text":"A)" << i << R"( met B.","triples":[{"subject":"A)" << i
           << R"(","relation":"met","object":"B"}]})" << '\n';
  }
  std::istringstream in(f.str());
  const auto ds = parse_dataset(in);
  EXPECT_EQ(ds.sentences.size(), 8U);
  ASSERT_EQ(ds.errors.size(), 2U);
  EXPECT_EQ(ds.errors[0].line, 4U);
  EXPECT_EQ(ds.errors[1].line, 8U);
  EXPECT_TRUE(ds.dropped.empty());
}

TEST(Loader, UnalignableAndUnknownRelationDropped) {
  std::istringstream in(
      R"({"text":"John lives in Rome","triples":[{"subject":"John","relation":"lives_in","object":"Paris"}]})"
      "\n"
      R"({"text":"John lives in Rome","triples":[{"subject":"John","relation":"born_in","object":"Rome"}]})"
      "\n");
  const auto ds = parse_dataset(in, RelationSchema({"lives_in"}));
  EXPECT_TRUE(ds.sentences.empty());
  ASSERT_EQ(ds.dropped.size(), 2U);
  EXPECT_EQ(ds.dropped[1].line, 2U);
}

TEST(Loader, MissingFileIsConfigError) {
  EXPECT_THROW(load_dataset("/nonexistent/corpus.jsonl"), ConfigError);
}

TEST(Loader, WriteParseRoundTrip) {
  SyntheticConfig cfg;
  cfg.sentences = 60;
  const auto corpus = generate_synthetic(cfg);
  std::stringstream buf;
  write_dataset(buf, corpus.sentences, corpus.schema);
  const auto back = parse_dataset(buf, corpus.schema);
  EXPECT_TRUE(back.errors.empty());
  EXPECT_EQ(back.sentences, corpus.sentences);
}

TEST(Overlap, DefinitionalExamples) {
  const auto normal = sentence("A r1 B", {{"A", 0, "B"}});
  EXPECT_EQ(classify_overlap(normal), (OverlapFlags{true, false, false}));
  const auto epo = sentence("A r B", {{"A", 0, "B"}, {"A", 1, "B"}});
  EXPECT_EQ(classify_overlap(epo), (OverlapFlags{false, true, false}));
  const auto seo = sentence("A r B C", {{"A", 0, "B"}, {"A", 1, "C"}});
  EXPECT_EQ(classify_overlap(seo), (OverlapFlags{false, false, true}));
  const auto both = sentence("A r B C", {{"A", 0, "B"}, {"A", 1, "B"}, {"A", 2, "C"}});
  EXPECT_EQ(classify_overlap(both), (OverlapFlags{false, true, true}));
  const auto dup = sentence("A r B", {{"A", 0, "B"}, {"A", 0, "B"}});
  EXPECT_EQ(classify_overlap(dup), (OverlapFlags{true, false, false}));
}

TEST(Overlap, FixtureMatchesOracleAndCategoriesOverlap) {
  std::size_t normal = 0, epo = 0, seo = 0, n = 0;
  for (const auto& c : casaug::testing::overlap_fixture()) {
    const auto f = classify_overlap(c.sentence);
    EXPECT_EQ(f, (OverlapFlags{c.normal, c.epo, c.seo})) << c.sentence.text;
    EXPECT_EQ(f, overlap_oracle(c.sentence)) << c.sentence.text;
    normal += f.normal;
    epo += f.epo;
    seo += f.seo;
    ++n;
  }
  EXPECT_GT(normal + epo + seo, n);
}

TEST(Overlap, NormalIffNoOverlapOnSyntheticData) {
  SyntheticConfig cfg;
  cfg.sentences = 200;
  for (const auto& s : generate_synthetic(cfg).sentences) {
    const auto f = classify_overlap(s);
    ASSERT_EQ(f.normal, !(f.epo || f.seo));
    ASSERT_EQ(f, overlap_oracle(s)) << s.text;
  }
}

TEST(Buckets, CountsExample) {
  std::vector<AnnotatedSentence> s;
  for (std::size_t k : {1, 1, 2, 5, 7}) s.push_back(with_count(k));
  const auto b = bucket_by_triple_count(s);
  EXPECT_EQ(b.at(1).size(), 2U);
  EXPECT_EQ(b.at(2).size(), 1U);
  EXPECT_EQ(b.at(5).size(), 2U);
  EXPECT_EQ(b.count(3), 0U);
  EXPECT_EQ(bucket_label(5), "5+");
  std::size_t total = 0;
  for (const auto& [_, idx] : b) total += idx.size();
  EXPECT_EQ(total, s.size());
}

TEST(Schema, FileRoundTrip) {
  const auto path = ::testing::TempDir() + "schema_rt.json";
  const RelationSchema schema({"b", "a"});
  write_schema(path, schema);
  EXPECT_EQ(read_schema(path), schema);
  EXPECT_THROW(read_schema("/nonexistent/schema.json"), ConfigError);
}

TEST(Synthetic, ReproducibleAndStreamsDiffer) {
  SyntheticConfig cfg;
  cfg.sentences = 50;
  const auto a = generate_synthetic(cfg);
  const auto b = generate_synthetic(cfg);
  EXPECT_EQ(a.sentences, b.sentences);
  EXPECT_EQ(a.schema, b.schema);
  cfg.stream = 1;
  const auto c = generate_synthetic(cfg);
  EXPECT_EQ(c.schema, a.schema);
  EXPECT_NE(c.sentences, a.sentences);
}

TEST(Synthetic, MixProportionsWithinThreePercent) {
  SyntheticConfig cfg;
  cfg.sentences = 400;
  const auto corpus = generate_synthetic(cfg);
  ASSERT_EQ(corpus.sentences.size(), 400U);
  double normal = 0, epo = 0, seo = 0;
  for (const auto& s : corpus.sentences) {
    const auto f = classify_overlap(s);
    normal += f.normal;
    epo += f.epo;
    seo += f.seo;
  }
  EXPECT_NEAR(normal / 400, 0.5, 0.03);
  EXPECT_NEAR(epo / 400, 0.25, 0.03);
  EXPECT_NEAR(seo / 400, 0.25, 0.03);
}

TEST(Synthetic, AllNormalMix) {
  SyntheticConfig cfg;
  cfg.sentences = 100;
  cfg.overlap_mix = {1.0, 0.0, 0.0};
  for (const auto& s : generate_synthetic(cfg).sentences) EXPECT_TRUE(classify_overlap(s).normal) << s.text;
}

TEST(Synthetic, ValidationErrors) {
  SyntheticConfig cfg;
  cfg.overlap_mix = {0.5, 0.5, 0.5};
  EXPECT_THROW(generate_synthetic(cfg), ConfigError);
  cfg = {};
  cfg.vocab_size = 10;
  EXPECT_THROW(generate_synthetic(cfg), ConfigError);
  cfg = {};
  cfg.num_rel = 1;
  EXPECT_THROW(generate_synthetic(cfg), ConfigError);
}

TEST(Synthetic, SchemaAndAlignment) {
  SyntheticConfig cfg;
  cfg.sentences = 80;
  const auto corpus = generate_synthetic(cfg);
  EXPECT_EQ(corpus.schema.size(), 4U);
  for (const auto& s : corpus.sentences) {
    ASSERT_FALSE(s.triples.empty());
    ASSERT_EQ(s.subject_spans.size(), s.triples.size());
    for (std::size_t i = 0; i < s.triples.size(); ++i)
      EXPECT_EQ(join_tokens(s.tokens, s.subject_spans[i].start, s.subject_spans[i].end),
                normalize_surface(s.triples[i].subject));
  }
}
