#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "qclean/corpus.hpp"
#include "qclean/record.hpp"

namespace {

using namespace qclean;

Error read_error(const std::string& data) {
  std::istringstream in(data);
  try {
    read_jsonl(in, "mem");
  } catch (const Error& e) {
    return e;
  }
  ADD_FAILURE() << "no error for: " << data;
  return Error(ErrorKind::invalid_argument, "");
}

TEST(ReadJsonl, MapsFields) {
  std::istringstream in(R"({"id":"a","comment":"parse line","code":"..."})" "\n");
  auto recs = read_jsonl(in);
  ASSERT_EQ(recs.size(), 1u);
  EXPECT_EQ(recs[0].id, "a");
  EXPECT_EQ(recs[0].comment, "parse line");
  EXPECT_EQ(recs[0].code, "...");
  EXPECT_FALSE(recs[0].score);
}

TEST(ReadJsonl, EmptyInput) {
  std::istringstream in("");
  EXPECT_TRUE(read_jsonl(in).empty());
}

TEST(ReadJsonl, DuplicateIdNamesLine) {
  auto e = read_error("{\"id\":\"a\",\"comment\":\"x\",\"code\":\"\"}\n{\"id\":\"a\",\"comment\":\"y\",\"code\":\"\"}\n");
  EXPECT_NE(std::string(e.what()).find("duplicate id"), std::string::npos);
  EXPECT_NE(std::string(e.what()).find("mem:2"), std::string::npos);
}

TEST(ReadJsonl, MalformedLineCarriesLineNumber) {
  auto e = read_error("{\"id\":\"a\",\"comment\":\"x\",\"code\":\"\"}\n\n{not json\n");
  EXPECT_EQ(e.kind(), ErrorKind::io);
  EXPECT_NE(std::string(e.what()).find("mem:3"), std::string::npos);
}

TEST(ReadJsonl, MissingFieldIsNamed) {
  auto e = read_error("{\"id\":\"a\",\"code\":\"\"}\n");
  EXPECT_NE(std::string(e.what()).find("\"comment\""), std::string::npos);
}

TEST(ReadJsonl, UnknownProvenanceActionRejected) {
  auto e = read_error(R"({"id":"a","comment":"x","code":"","provenance":[{"stage":"rule","action":"bogus"}]})" "\n");
  EXPECT_EQ(e.kind(), ErrorKind::io);
}

TEST(WriteJsonl, OneLinePerRecord) {
  std::ostringstream out;
  write_jsonl({Record{"a", "c", "x"}}, out);
  const auto s = out.str();
  EXPECT_EQ(std::count(s.begin(), s.end(), '\n'), 1);
  EXPECT_EQ(s.back(), '\n');
}

// Random valid UTF-8: ASCII, two-, three- and four-byte sequences.
std::string random_text(std::mt19937_64& rng) {
  static const std::vector<std::string> pieces = {"a", "Z", " ", "\n", "\t", "\"", "\\", "{", "é", "ï", "创", "建",
                                                  "😀", "\x01", "/", "<p>", "@"};
  std::string s;
  const auto n = rng() % 12;
  for (std::size_t i = 0; i < n; ++i) s += pieces[rng() % pieces.size()];
  return s;
}

Record random_record(std::mt19937_64& rng, std::size_t i) {
  Record r;
  r.id = "r" + std::to_string(i) + random_text(rng);
  r.comment = random_text(rng);
  r.code = random_text(rng);
  const auto np = rng() % 3;
  for (std::size_t k = 0; k < np; ++k) {
    ProvenanceEntry e;
    e.stage = static_cast<Stage>(rng() % 3);
    e.action = static_cast<ProvenanceAction>(rng() % 3);
    if (rng() % 2) e.rule_id = random_text(rng);
    if (rng() % 2) e.before = random_text(rng);
    if (rng() % 2) e.after = random_text(rng);
    r.provenance.push_back(e);
  }
  if (rng() % 2) r.score = std::uniform_real_distribution<double>(0.0, 20.0)(rng);
  if (rng() % 3 == 0) r.extra["repo"] = random_text(rng);
  if (rng() % 5 == 0) r.extra["lines"] = nlohmann::json::array({1, 2, 3});
  return r;
}

TEST(WriteJsonl, RandomRoundTrip) {
  std::mt19937_64 rng(123);
  std::vector<Record> records;
  for (std::size_t i = 0; i < 100; ++i) records.push_back(random_record(rng, i));
  std::stringstream buf;
  write_jsonl(records, buf);
  EXPECT_EQ(read_jsonl(buf), records);
}

TEST(WriteJsonl, NonAsciiIsLossless) {
  Record r{"u", "naïve 创建临时文件 😀", "int x;"};
  std::stringstream buf;
  write_jsonl({r}, buf);
  EXPECT_NE(buf.str().find("naïve"), std::string::npos);
  auto back = read_jsonl(buf);
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back[0], r);
}

TEST(FirstSentence, Examples) {
  EXPECT_EQ(extract_first_sentence("Parses a line. Returns null on failure."), "Parses a line.");
  EXPECT_EQ(extract_first_sentence("parse line"), "parse line");
  EXPECT_EQ(extract_first_sentence("Reads config\nand validates it.\nSee docs."), "Reads config and validates it.");
  EXPECT_EQ(extract_first_sentence(""), "");
  EXPECT_EQ(extract_first_sentence("Returns the value\n@return v"), "Returns the value");
  EXPECT_EQ(extract_first_sentence("Use e.g.this form"), "Use e.g.this form");
}

TEST(FirstSentence, Idempotent) {
  std::mt19937_64 rng(9);
  static const std::vector<std::string> pieces = {"word", " ", "\n", ".", "!", "?", "\t", "x.y", "  ", "A"};
  for (int t = 0; t < 2000; ++t) {
    std::string s;
    for (auto n = rng() % 15; n > 0; --n) s += pieces[rng() % pieces.size()];
    const auto once = extract_first_sentence(s);
    EXPECT_EQ(extract_first_sentence(once), once) << s;
  }
}

Ruleset bootstrap_rules() { return default_ruleset().with_enabled(rule_id::interrogation, false); }

TEST(Bootstrap, Examples) {
  BootstrapStats st;
  auto out = prepare_bootstrap({"How to convert string to int?", "Why is my loop slow?", "How to use {@link Foo}"},
                               bootstrap_rules(), &st);
  ASSERT_EQ(out, std::vector<std::string>{"convert string to int"});
  EXPECT_EQ(st.input, 3u);
  EXPECT_EQ(st.not_how_to, 1u);
  EXPECT_EQ(st.rejected_by_rule.at("javadoc"), 1u);
  EXPECT_EQ(st.retained, 1u);
}

TEST(Bootstrap, PrefixMustBeWholeWords) {
  EXPECT_EQ(bootstrap_query("HOW TO   read a <b>file</b> ??", bootstrap_rules()), "read a file");
  EXPECT_EQ(bootstrap_query("How tomake things work", bootstrap_rules()), "");
}

TEST(Bootstrap, OutputsAreDeclarative) {
  std::mt19937_64 rng(77);
  static const std::vector<std::string> pieces = {"how to ", "How To ", "sort", " list", "?", " ", "(x)", "how", "to",
                                                  " a", " map", "??", " in java"};
  std::vector<std::string> titles;
  for (int t = 0; t < 3000; ++t) {
    std::string s = (rng() % 4) ? "How to " : "";
    for (auto n = rng() % 8; n > 0; --n) s += pieces[rng() % pieces.size()];
    titles.push_back(s);
  }
  for (const auto& q : prepare_bootstrap(titles, bootstrap_rules())) {
    EXPECT_FALSE(text::istarts_with(q, "how to")) << q;
    EXPECT_NE(q.back(), '?') << q;
    EXPECT_EQ(text::trim(q), q);
  }
}

}  // namespace
