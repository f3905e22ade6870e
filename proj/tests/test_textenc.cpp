#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "qclean/textenc.hpp"

namespace {

using namespace qclean;
using T = TokenSeq;

TEST(Tokenize, Examples) {
  EXPECT_EQ(tokenize("Convert String to int"), (T{"convert", "string", "to", "int"}));
  EXPECT_EQ(tokenize(""), T{});
  EXPECT_EQ(tokenize("read-write I/O"), (T{"read", "write", "i", "o"}));
  EXPECT_EQ(tokenize("  v2 ... naïve  "), (T{"v2", "na", "ve"}));
}

TEST(BuildVocab, Examples) {
  auto v = build_vocab({{"a", "b"}, {"a"}}, 10, 1);
  EXPECT_EQ(v.size(), 6u);
  EXPECT_EQ(v.id("a"), 4);
  EXPECT_EQ(v.id("b"), 5);

  EXPECT_EQ(build_vocab({}, 10, 1).size(), 4u);

  auto tie = build_vocab({{"y", "x"}, {"y", "x"}}, 10, 1);
  EXPECT_LT(tie.id("x"), tie.id("y"));
}

TEST(BuildVocab, MinCountAndCap) {
  auto v = build_vocab({{"a", "a", "a", "b", "b", "c"}}, 100, 2);
  EXPECT_EQ(v.tokens(), (std::vector<std::string>{"<pad>", "<bos>", "<eos>", "<unk>", "a", "b"}));
  auto capped = build_vocab({{"a", "a", "a", "b", "b", "c"}}, 5, 1);
  EXPECT_EQ(capped.size(), 5u);
  EXPECT_EQ(capped.token(4), "a");
  EXPECT_THROW(build_vocab({}, 4, 1), Error);
  EXPECT_THROW(build_vocab({}, 10, 0), Error);
}

TEST(BuildVocab, SpecialsNeverCollide) {
  auto v = build_vocab({{"pad", "bos", "unk", "eos"}}, 100, 1);
  EXPECT_EQ(v.id("<pad>"), special::pad);
  EXPECT_EQ(v.id("<unk>"), special::unk);
  EXPECT_GE(v.id("unk"), special::count);
}

TEST(BuildVocab, BijectionAndDeterminism) {
  std::mt19937_64 rng(3);
  std::vector<TokenSeq> corpus;
  for (int i = 0; i < 300; ++i) {
    TokenSeq s;
    for (auto n = rng() % 8; n > 0; --n) s.push_back("w" + std::to_string(rng() % 60));
    corpus.push_back(s);
  }
  auto a = build_vocab(corpus, 40, 2);
  auto b = build_vocab(corpus, 40, 2);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.content_hash(), b.content_hash());
  EXPECT_LE(a.size(), 40u);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a.id(a.token(static_cast<TokenId>(i))), static_cast<TokenId>(i));
}

TEST(Encode, Examples) {
  auto v = build_vocab({{"a"}}, 10, 1);
  EXPECT_EQ(encode(v, {"a"}, 20), (IdSeq{1, 4, 2}));
  EXPECT_EQ(encode(v, {"zzz"}, 20), (IdSeq{1, 3, 2}));
  TokenSeq many(50, "a");
  auto ids = encode(v, many, 10);
  EXPECT_EQ(ids.size(), 10u);
  EXPECT_EQ(ids.back(), special::eos);
  EXPECT_THROW(encode(v, {"a"}, 2), Error);
}

TEST(Encode, ShapeAndDecodeRoundTrip) {
  std::mt19937_64 rng(8);
  std::vector<std::string> words;
  for (int i = 0; i < 30; ++i) words.push_back("t" + std::to_string(i));
  auto v = build_vocab({words}, 100, 1);
  for (int t = 0; t < 500; ++t) {
    TokenSeq s;
    for (auto n = 1 + rng() % 25; n > 0; --n) s.push_back(words[rng() % words.size()]);
    const std::size_t max_len = 3 + rng() % 20;
    auto ids = encode(v, s, max_len);
    EXPECT_GE(ids.size(), 3u);
    EXPECT_LE(ids.size(), max_len);
    EXPECT_EQ(ids.front(), special::bos);
    EXPECT_EQ(ids.back(), special::eos);
    if (s.size() + 2 <= max_len) EXPECT_EQ(decode(v, ids), s);
  }
}

TEST(VocabFile, RoundTripAndHash) {
  auto v = build_vocab({{"alpha", "beta", "beta"}}, 100, 1);
  auto path = (std::filesystem::temp_directory_path() / ("qclean_vocab_" + std::to_string(::getpid()))).string();
  save_vocab(v, path);
  std::ifstream in(path);
  std::string first;
  std::getline(in, first);
  EXPECT_EQ(first, "<pad>");
  auto back = load_vocab(path);
  EXPECT_EQ(back, v);
  EXPECT_EQ(back.content_hash(), v.content_hash());
  EXPECT_NE(build_vocab({{"alpha"}}, 100, 1).content_hash(), v.content_hash());
  std::filesystem::remove(path);
  EXPECT_THROW(load_vocab(path), Error);
}

}  // namespace
