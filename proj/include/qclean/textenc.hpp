#pragma once

// Tokenization and vocabulary shared by VAE training and scoring.

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "qclean/error.hpp"
#include "qclean/text_util.hpp"

namespace qclean {

using TokenId = std::int32_t;
using TokenSeq = std::vector<std::string>;
using IdSeq = std::vector<TokenId>;

namespace special {
inline constexpr TokenId pad = 0;
inline constexpr TokenId bos = 1;
inline constexpr TokenId eos = 2;
inline constexpr TokenId unk = 3;
inline constexpr TokenId count = 4;
}  // namespace special

/// Lowercase, split on anything that is not an ASCII letter or digit.
inline TokenSeq tokenize(std::string_view s) {
  TokenSeq tokens;
  std::string cur;
  for (char c : s) {
    if (text::is_alnum(c)) {
      cur.push_back(text::to_lower(c));
    } else if (!cur.empty()) {
      tokens.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

class Vocabulary {
 public:
  static constexpr std::string_view kSpecials[special::count] = {"<pad>", "<bos>", "<eos>", "<unk>"};

  Vocabulary() {
    for (auto s : kSpecials) add(std::string(s));
  }

  /// Builds from an id-ordered token list, which must start with the specials.
  static Vocabulary from_tokens(const std::vector<std::string>& tokens) {
    if (tokens.size() < special::count)
      throw Error(ErrorKind::invalid_argument, "vocabulary is missing the special tokens");
    for (TokenId i = 0; i < special::count; ++i)
      if (tokens[i] != kSpecials[i])
        throw Error(ErrorKind::invalid_argument, "vocabulary special token mismatch at id " + std::to_string(i));
    Vocabulary v;
    for (std::size_t i = special::count; i < tokens.size(); ++i) {
      if (v.contains(tokens[i]))
        throw Error(ErrorKind::invalid_argument, "duplicate vocabulary token: " + tokens[i]);
      v.add(tokens[i]);
    }
    return v;
  }

  std::size_t size() const noexcept { return id_to_token_.size(); }

  bool contains(std::string_view token) const {
    return token_to_id_.find(std::string(token)) != token_to_id_.end();
  }

  TokenId id(std::string_view token) const {
    auto it = token_to_id_.find(std::string(token));
    return it == token_to_id_.end() ? special::unk : it->second;
  }

  const std::string& token(TokenId id) const { return id_to_token_.at(static_cast<std::size_t>(id)); }

  const std::vector<std::string>& tokens() const noexcept { return id_to_token_; }

  /// FNV-1a over the persisted form; binds checkpoints to their vocabulary.
  std::uint64_t content_hash() const noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](unsigned char b) {
      h ^= b;
      h *= 0x100000001b3ULL;
    };
    for (const auto& t : id_to_token_) {
      for (char c : t) mix(static_cast<unsigned char>(c));
      mix('\n');
    }
    return h;
  }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.id_to_token_ == b.id_to_token_;
  }

 private:
  void add(std::string token) {
    token_to_id_.emplace(token, static_cast<TokenId>(id_to_token_.size()));
    id_to_token_.push_back(std::move(token));
  }

  std::unordered_map<std::string, TokenId> token_to_id_;
  std::vector<std::string> id_to_token_;
};

/// Keeps tokens seen at least `min_count` times, most frequent first (ties
/// broken lexicographically), capped so the total size is <= max_size.
inline Vocabulary build_vocab(const std::vector<TokenSeq>& corpus, std::size_t max_size,
                              std::size_t min_count) {
  if (max_size < special::count + 1)
    throw Error(ErrorKind::invalid_argument, "vocabulary max_size must be >= 5");
  if (min_count < 1) throw Error(ErrorKind::invalid_argument, "vocabulary min_count must be >= 1");
  std::unordered_map<std::string, std::size_t> counts;
  for (const auto& seq : corpus)
    for (const auto& t : seq) ++counts[t];
  std::vector<std::pair<std::string, std::size_t>> ranked;
  for (auto& [tok, n] : counts)
    if (n >= min_count) ranked.emplace_back(tok, n);
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  std::vector<std::string> tokens(std::begin(Vocabulary::kSpecials), std::end(Vocabulary::kSpecials));
  for (const auto& [tok, n] : ranked) {
    if (tokens.size() >= max_size) break;
    tokens.push_back(tok);
  }
  return Vocabulary::from_tokens(tokens);
}

/// [BOS] ids... [EOS], with the body truncated so the total is <= max_len.
inline IdSeq encode(const Vocabulary& vocab, const TokenSeq& tokens, std::size_t max_len) {
  if (max_len < 3) throw Error(ErrorKind::invalid_argument, "max_len must be >= 3");
  IdSeq ids;
  ids.reserve(std::min(tokens.size(), max_len - 2) + 2);
  ids.push_back(special::bos);
  for (std::size_t i = 0; i < tokens.size() && i < max_len - 2; ++i) ids.push_back(vocab.id(tokens[i]));
  ids.push_back(special::eos);
  return ids;
}

/// Inverse of encode for in-vocabulary tokens; BOS/EOS/PAD are dropped.
inline TokenSeq decode(const Vocabulary& vocab, const IdSeq& ids) {
  TokenSeq out;
  for (TokenId id : ids) {
    if (id == special::bos || id == special::eos || id == special::pad) continue;
    out.push_back(vocab.token(id));
  }
  return out;
}

inline void save_vocab(const Vocabulary& vocab, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::io, "cannot open " + path + " for writing");
  for (const auto& t : vocab.tokens()) out << t << '\n';
  out.flush();
  if (!out) throw Error(ErrorKind::io, "write failure on " + path);
}

inline Vocabulary load_vocab(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open " + path);
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) tokens.push_back(line);
  try {
    return Vocabulary::from_tokens(tokens);
  } catch (const Error& e) {
    throw Error(ErrorKind::io, path + ": " + e.what());
  }
}

}  // namespace qclean
