#pragma once

#include <cstddef>
#include <istream>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "qclean/record.hpp"
#include "qclean/rules.hpp"
#include "qclean/text_util.hpp"

namespace qclean {

/// Summary sentence of a doc comment: everything up to and including the
/// first '.', '!' or '?' that is followed by whitespace or end of text. With
/// no such terminator, the first line. Whitespace is trimmed and collapsed.
inline std::string extract_first_sentence(std::string_view comment) {
  auto is_terminator = [](char c) { return c == '.' || c == '!' || c == '?'; };
  for (std::size_t i = 0; i < comment.size(); ++i) {
    if (is_terminator(comment[i]) && (i + 1 == comment.size() || text::is_space(comment[i + 1])))
      return text::collapse_whitespace(comment.substr(0, i + 1));
  }
  auto t = text::trim(comment);
  auto eol = t.find_first_of("\r\n");
  return text::collapse_whitespace(t.substr(0, eol));
}

struct BootstrapStats {
  std::size_t input = 0;
  std::size_t not_how_to = 0;
  std::size_t malformed = 0;  // still a question or a "how to" after cleaning
  std::map<std::string, std::size_t> rejected_by_rule;
  std::size_t retained = 0;
};

namespace detail {

// Strips a leading "how to" (case-insensitive, whole words) and returns true,
// or returns false if the text does not start with it.
inline bool strip_how_to(std::string_view& s) {
  auto t = text::trim(s);
  if (!text::istarts_with(t, "how to")) return false;
  if (t.size() > 6 && text::is_alnum(t[6])) return false;
  s = text::trim(t.substr(6));
  return true;
}

inline std::string_view strip_trailing_questions(std::string_view s) {
  s = text::trim(s);
  while (!s.empty() && s.back() == '?') s = text::trim(s.substr(0, s.size() - 1));
  return s;
}

}  // namespace detail

/// Turns one "how to" question title into a declarative query, or returns an
/// empty string if it is dropped. The ruleset is expected to have the
/// interrogation rule disabled.
inline std::string bootstrap_query(std::string_view title, const Ruleset& ruleset,
                                   BootstrapStats* stats = nullptr) {
  BootstrapStats local;
  BootstrapStats& st = stats ? *stats : local;
  ++st.input;
  std::string_view body = title;
  if (!detail::strip_how_to(body)) {
    ++st.not_how_to;
    return {};
  }
  body = detail::strip_trailing_questions(body);
  auto outcome = apply_ruleset(ruleset, body);
  if (outcome.action == RuleAction::rejected) {
    ++st.rejected_by_rule[*outcome.rule_id];
    return {};
  }
  std::string query(text::trim(*outcome.text));
  if (query.empty() || text::istarts_with(query, "how to") || query.back() == '?') {
    ++st.malformed;
    return {};
  }
  ++st.retained;
  return query;
}

inline std::vector<std::string> prepare_bootstrap(const std::vector<std::string>& titles,
                                                  const Ruleset& ruleset,
                                                  BootstrapStats* stats = nullptr) {
  std::vector<std::string> out;
  for (const auto& t : titles) {
    auto q = bootstrap_query(t, ruleset, stats);
    if (!q.empty()) out.push_back(std::move(q));
  }
  return out;
}

/// Plain-text corpus, one entry per line. Blank lines are skipped.
inline std::vector<std::string> read_lines(std::istream& in) {
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (text::trim(line).empty()) continue;
    lines.push_back(line);
  }
  return lines;
}

inline std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open " + path);
  return read_lines(in);
}

inline void write_lines(const std::vector<std::string>& lines, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::io, "cannot open " + path + " for writing");
  for (const auto& l : lines) out << l << '\n';
  out.flush();
  if (!out) throw Error(ErrorKind::io, "write failure on " + path);
}

}  // namespace qclean
