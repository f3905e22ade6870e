#pragma once

// Syntactic comment filter: an ordered, extensible list of transform rules
// (cut a detachable part out of the text) and reject rules (drop the whole
// comment).

#include <algorithm>
#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "qclean/error.hpp"
#include "qclean/text_util.hpp"

namespace qclean {

namespace rule_id {
inline constexpr std::string_view html_tags = "html_tags";
inline constexpr std::string_view parentheses = "parentheses";
inline constexpr std::string_view javadoc = "javadoc";
inline constexpr std::string_view urls = "urls";
inline constexpr std::string_view non_english = "non_english";
inline constexpr std::string_view punctuation = "punctuation";
inline constexpr std::string_view interrogation = "interrogation";
inline constexpr std::string_view short_sentence = "short_sentence";
}  // namespace rule_id

// ---------------------------------------------------------------------------
// Built-in rules
// ---------------------------------------------------------------------------

namespace detail {

// Length of the HTML tag starting at s[0] == '<', or 0 if s does not start
// with a tag. Tag grammar: '<' '/'? letter [A-Za-z0-9:-]* (ws [^<>]*)? '/'? '>'.
inline std::size_t html_tag_length(std::string_view s) noexcept {
  std::size_t i = 1;
  if (i < s.size() && s[i] == '/') ++i;
  if (i >= s.size() || !text::is_alpha(s[i])) return 0;
  ++i;
  while (i < s.size() && (text::is_alnum(s[i]) || s[i] == '-' || s[i] == ':')) ++i;
  if (i < s.size() && text::is_space(s[i])) {
    while (i < s.size() && s[i] != '<' && s[i] != '>') ++i;
  } else if (i < s.size() && s[i] == '/') {
    ++i;
  }
  return (i < s.size() && s[i] == '>') ? i + 1 : 0;
}

}  // namespace detail

/// Deletes HTML tags, keeping the wrapped content. Whitespace is re-collapsed
/// only if something was removed; text without tags is returned unchanged.
inline std::string strip_html_tags(std::string_view input) {
  std::string current(input);
  bool removed_any = false;
  // Deleting "<b>" from "<<b>p>" exposes a new tag, so repeat until stable.
  for (;;) {
    std::string next;
    next.reserve(current.size());
    bool removed = false;
    for (std::size_t i = 0; i < current.size();) {
      if (current[i] == '<') {
        if (auto len = detail::html_tag_length(std::string_view(current).substr(i))) {
          i += len;
          removed = true;
          continue;
        }
      }
      next.push_back(current[i++]);
    }
    if (!removed) break;
    removed_any = true;
    current = std::move(next);
  }
  return removed_any ? text::collapse_whitespace(current) : current;
}

/// Removes every balanced "(...)" span, nested spans included. An unmatched
/// '(' swallows the rest of the text; a stray ')' is left alone.
inline std::string strip_parentheses(std::string_view input) {
  std::string out;
  out.reserve(input.size());
  std::size_t depth = 0;
  bool removed = false;
  for (char c : input) {
    if (c == '(') {
      ++depth;
      removed = true;
    } else if (c == ')' && depth > 0) {
      --depth;
    } else if (depth == 0) {
      out.push_back(c);
    }
  }
  return removed ? text::collapse_whitespace(out) : out;
}

// '@' directly followed by a letter: "@param", "{@link Foo}". E-mail
// addresses match too and are rejected along with real tags.
inline bool reject_javadoc(std::string_view s) noexcept {
  for (std::size_t i = 0; i + 1 < s.size(); ++i)
    if (s[i] == '@' && text::is_alpha(s[i + 1])) return true;
  return false;
}

inline bool reject_url(std::string_view s) noexcept {
  for (std::string_view scheme : {"http://", "https://", "ftp://"})
    if (text::icontains(s, scheme)) return true;
  for (std::size_t i = 0; i + 4 <= s.size(); ++i) {
    if ((i == 0 || !text::is_alnum(s[i - 1])) && text::istarts_with(s.substr(i), "www."))
      return true;
  }
  return false;
}

// Any byte above 0x7F means a code point above 127 in UTF-8 text.
inline bool reject_non_english(std::string_view s) noexcept {
  return std::any_of(s.begin(), s.end(),
                     [](char c) { return static_cast<unsigned char>(c) > 0x7F; });
}

inline bool reject_punctuation_only(std::string_view s) noexcept {
  return std::none_of(s.begin(), s.end(), [](char c) { return text::is_alpha(c); });
}

inline bool reject_interrogation(std::string_view s) noexcept {
  auto t = text::trim(s);
  return !t.empty() && t.back() == '?';
}

inline bool reject_short(std::string_view s) noexcept { return text::count_words(s) <= 2; }

// ---------------------------------------------------------------------------
// Ruleset
// ---------------------------------------------------------------------------

enum class RuleKind { transform, reject };

using TransformFn = std::function<std::string(std::string_view)>;
using PredicateFn = std::function<bool(std::string_view)>;

struct RuleDescriptor {
  std::string id;
  RuleKind kind = RuleKind::reject;
  bool enabled = true;
};

struct Rule {
  RuleDescriptor descriptor;
  std::variant<TransformFn, PredicateFn> fn;

  static Rule transform(std::string id, TransformFn f, bool enabled = true) {
    return Rule{{std::move(id), RuleKind::transform, enabled}, std::move(f)};
  }
  static Rule reject(std::string id, PredicateFn f, bool enabled = true) {
    return Rule{{std::move(id), RuleKind::reject, enabled}, std::move(f)};
  }

  const std::string& id() const noexcept { return descriptor.id; }
  RuleKind kind() const noexcept { return descriptor.kind; }
  bool enabled() const noexcept { return descriptor.enabled; }
};

enum class RuleAction { kept, transformed, rejected };

struct TransformStep {
  std::string rule_id;
  std::string before;
  std::string after;
};

struct RuleOutcome {
  RuleAction action = RuleAction::kept;
  std::optional<std::string> rule_id;  // rejecting rule
  std::optional<std::string> text;     // absent when rejected
  std::vector<TransformStep> steps;    // every transform that changed the text
};

/// Ordered rules, transforms first. Immutable once built: every modifier
/// returns a new Ruleset, so one instance can be shared between threads.
class Ruleset {
 public:
  Ruleset() = default;

  const std::vector<Rule>& rules() const noexcept { return rules_; }
  std::size_t size() const noexcept { return rules_.size(); }

  const Rule* find(std::string_view id) const noexcept {
    auto it = std::find_if(rules_.begin(), rules_.end(),
                           [&](const Rule& r) { return r.id() == id; });
    return it == rules_.end() ? nullptr : &*it;
  }

  bool is_enabled(std::string_view id) const noexcept {
    const Rule* r = find(id);
    return r != nullptr && r->enabled();
  }

  std::vector<RuleDescriptor> descriptors() const {
    std::vector<RuleDescriptor> out;
    for (const auto& r : rules_) out.push_back(r.descriptor);
    return out;
  }

  /// Appends a rule at the end of its kind group. The rule should define a
  /// unique construction pattern, be conservative, and not be a sub-rule of
  /// an existing one; that is the caller's responsibility.
  Ruleset with_rule(Rule rule) const {
    if (rule.id().empty()) throw Error(ErrorKind::invalid_argument, "rule id must not be empty");
    if (find(rule.id()) != nullptr)
      throw Error(ErrorKind::invalid_argument, "duplicate rule id: " + rule.id());
    if ((rule.kind() == RuleKind::transform) != std::holds_alternative<TransformFn>(rule.fn))
      throw Error(ErrorKind::invalid_argument, "rule kind does not match its function: " + rule.id());
    Ruleset out = *this;
    auto pos = out.rules_.end();
    if (rule.kind() == RuleKind::transform) {
      pos = std::find_if(out.rules_.begin(), out.rules_.end(),
                         [](const Rule& r) { return r.kind() == RuleKind::reject; });
    }
    out.rules_.insert(pos, std::move(rule));
    return out;
  }

  Ruleset with_enabled(std::string_view id, bool enabled) const {
    Ruleset out = *this;
    auto it = std::find_if(out.rules_.begin(), out.rules_.end(),
                           [&](const Rule& r) { return r.id() == id; });
    if (it == out.rules_.end())
      throw Error(ErrorKind::invalid_argument, "unknown rule id: " + std::string(id));
    it->descriptor.enabled = enabled;
    return out;
  }

  /// Reorders and enables/disables rules. Listed ids come first in the given
  /// order; unlisted rules follow in their current order. Kind grouping is
  /// preserved (transforms always run before rejects).
  Ruleset configured(const std::vector<std::pair<std::string, bool>>& entries) const {
    std::vector<Rule> listed;
    for (const auto& [id, enabled] : entries) {
      const Rule* r = find(id);
      if (r == nullptr) throw Error(ErrorKind::invalid_argument, "unknown rule id: " + id);
      if (std::any_of(listed.begin(), listed.end(), [&](const Rule& x) { return x.id() == id; }))
        throw Error(ErrorKind::invalid_argument, "rule listed twice: " + id);
      listed.push_back(*r);
      listed.back().descriptor.enabled = enabled;
    }
    for (const auto& r : rules_) {
      if (std::none_of(listed.begin(), listed.end(), [&](const Rule& x) { return x.id() == r.id(); }))
        listed.push_back(r);
    }
    std::stable_partition(listed.begin(), listed.end(),
                          [](const Rule& r) { return r.kind() == RuleKind::transform; });
    Ruleset out;
    out.rules_ = std::move(listed);
    return out;
  }

 private:
  std::vector<Rule> rules_;
};

inline Ruleset register_rule(const Ruleset& ruleset, Rule rule) {
  return ruleset.with_rule(std::move(rule));
}

/// The eight built-in rules in their default order.
inline Ruleset default_ruleset() {
  return Ruleset{}
      .with_rule(Rule::transform(std::string(rule_id::html_tags), strip_html_tags))
      .with_rule(Rule::transform(std::string(rule_id::parentheses), strip_parentheses))
      .with_rule(Rule::reject(std::string(rule_id::javadoc), reject_javadoc))
      .with_rule(Rule::reject(std::string(rule_id::urls), reject_url))
      .with_rule(Rule::reject(std::string(rule_id::non_english), reject_non_english))
      .with_rule(Rule::reject(std::string(rule_id::punctuation), reject_punctuation_only))
      .with_rule(Rule::reject(std::string(rule_id::interrogation), reject_interrogation))
      .with_rule(Rule::reject(std::string(rule_id::short_sentence), reject_short));
}

/// Runs the enabled transforms in order, repeating the pass until the text
/// stops changing (a later transform can expose a pattern an earlier one
/// handles), then evaluates reject rules on the result; the first match wins.
inline RuleOutcome apply_ruleset(const Ruleset& ruleset, std::string_view input) {
  RuleOutcome outcome;
  std::string current(input);
  for (bool changed = true; changed;) {
    changed = false;
    for (const auto& rule : ruleset.rules()) {
      if (!rule.enabled() || rule.kind() != RuleKind::transform) continue;
      std::string next = std::get<TransformFn>(rule.fn)(current);
      if (next != current) {
        outcome.steps.push_back({rule.id(), current, next});
        current = std::move(next);
        changed = true;
      }
    }
  }
  for (const auto& rule : ruleset.rules()) {
    if (!rule.enabled() || rule.kind() != RuleKind::reject) continue;
    if (std::get<PredicateFn>(rule.fn)(current)) {
      outcome.action = RuleAction::rejected;
      outcome.rule_id = rule.id();
      return outcome;
    }
  }
  outcome.action = current == input ? RuleAction::kept : RuleAction::transformed;
  outcome.text = std::move(current);
  return outcome;
}

}  // namespace qclean
