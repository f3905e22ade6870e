#pragma once

// Pipeline configuration, read from an INI file:
//
//   seed = 42
//   [rules]            ; rule id = enabled, listed in evaluation order
//   html_tags = true
//   [tokenizer]        ; max_size, min_count, max_len
//   [vae]              ; d, h_dim, z_dim, epochs, batch_size, learning_rate, kl_anneal_steps
//   [threshold]        ; strategy (gmm|percentile|kmeans2), p, tol, max_iter
//   [paths]            ; input, bootstrap, titles, retained, rejects, scored, stats,
//                      ; report, checkpoint, vocabulary, out_dir

#include <cstddef>
#include <cstdint>
#include <fstream>
#include <istream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "qclean/error.hpp"
#include "qclean/rules.hpp"
#include "qclean/threshold.hpp"
#include "qclean/vae/params.hpp"

namespace qclean {

struct TokenizerConfig {
  std::size_t max_size = 10000;
  std::size_t min_count = 2;
  std::size_t max_len = 20;
};

struct ThresholdConfig {
  std::string strategy = "gmm";
  double p = 1.0;
  double tol = 1e-8;
  std::size_t max_iter = 500;

  Strategy to_strategy() const {
    Strategy s = parse_strategy(strategy, p);
    if (s.kind == StrategyKind::gmm) {
      s.tol = tol;
      s.max_iter = max_iter;
    }
    return s;
  }
};

struct PathsConfig {
  std::string input;
  std::string bootstrap;
  std::string titles;
  std::string retained;
  std::string rejects;
  std::string scored;
  std::string stats;
  std::string report;
  std::string checkpoint;
  std::string vocabulary;
  std::string out_dir;
};

struct PipelineConfig {
  std::vector<std::pair<std::string, bool>> rules;  // order + enabled flags
  std::vector<std::string> disabled_rules;          // applied after `rules`
  TokenizerConfig tokenizer;
  vae::VaeConfig vae;
  ThresholdConfig threshold;
  std::uint64_t seed = 42;
  PathsConfig paths;

  Ruleset ruleset() const {
    Ruleset rs = default_ruleset().configured(rules);
    for (const auto& id : disabled_rules) rs = rs.with_enabled(id, false);
    return rs;
  }

  /// VAE settings with the tokenizer length cap and the global seed folded in.
  vae::VaeConfig vae_config(std::size_t vocab_size) const {
    vae::VaeConfig c = vae;
    c.o_w = vocab_size;
    c.max_len = tokenizer.max_len;
    c.seed = seed;
    return c;
  }
};

namespace detail {

inline bool parse_bool(const std::string& key, std::string v) {
  for (char& c : v) c = text::to_lower(c);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw Error(ErrorKind::invalid_argument, "config: " + key + " expects a boolean, got \"" + v + "\"");
}

template <class T>
T parse_value(const std::string& key, const std::string& v) {
  std::istringstream in(v);
  T out{};
  in >> out;
  if (!in || !(in >> std::ws).eof())
    throw Error(ErrorKind::invalid_argument, "config: bad value for " + key + ": \"" + v + "\"");
  return out;
}

}  // namespace detail

inline PipelineConfig parse_config(std::istream& in, const std::string& source = "<config>") {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw Error(ErrorKind::invalid_argument, source + ": " + e.what());
  }
  PipelineConfig cfg;
  auto unknown = [&](const std::string& key) {
    throw Error(ErrorKind::invalid_argument, source + ": unknown config key \"" + key + "\"");
  };
  for (const auto& [name, node] : tree) {
    if (node.empty()) {  // top-level key, or a section without keys
      const std::string v = node.get_value<std::string>();
      const bool section = name == "rules" || name == "tokenizer" || name == "vae" || name == "threshold" ||
                           name == "paths";
      if (section && v.empty()) continue;
      if (name == "seed") cfg.seed = detail::parse_value<std::uint64_t>(name, v);
      else unknown(name);
      continue;
    }
    for (const auto& [key, child] : node) {
      const std::string v = child.get_value<std::string>();
      const std::string full = name + "." + key;
      if (name == "rules") {
        cfg.rules.emplace_back(key, detail::parse_bool(full, v));
      } else if (name == "tokenizer") {
        if (key == "max_size") cfg.tokenizer.max_size = detail::parse_value<std::size_t>(full, v);
        else if (key == "min_count") cfg.tokenizer.min_count = detail::parse_value<std::size_t>(full, v);
        else if (key == "max_len") cfg.tokenizer.max_len = detail::parse_value<std::size_t>(full, v);
        else unknown(full);
      } else if (name == "vae") {
        if (key == "d") cfg.vae.d = detail::parse_value<std::size_t>(full, v);
        else if (key == "h_dim") cfg.vae.h_dim = detail::parse_value<std::size_t>(full, v);
        else if (key == "z_dim") cfg.vae.z_dim = detail::parse_value<std::size_t>(full, v);
        else if (key == "epochs") cfg.vae.epochs = detail::parse_value<std::size_t>(full, v);
        else if (key == "batch_size") cfg.vae.batch_size = detail::parse_value<std::size_t>(full, v);
        else if (key == "learning_rate") cfg.vae.learning_rate = detail::parse_value<double>(full, v);
        else if (key == "kl_anneal_steps") cfg.vae.kl_anneal_steps = detail::parse_value<std::size_t>(full, v);
        else unknown(full);
      } else if (name == "threshold") {
        if (key == "strategy") cfg.threshold.strategy = v;
        else if (key == "p") cfg.threshold.p = detail::parse_value<double>(full, v);
        else if (key == "tol") cfg.threshold.tol = detail::parse_value<double>(full, v);
        else if (key == "max_iter") cfg.threshold.max_iter = detail::parse_value<std::size_t>(full, v);
        else unknown(full);
      } else if (name == "paths") {
        auto& p = cfg.paths;
        if (key == "input") p.input = v;
        else if (key == "bootstrap") p.bootstrap = v;
        else if (key == "titles") p.titles = v;
        else if (key == "retained") p.retained = v;
        else if (key == "rejects") p.rejects = v;
        else if (key == "scored") p.scored = v;
        else if (key == "stats") p.stats = v;
        else if (key == "report") p.report = v;
        else if (key == "checkpoint") p.checkpoint = v;
        else if (key == "vocabulary") p.vocabulary = v;
        else if (key == "out_dir") p.out_dir = v;
        else unknown(full);
      } else {
        unknown(name);
      }
    }
  }
  // Surface bad rule ids and strategies at load time.
  (void)cfg.ruleset();
  (void)cfg.threshold.to_strategy();
  return cfg;
}

inline PipelineConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot open config " + path);
  return parse_config(in, path);
}

}  // namespace qclean
