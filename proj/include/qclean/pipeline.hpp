#pragma once

// Pipeline stages: rule filter -> VAE training -> scoring -> partition.
// Each stage is usable on its own; run_pipeline() chains them and writes
// every intermediate artifact so a later stage can be rerun alone.

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <ostream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "qclean/config.hpp"
#include "qclean/corpus.hpp"
#include "qclean/error.hpp"
#include "qclean/parallel.hpp"
#include "qclean/record.hpp"
#include "qclean/rules.hpp"
#include "qclean/textenc.hpp"
#include "qclean/threshold.hpp"
#include "qclean/vae.hpp"

namespace qclean {

// ---------------------------------------------------------------------------
// Rule stage
// ---------------------------------------------------------------------------

struct RuleStatsRow {
  std::string rule_id;
  RuleKind kind = RuleKind::reject;
  std::size_t modified = 0;   // transforms: records whose text this rule changed
  std::size_t discarded = 0;  // rejects: records this rule dropped
  std::size_t retained = 0;   // records still alive after this row
};

struct RuleStats {
  std::size_t input = 0;
  std::size_t extract_modified = 0;
  std::vector<RuleStatsRow> rows;  // enabled rules in evaluation order
  std::size_t retained = 0;
  std::size_t rejected = 0;
};

struct RuleFilterResult {
  std::vector<Record> retained;
  std::vector<Record> rejects;
  RuleStats stats;
};

namespace detail {

struct RuleFilterItem {
  Record record;
  bool rejected = false;
  std::string reject_rule;
  std::vector<std::string> modified_by;
  bool extract_modified = false;
};

inline RuleFilterItem rule_filter_one(const Record& in, const Ruleset& ruleset) {
  RuleFilterItem item;
  item.record = in;
  Record& r = item.record;
  std::string sentence = extract_first_sentence(in.comment);
  if (sentence != in.comment) {
    item.extract_modified = true;
    r.provenance.push_back({Stage::extract, std::nullopt, ProvenanceAction::transformed, in.comment, sentence});
  }
  RuleOutcome outcome = apply_ruleset(ruleset, sentence);
  for (auto& step : outcome.steps) {
    if (std::find(item.modified_by.begin(), item.modified_by.end(), step.rule_id) == item.modified_by.end())
      item.modified_by.push_back(step.rule_id);
    r.provenance.push_back({Stage::rule, step.rule_id, ProvenanceAction::transformed, std::move(step.before),
                            std::move(step.after)});
  }
  if (outcome.action == RuleAction::rejected) {
    item.rejected = true;
    item.reject_rule = *outcome.rule_id;
    r.provenance.push_back({Stage::rule, outcome.rule_id, ProvenanceAction::rejected, std::nullopt, std::nullopt});
  } else {
    r.comment = std::move(*outcome.text);
    r.provenance.push_back({Stage::rule, std::nullopt, ProvenanceAction::retained, std::nullopt, std::nullopt});
  }
  return item;
}

}  // namespace detail

/// First-sentence extraction followed by the ruleset. Retained records carry
/// the cleaned comment; rejected records keep the original comment and a
/// provenance trail naming the rejecting rule.
inline RuleFilterResult rule_filter(const std::vector<Record>& input, const Ruleset& ruleset, std::size_t jobs = 1) {
  std::vector<detail::RuleFilterItem> items(input.size());
  parallel_for(input.size(), jobs, [&](std::size_t i) { items[i] = detail::rule_filter_one(input[i], ruleset); });

  RuleFilterResult out;
  RuleStats& st = out.stats;
  st.input = input.size();
  std::unordered_map<std::string, std::size_t> modified, discarded;
  for (auto& item : items) {
    st.extract_modified += item.extract_modified;
    for (const auto& id : item.modified_by) ++modified[id];
    if (item.rejected) {
      ++discarded[item.reject_rule];
      out.rejects.push_back(std::move(item.record));
    } else {
      out.retained.push_back(std::move(item.record));
    }
  }
  // Transform rows leave the retained count unchanged; reject rows lower it.
  std::size_t alive = input.size();
  for (const auto& rule : ruleset.rules()) {
    if (!rule.enabled()) continue;
    RuleStatsRow row{rule.id(), rule.kind()};
    if (rule.kind() == RuleKind::transform) {
      row.modified = modified[rule.id()];
    } else {
      row.discarded = discarded[rule.id()];
      alive -= row.discarded;
    }
    row.retained = alive;
    st.rows.push_back(row);
  }
  st.retained = out.retained.size();
  st.rejected = out.rejects.size();
  return out;
}

inline nlohmann::json stats_to_json(const RuleStats& st) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : st.rows) {
    rows.push_back({{"rule", r.rule_id},
                    {"kind", r.kind == RuleKind::transform ? "transform" : "reject"},
                    {"modified", r.modified},
                    {"discarded", r.discarded},
                    {"retained", r.retained}});
  }
  return {{"input", st.input},
          {"extract_modified", st.extract_modified},
          {"rules", rows},
          {"retained", st.retained},
          {"rejected", st.rejected}};
}

// ---------------------------------------------------------------------------
// Training stage
// ---------------------------------------------------------------------------

struct TrainedModel {
  Vocabulary vocab;
  vae::VaeConfig config;
  vae::TrainResult result;
};

inline TrainedModel train_model(const std::vector<std::string>& queries, const PipelineConfig& cfg,
                                const vae::EpochCallback& on_epoch = {}) {
  if (queries.empty()) throw Error(ErrorKind::empty_corpus, "bootstrap corpus is empty");
  std::vector<TokenSeq> tokenized;
  tokenized.reserve(queries.size());
  for (const auto& q : queries) tokenized.push_back(tokenize(q));
  Vocabulary vocab = build_vocab(tokenized, cfg.tokenizer.max_size, cfg.tokenizer.min_count);
  if (vocab.size() <= special::count)
    throw Error(ErrorKind::empty_corpus, "bootstrap corpus has no token reaching min_count " +
                                             std::to_string(cfg.tokenizer.min_count));
  vae::VaeConfig vcfg = cfg.vae_config(vocab.size());
  std::vector<IdSeq> encoded;
  encoded.reserve(tokenized.size());
  for (const auto& t : tokenized) encoded.push_back(encode(vocab, t, vcfg.max_len));
  auto result = vae::train(std::move(encoded), vcfg, on_epoch);
  return {std::move(vocab), vcfg, std::move(result)};
}

// ---------------------------------------------------------------------------
// Scoring stage
// ---------------------------------------------------------------------------

struct ScoreStats {
  std::vector<std::string> empty_encodings;  // ids whose comment had no tokens
};

/// Adds the reconstruction loss to every record, preserving order.
inline std::vector<Record> score_records(std::vector<Record> records, const vae::VaeParams& params,
                                         const Vocabulary& vocab, std::size_t max_len, std::size_t jobs = 1,
                                         ScoreStats* stats = nullptr) {
  std::vector<char> empty(records.size(), 0);
  parallel_for(records.size(), jobs, [&](std::size_t i) {
    TokenSeq tokens = tokenize(records[i].comment);
    empty[i] = tokens.empty();
    records[i].score = vae::reconstruction_loss(params, encode(vocab, tokens, max_len));
  });
  if (stats != nullptr) {
    for (std::size_t i = 0; i < records.size(); ++i)
      if (empty[i]) stats->empty_encodings.push_back(records[i].id);
  }
  return records;
}

// ---------------------------------------------------------------------------
// Partition stage
// ---------------------------------------------------------------------------

struct PartitionOutput {
  std::vector<Record> retained;
  std::vector<Record> rejects;
  PartitionReport report;
};

inline PartitionOutput partition_records(std::vector<Record> records, const Strategy& strategy,
                                         bool strip_provenance = false) {
  std::vector<ScoredItem> items;
  items.reserve(records.size());
  for (const auto& r : records) {
    if (!r.score) throw Error(ErrorKind::missing_score, "record \"" + r.id + "\" has no score");
    items.push_back({r.id, *r.score});
  }
  PartitionOutput out;
  if (records.empty()) {
    out.report.strategy = strategy;
    return out;
  }
  PartitionResult split = partition(items, strategy);
  std::unordered_map<std::string, bool> keep;
  for (const auto& id : split.retained) keep[id] = true;
  const std::string name = strategy.name();
  for (auto& r : records) {
    if (keep.count(r.id)) {
      if (strip_provenance) {
        r.provenance.clear();
        r.score.reset();
      } else {
        r.provenance.push_back({Stage::semantic, name, ProvenanceAction::retained, std::nullopt, std::nullopt});
      }
      out.retained.push_back(std::move(r));
    } else {
      r.provenance.push_back({Stage::semantic, name, ProvenanceAction::rejected, std::nullopt, std::nullopt});
      out.rejects.push_back(std::move(r));
    }
  }
  out.report = std::move(split.report);
  return out;
}

// ---------------------------------------------------------------------------
// End to end
// ---------------------------------------------------------------------------

struct RunOptions {
  std::size_t jobs = 1;
  bool strip_provenance = false;
  std::ostream* diag = nullptr;  // progress and counters; never data
};

struct RunArtifacts {
  std::filesystem::path rule_retained, rule_rejects, rule_stats;
  std::filesystem::path vocabulary, checkpoint;
  std::filesystem::path scored, retained, semantic_rejects, report;

  static RunArtifacts in(const std::filesystem::path& dir) {
    return {dir / "rule_retained.jsonl", dir / "rule_rejects.jsonl", dir / "rule_stats.json",
            dir / "vocab.txt",           dir / "model.qdva",         dir / "scored.jsonl",
            dir / "retained.jsonl",      dir / "semantic_rejects.jsonl", dir / "partition_report.json"};
  }
};

inline void write_json(const nlohmann::json& j, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::io, "cannot open " + path + " for writing");
  out << j.dump(2) << '\n';
  out.flush();
  if (!out) throw Error(ErrorKind::io, "write failure on " + path);
}

inline void print_epoch(std::ostream& os, const vae::EpochStats& e) {
  os << "epoch " << e.epoch << " ce=" << e.mean_ce << " kl=" << e.mean_kl << " total=" << e.mean_total
     << " time=" << e.seconds << "s\n";
}

/// Runs all four stages on `input` with `bootstrap` as the trusted query
/// corpus, writing every artifact into `out_dir`.
inline RunArtifacts run_pipeline(const std::string& input, const std::string& bootstrap, const std::string& out_dir,
                                 const PipelineConfig& cfg, const RunOptions& opt = {}) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw Error(ErrorKind::io, "cannot create " + out_dir + ": " + ec.message());
  RunArtifacts art = RunArtifacts::in(out_dir);
  auto diag = [&](const std::string& m) {
    if (opt.diag) *opt.diag << m << '\n';
  };

  auto records = read_jsonl(input);
  auto filtered = rule_filter(records, cfg.ruleset(), opt.jobs);
  write_jsonl(filtered.retained, art.rule_retained.string());
  write_jsonl(filtered.rejects, art.rule_rejects.string());
  write_json(stats_to_json(filtered.stats), art.rule_stats.string());
  diag("rule-filter: " + std::to_string(filtered.stats.retained) + " retained, " +
       std::to_string(filtered.stats.rejected) + " rejected");

  auto queries = read_lines(bootstrap);
  auto model = train_model(queries, cfg, [&](const vae::EpochStats& e) {
    if (opt.diag) print_epoch(*opt.diag, e);
  });
  save_vocab(model.vocab, art.vocabulary.string());
  vae::save_checkpoint(model.result.params, model.config, model.vocab.content_hash(), art.checkpoint.string());

  ScoreStats sstats;
  auto scored = score_records(std::move(filtered.retained), model.result.params, model.vocab, model.config.max_len,
                              opt.jobs, &sstats);
  write_jsonl(scored, art.scored.string());
  if (!sstats.empty_encodings.empty())
    diag("score: " + std::to_string(sstats.empty_encodings.size()) + " record(s) encode to BOS/EOS only");

  auto part = partition_records(std::move(scored), cfg.threshold.to_strategy(), opt.strip_provenance);
  write_jsonl(part.retained, art.retained.string());
  write_jsonl(part.rejects, art.semantic_rejects.string());
  write_json(report_to_json(part.report), art.report.string());
  diag("partition: " + std::to_string(part.retained.size()) + " retained, " + std::to_string(part.rejects.size()) +
       " rejected");
  return art;
}

}  // namespace qclean
