// qclean: command-line front end for the comment-cleaning pipeline.

#include <cstdint>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "qclean/config.hpp"
#include "qclean/corpus.hpp"
#include "qclean/error.hpp"
#include "qclean/metrics.hpp"
#include "qclean/pipeline.hpp"
#include "qclean/textenc.hpp"
#include "qclean/vae.hpp"

namespace {

using qclean::Error;
using qclean::ErrorKind;

struct GlobalFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::size_t jobs = 1;
  bool quiet = false;
};

// Flags that override config values when given on the command line.
struct Overrides {
  std::vector<std::string> disable_rules;
  std::optional<std::string> strategy;
  std::optional<double> p;
  std::optional<std::size_t> epochs;
};

const std::string& require(const std::string& value, const char* what) {
  if (value.empty()) throw Error(ErrorKind::invalid_argument, std::string("missing ") + what);
  return value;
}

std::string pick(const std::string& flag, const std::string& config_value) {
  return flag.empty() ? config_value : flag;
}

class Cli {
 public:
  Cli() : app_("Two-stage cleaning of comment-code pairs into query-like training data", "qclean") {
    app_.require_subcommand(1);
    app_.add_option("--config", global_.config, "INI configuration file");
    app_.add_option("--seed", global_.seed, "Seed for every stochastic component");
    app_.add_option("--jobs", global_.jobs, "Worker threads for rule filtering and scoring")
        ->check(CLI::PositiveNumber);
    app_.add_flag("--quiet", global_.quiet, "Suppress diagnostics on stderr");

    add_rule_filter();
    add_bootstrap();
    add_train();
    add_score();
    add_partition();
    add_run();
    add_metrics();
    add_sample_size();
  }

  int main(int argc, char** argv) {
    try {
      app_.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
      return app_.exit(e);
    }
    try {
      action_();
      return 0;
    } catch (const Error& e) {
      std::cerr << "qclean: " << e.what() << '\n';
      return qclean::exit_code(e.kind());
    } catch (const std::exception& e) {
      std::cerr << "qclean: " << e.what() << '\n';
      return 1;
    }
  }

 private:
  std::ostream* diag() { return global_.quiet ? nullptr : &std::cerr; }

  void note(const std::string& m) {
    if (!global_.quiet) std::cerr << m << '\n';
  }

  qclean::PipelineConfig config() {
    qclean::PipelineConfig cfg;
    if (!global_.config.empty()) cfg = qclean::load_config(global_.config);
    if (global_.seed) cfg.seed = *global_.seed;
    for (const auto& id : over_.disable_rules) cfg.disabled_rules.push_back(id);
    if (over_.strategy) cfg.threshold.strategy = *over_.strategy;
    if (over_.p) cfg.threshold.p = *over_.p;
    if (over_.epochs) cfg.vae.epochs = *over_.epochs;
    (void)cfg.ruleset();
    (void)cfg.threshold.to_strategy();
    return cfg;
  }

  void add_disable_rule(CLI::App* sub) {
    sub->add_option("--disable-rule", over_.disable_rules, "Disable a rule by id (repeatable)");
  }
  void add_strategy(CLI::App* sub) {
    sub->add_option("--strategy", over_.strategy, "gmm, percentile or kmeans2");
    sub->add_option("--p", over_.p, "Retained fraction for the percentile strategy");
  }

  void add_rule_filter() {
    auto* sub = app_.add_subcommand("rule-filter", "First-sentence extraction and syntactic rules");
    sub->add_option("--input", paths_.input, "Input JSONL");
    sub->add_option("--retained", paths_.retained, "Retained records (JSONL)");
    sub->add_option("--rejects", paths_.rejects, "Rejected records (JSONL)");
    sub->add_option("--stats", paths_.stats, "Per-rule statistics (JSON)");
    add_disable_rule(sub);
    sub->callback([this] {
      action_ = [this] {
        auto cfg = config();
        auto records = qclean::read_jsonl(require(pick(paths_.input, cfg.paths.input), "--input"));
        auto result = qclean::rule_filter(records, cfg.ruleset(), global_.jobs);
        qclean::write_jsonl(result.retained, require(pick(paths_.retained, cfg.paths.retained), "--retained"));
        qclean::write_jsonl(result.rejects, require(pick(paths_.rejects, cfg.paths.rejects), "--rejects"));
        const auto stats = qclean::stats_to_json(result.stats);
        const std::string stats_path = pick(paths_.stats, cfg.paths.stats);
        if (!stats_path.empty()) qclean::write_json(stats, stats_path);
        if (!global_.quiet) std::cerr << stats.dump(2) << '\n';
      };
    });
  }

  void add_bootstrap() {
    auto* sub = app_.add_subcommand("bootstrap", "Turn \"how to\" question titles into a query corpus");
    sub->add_option("--titles", paths_.titles, "Question titles, one per line");
    sub->add_option("--output", paths_.bootstrap, "Query corpus, one per line");
    add_disable_rule(sub);
    sub->callback([this] {
      action_ = [this] {
        auto cfg = config();
        auto ruleset = cfg.ruleset();
        if (ruleset.find(qclean::rule_id::interrogation))
          ruleset = ruleset.with_enabled(qclean::rule_id::interrogation, false);
        auto titles = qclean::read_lines(require(pick(paths_.titles, cfg.paths.titles), "--titles"));
        qclean::BootstrapStats st;
        auto queries = qclean::prepare_bootstrap(titles, ruleset, &st);
        qclean::write_lines(queries, require(pick(paths_.bootstrap, cfg.paths.bootstrap), "--output"));
        nlohmann::json j{{"input", st.input},
                         {"not_how_to", st.not_how_to},
                         {"malformed", st.malformed},
                         {"rejected_by_rule", st.rejected_by_rule},
                         {"retained", st.retained}};
        note(j.dump(2));
      };
    });
  }

  void add_train() {
    auto* sub = app_.add_subcommand("train", "Train the VAE on a bootstrap query corpus");
    sub->add_option("--bootstrap", paths_.bootstrap, "Query corpus, one per line");
    sub->add_option("--checkpoint", paths_.checkpoint, "Output checkpoint");
    sub->add_option("--vocab", paths_.vocabulary, "Output vocabulary file");
    sub->add_option("--epochs", over_.epochs, "Training epochs");
    sub->callback([this] {
      action_ = [this] {
        auto cfg = config();
        auto queries = qclean::read_lines(require(pick(paths_.bootstrap, cfg.paths.bootstrap), "--bootstrap"));
        const auto ck_path = require(pick(paths_.checkpoint, cfg.paths.checkpoint), "--checkpoint");
        const auto vocab_path = require(pick(paths_.vocabulary, cfg.paths.vocabulary), "--vocab");
        auto model = qclean::train_model(queries, cfg, [this](const qclean::vae::EpochStats& e) {
          if (!global_.quiet) qclean::print_epoch(std::cerr, e);
        });
        qclean::save_vocab(model.vocab, vocab_path);
        qclean::vae::save_checkpoint(model.result.params, model.config, model.vocab.content_hash(), ck_path);
        note("vocabulary size " + std::to_string(model.vocab.size()) + ", " +
             std::to_string(model.result.params.parameter_count()) + " parameters");
      };
    });
  }

  void add_score() {
    auto* sub = app_.add_subcommand("score", "Attach reconstruction losses to records");
    sub->add_option("--input", paths_.retained, "Rule-filtered JSONL");
    sub->add_option("--checkpoint", paths_.checkpoint, "Trained checkpoint");
    sub->add_option("--vocab", paths_.vocabulary, "Vocabulary the checkpoint was trained with");
    sub->add_option("--output", paths_.scored, "Scored JSONL");
    sub->callback([this] {
      action_ = [this] {
        auto cfg = config();
        auto vocab = qclean::load_vocab(require(pick(paths_.vocabulary, cfg.paths.vocabulary), "--vocab"));
        auto ck = qclean::vae::load_checkpoint(require(pick(paths_.checkpoint, cfg.paths.checkpoint), "--checkpoint"),
                                               &vocab);
        auto records = qclean::read_jsonl(require(pick(paths_.retained, cfg.paths.retained), "--input"));
        qclean::ScoreStats st;
        auto scored = qclean::score_records(std::move(records), ck.params, vocab, ck.config.max_len, global_.jobs, &st);
        qclean::write_jsonl(scored, require(pick(paths_.scored, cfg.paths.scored), "--output"));
        for (const auto& id : st.empty_encodings) note("score: record \"" + id + "\" has no tokens");
      };
    });
  }

  void add_partition() {
    auto* sub = app_.add_subcommand("partition", "Split scored records into retained and rejected");
    sub->add_option("--input", paths_.scored, "Scored JSONL");
    sub->add_option("--retained", paths_.retained, "Final retained JSONL");
    sub->add_option("--rejects", paths_.rejects, "Semantic rejects JSONL");
    sub->add_option("--report", paths_.report, "Partition report (JSON)");
    sub->add_flag("--strip-provenance", strip_provenance_, "Write bare comment-code pairs");
    add_strategy(sub);
    sub->callback([this] {
      action_ = [this] {
        auto cfg = config();
        auto records = qclean::read_jsonl(require(pick(paths_.scored, cfg.paths.scored), "--input"));
        auto out = qclean::partition_records(std::move(records), cfg.threshold.to_strategy(), strip_provenance_);
        qclean::write_jsonl(out.retained, require(pick(paths_.retained, cfg.paths.retained), "--retained"));
        qclean::write_jsonl(out.rejects, require(pick(paths_.rejects, cfg.paths.rejects), "--rejects"));
        const auto report = qclean::report_to_json(out.report);
        const std::string report_path = pick(paths_.report, cfg.paths.report);
        if (!report_path.empty()) qclean::write_json(report, report_path);
        note(report.dump(2));
      };
    });
  }

  void add_run() {
    auto* sub = app_.add_subcommand("run", "Rule filter, train, score and partition in one go");
    sub->add_option("--input", paths_.input, "Raw comment-code JSONL");
    sub->add_option("--bootstrap", paths_.bootstrap, "Query corpus, one per line");
    sub->add_option("--out-dir", paths_.out_dir, "Directory for all artifacts");
    sub->add_option("--epochs", over_.epochs, "Training epochs");
    sub->add_flag("--strip-provenance", strip_provenance_, "Write bare comment-code pairs");
    add_disable_rule(sub);
    add_strategy(sub);
    sub->callback([this] {
      action_ = [this] {
        auto cfg = config();
        qclean::RunOptions opt{global_.jobs, strip_provenance_, diag()};
        qclean::run_pipeline(require(pick(paths_.input, cfg.paths.input), "--input"),
                             require(pick(paths_.bootstrap, cfg.paths.bootstrap), "--bootstrap"),
                             require(pick(paths_.out_dir, cfg.paths.out_dir), "--out-dir"), cfg, opt);
      };
    });
  }

  void add_metrics() {
    auto* sub = app_.add_subcommand("metrics", "MRR and Answered@k from a rank file");
    sub->add_option("--ranks", ranks_path_, "JSONL with query_id and rank (integer or null)")->required();
    sub->add_option("--k", ks_, "Cutoffs for Answered@k")->check(CLI::PositiveNumber);
    sub->callback([this] {
      action_ = [this] {
        auto entries = qclean::read_rank_file(ranks_path_);
        std::vector<qclean::Rank> ranks;
        for (const auto& e : entries) ranks.push_back(e.rank);
        nlohmann::json answered = nlohmann::json::object();
        for (auto k : ks_) answered[std::to_string(k)] = qclean::answered_at_k(ranks, k);
        nlohmann::json j{{"queries", ranks.size()}, {"mrr", qclean::mrr(ranks)}, {"answered_at", answered}};
        std::cout << j.dump(2) << '\n';
      };
    });
  }

  void add_sample_size() {
    auto* sub = app_.add_subcommand("sample-size", "Sample size for a confidence level and margin of error");
    sub->add_option("--population", population_, "Population size (omit for infinite)");
    sub->add_option("--z", z_, "Z-score of the confidence level");
    sub->add_option("--p", p_, "Standard deviation guess");
    sub->add_option("--c", c_, "Margin of error");
    sub->callback([this] {
      action_ = [this] { std::cout << qclean::sample_size(population_, z_, p_, c_) << '\n'; };
    });
  }

  CLI::App app_;
  GlobalFlags global_;
  Overrides over_;
  qclean::PathsConfig paths_;
  bool strip_provenance_ = false;
  std::string ranks_path_;
  std::vector<std::uint64_t> ks_{1, 5, 10};
  std::optional<std::uint64_t> population_;
  double z_ = 1.96;
  double p_ = 0.5;
  double c_ = 0.05;
  std::function<void()> action_;
};

}  // namespace

int main(int argc, char** argv) {
  Cli cli;
  return cli.main(argc, argv);
}
