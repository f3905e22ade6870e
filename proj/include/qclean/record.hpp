#pragma once

// Comment-code records and their JSONL representation.

#include <cmath>
#include <cstddef>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "qclean/error.hpp"

namespace qclean {

enum class Stage { extract, rule, semantic };
enum class ProvenanceAction { transformed, rejected, retained };

struct ProvenanceEntry {
  Stage stage = Stage::extract;
  std::optional<std::string> rule_id;
  ProvenanceAction action = ProvenanceAction::retained;
  std::optional<std::string> before;
  std::optional<std::string> after;

  friend bool operator==(const ProvenanceEntry&, const ProvenanceEntry&) = default;
};

struct Record {
  std::string id;
  std::string comment;
  std::string code;
  std::vector<ProvenanceEntry> provenance;
  std::optional<double> score;       // reconstruction loss, nats/token
  nlohmann::json extra = nlohmann::json::object();  // unknown fields, kept verbatim

  friend bool operator==(const Record&, const Record&) = default;
};

NLOHMANN_JSON_SERIALIZE_ENUM(Stage, {{Stage::extract, "extract"},
                                     {Stage::rule, "rule"},
                                     {Stage::semantic, "semantic"}})
NLOHMANN_JSON_SERIALIZE_ENUM(ProvenanceAction, {{ProvenanceAction::transformed, "transformed"},
                                                {ProvenanceAction::rejected, "rejected"},
                                                {ProvenanceAction::retained, "retained"}})

inline void to_json(nlohmann::json& j, const ProvenanceEntry& e) {
  j = nlohmann::json{{"stage", e.stage}, {"action", e.action}};
  if (e.rule_id) j["rule_id"] = *e.rule_id;
  if (e.before) j["before"] = *e.before;
  if (e.after) j["after"] = *e.after;
}

inline void from_json(const nlohmann::json& j, ProvenanceEntry& e) {
  if (!j.is_object()) throw Error(ErrorKind::invalid_argument, "provenance entry must be an object");
  auto stage = j.at("stage").get<Stage>();
  auto action = j.at("action").get<ProvenanceAction>();
  // The enum (de)serializer maps unknown strings to the first enumerator.
  if (j.at("stage") != nlohmann::json(stage) || j.at("action") != nlohmann::json(action))
    throw Error(ErrorKind::invalid_argument, "unknown provenance stage or action");
  e.stage = stage;
  e.action = action;
  e.rule_id.reset();
  e.before.reset();
  e.after.reset();
  if (j.contains("rule_id")) e.rule_id = j.at("rule_id").get<std::string>();
  if (j.contains("before")) e.before = j.at("before").get<std::string>();
  if (j.contains("after")) e.after = j.at("after").get<std::string>();
}

inline nlohmann::json record_to_json(const Record& r) {
  nlohmann::json j = r.extra.is_object() ? r.extra : nlohmann::json::object();
  j["id"] = r.id;
  j["comment"] = r.comment;
  j["code"] = r.code;
  if (!r.provenance.empty()) j["provenance"] = r.provenance;
  if (r.score) j["score"] = *r.score;
  return j;
}

/// Parses one JSON object. Throws Error naming the offending field.
inline Record record_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(ErrorKind::invalid_argument, "record is not a JSON object");
  Record r;
  for (const char* field : {"id", "comment", "code"}) {
    if (!j.contains(field)) throw Error(ErrorKind::invalid_argument, std::string("missing required field \"") + field + "\"");
    if (!j.at(field).is_string()) throw Error(ErrorKind::invalid_argument, std::string("field \"") + field + "\" must be a string");
  }
  r.id = j.at("id").get<std::string>();
  r.comment = j.at("comment").get<std::string>();
  r.code = j.at("code").get<std::string>();
  if (j.contains("provenance")) {
    const auto& p = j.at("provenance");
    if (!p.is_array()) throw Error(ErrorKind::invalid_argument, "field \"provenance\" must be an array");
    for (const auto& e : p) r.provenance.push_back(e.get<ProvenanceEntry>());
  }
  if (j.contains("score") && !j.at("score").is_null()) {
    if (!j.at("score").is_number()) throw Error(ErrorKind::invalid_argument, "field \"score\" must be a number");
    r.score = j.at("score").get<double>();
  }
  for (const auto& [key, value] : j.items()) {
    if (key != "id" && key != "comment" && key != "code" && key != "provenance" && key != "score")
      r.extra[key] = value;
  }
  return r;
}

/// Reads JSONL records in file order. Blank lines are skipped. Errors carry
/// the 1-based line number; ids must be unique within the stream.
inline std::vector<Record> read_jsonl(std::istream& in, const std::string& source = "<stream>") {
  std::vector<Record> records;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto where = [&] { return source + ":" + std::to_string(line_no) + ": "; };
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorKind::io, where() + "malformed JSON: " + e.what());
    }
    Record r;
    try {
      r = record_from_json(j);
    } catch (const Error& e) {
      throw Error(ErrorKind::io, where() + e.what());
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::io, where() + e.what());
    }
    if (!seen.insert(r.id).second) throw Error(ErrorKind::io, where() + "duplicate id \"" + r.id + "\"");
    records.push_back(std::move(r));
  }
  if (in.bad()) throw Error(ErrorKind::io, source + ": read failure");
  return records;
}

inline std::vector<Record> read_jsonl(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open " + path);
  return read_jsonl(in, path);
}

inline void write_jsonl(const std::vector<Record>& records, std::ostream& out) {
  for (const auto& r : records) out << record_to_json(r).dump() << '\n';
}

inline void write_jsonl(const std::vector<Record>& records, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::io, "cannot open " + path + " for writing");
  write_jsonl(records, out);
  out.flush();
  if (!out) throw Error(ErrorKind::io, "write failure on " + path);
}

}  // namespace qclean
